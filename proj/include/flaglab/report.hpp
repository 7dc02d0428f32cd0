#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flaglab/grid.hpp"

namespace flaglab {

/**
 * Configuration of one verification run. Every field has a workable default
 * except the seed, which must be stated explicitly so that reports are
 * reproducible by construction.
 */
struct SuiteConfig {
    std::string suite = "all"; // one of suite_names() or "all"
    std::string group = "heisenberg";
    std::vector<std::vector<int>> partitions = {{2, 3}, {1, 2, 2}};
    std::vector<int> window = {4, 5, 6};
    int grid_nodes = 65;
    std::map<std::string, double> tolerances; // named overrides, all optional
    unsigned seed = 0;
    bool seed_set = false;
    std::string out_dir;          // empty: no artifacts written
    std::string data_dir = "data"; // golden tables live under <data_dir>/golden
    int jobs = 1;
    bool bless = false; // rewrite golden tables instead of comparing
};

/// Config validation failure with a JSON-pointer locus (e.g. "/window/0").
struct ConfigError : std::runtime_error {
    std::string pointer;
    ConfigError(std::string ptr, const std::string& msg)
        : std::runtime_error(msg + " (at " + (ptr.empty() ? "/" : ptr) + ")"),
          pointer(std::move(ptr)) {}
};

/// Parse and validate a config object; throws ConfigError with the pointer
/// to the offending element.
SuiteConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const SuiteConfig& c);

/// One verdict with its measured constants and fitted exponents. The check
/// name is prefixed by the acceptance criterion it witnesses ("c7.saturation").
struct CheckResult {
    std::string name;
    std::string verdict = "PASS"; // PASS | FAIL | SKIP
    std::string reason;           // populated for FAIL and SKIP
    std::map<std::string, double> constants;
    std::map<std::string, double> exponents;
    double seconds = 0.0; // wall time; excluded from the serialized report
};

struct RunReport {
    SuiteConfig config;
    std::string version = "flaglab 1.0";
    std::vector<CheckResult> checks;
    /// Named grid artifacts (written to <out>/grids/<name>.bin by the CLI).
    std::vector<std::pair<std::string, GridFunction>> grids;

    bool any_fail() const;
    double total_seconds() const;
};

enum class ReportFormat { Json, Csv, Text };

/**
 * Deterministic serialization: keys sorted, floats rendered as %.12e, no
 * timing data. Identical configs and seeds produce byte-identical output.
 */
std::string emit_report(const RunReport& r, ReportFormat f);

} // namespace flaglab
