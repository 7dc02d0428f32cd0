#pragma once

#include <string>
#include <vector>

#include "flaglab/report.hpp"

namespace flaglab {

/// The named verification suites, in battery order.
std::vector<std::string> suite_names();

/**
 * Execute the configured suite (or the complete battery for "all") and
 * collect verdicts. Checks are assembled in a fixed order regardless of
 * cfg.jobs; a check that throws is recorded as FAIL with the message.
 * Throws ConfigError when cfg names an unknown suite or carries no seed.
 */
RunReport run_suite(const SuiteConfig& cfg);

} // namespace flaglab
