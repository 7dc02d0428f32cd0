#include "doctest.h"

#include <cstdio>
#include <map>
#include <string>

#include "flaglab/suites.hpp"

using namespace flaglab;

namespace {

struct CriterionInfo {
    const char* label;
    double budget_seconds;
};

const std::map<int, CriterionInfo>& criteria() {
    static const std::map<int, CriterionInfo> m = {
        {1, {"golden shuffle-class tables", 1.0}},
        {2, {"shuffle-class counts", 1.0}},
        {3, {"geometric-sum bounds", 30.0}},
        {4, {"group axioms and dilations", 5.0}},
        {5, {"cancellation primitives", 60.0}},
        {6, {"annular and first-block decompositions", 60.0}},
        {7, {"flag-size saturation", 600.0}},
        {8, {"support and decay of convolutions", 600.0}},
        {9, {"truncated width arithmetic", 300.0}},
        {10, {"almost-orthogonality row sums and L2 norms", 600.0}},
        {11, {"composition of kernel families", 1200.0}},
        {12, {"maximal and square-function operators", 1200.0}},
    };
    return m;
}

int criterion_of(const std::string& name) {
    if (name.size() < 3 || name[0] != 'c') return -1;
    const std::size_t dot = name.find('.');
    if (dot == std::string::npos) return -1;
    return std::stoi(name.substr(1, dot - 1));
}

} // namespace

TEST_CASE("acceptance battery") {
    SuiteConfig cfg;
    cfg.suite = "all";
    cfg.seed = 20260824u;
    cfg.seed_set = true;
    cfg.data_dir = FLAGLAB_DATA_DIR;
    cfg.jobs = 1; // serial execution keeps the per-criterion timings honest

    const RunReport first = run_suite(cfg);
    const RunReport second = run_suite(cfg);

    struct Tally {
        int checks = 0, fails = 0;
        double seconds = 0.0;
    };
    std::map<int, Tally> tally;
    for (const CheckResult& c : first.checks) {
        const int k = criterion_of(c.name);
        REQUIRE(k >= 1);
        REQUIRE(k <= 12);
        Tally& t = tally[k];
        ++t.checks;
        if (c.verdict == "FAIL") ++t.fails;
        t.seconds += c.seconds;
    }

    for (const auto& [k, info] : criteria()) {
        const Tally t = tally.count(k) ? tally[k] : Tally{};
        const bool ok = t.checks > 0 && t.fails == 0 && t.seconds <= info.budget_seconds;
        std::printf("criterion %2d (%s): %s  [%d checks, %.1fs]\n", k, info.label,
                    ok ? "PASS" : "FAIL", t.checks, t.seconds);
        std::fflush(stdout);
        CHECK_MESSAGE(t.checks > 0, "criterion ", k, " has no checks");
        CHECK_MESSAGE(t.fails == 0, "criterion ", k, " has failing checks");
        CHECK_MESSAGE(t.seconds <= info.budget_seconds, "criterion ", k,
                      " exceeded its runtime budget");
    }

    // criterion 13: the full battery replays byte-for-byte under a fixed seed
    bool deterministic = true;
    for (ReportFormat f : {ReportFormat::Json, ReportFormat::Csv, ReportFormat::Text})
        deterministic = deterministic && emit_report(first, f) == emit_report(second, f);
    std::printf("criterion 13 (deterministic replay): %s\n",
                deterministic ? "PASS" : "FAIL");
    std::fflush(stdout);
    CHECK(deterministic);
    CHECK_FALSE(first.any_fail());
}
