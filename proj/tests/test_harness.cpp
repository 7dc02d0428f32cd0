#include "doctest.h"

#include <cstdlib>

#include <nlohmann/json.hpp>

#include "flaglab/report.hpp"
#include "flaglab/suites.hpp"

using namespace flaglab;
using nlohmann::json;

namespace {

SuiteConfig base_config(const std::string& suite) {
    SuiteConfig cfg;
    cfg.suite = suite;
    cfg.seed = 20260824u;
    cfg.seed_set = true;
    cfg.data_dir = FLAGLAB_DATA_DIR;
    return cfg;
}

std::string pointer_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e.pointer;
    }
    return "<no error>";
}

} // namespace

TEST_CASE("config validation reports JSON pointers") {
    json good = {{"suite", "tables"}, {"seed", 7}};
    const SuiteConfig cfg = config_from_json(good);
    CHECK(cfg.suite == "tables");
    CHECK(cfg.seed == 7u);
    CHECK(cfg.seed_set);

    CHECK(pointer_of([] { config_from_json(json{{"suite", "tables"}}); }) == "/seed");
    CHECK(pointer_of([] {
              config_from_json(json{{"seed", 1}, {"window", json::array({0, 2})}});
          }) == "/window/0");
    CHECK(pointer_of([] {
              config_from_json(json{{"seed", 1}, {"window", json::array({2, 2})}});
          }) == "/window/1");
    CHECK(pointer_of([] {
              config_from_json(json{{"seed", 1}, {"partitions", json::array({json::array({2, 0})})}});
          }) == "/partitions/0/1");
    CHECK(pointer_of([] { config_from_json(json{{"seed", 1}, {"group", "borel"}}); }) ==
          "/group");
    CHECK(pointer_of([] { config_from_json(json{{"seed", 1}, {"threads", 4}}); }) ==
          "/threads");
    CHECK(pointer_of([] {
              config_from_json(json{{"seed", 1}, {"tolerances", {{"saturation", -0.1}}}});
          }) == "/tolerances/saturation");
    CHECK(pointer_of([] { config_from_json(json::array()); }).empty());

    // round trip
    const SuiteConfig again = config_from_json(config_to_json(cfg));
    CHECK(again.suite == cfg.suite);
    CHECK(again.seed == cfg.seed);
}

TEST_CASE("unknown suite is rejected with the /suite pointer") {
    SuiteConfig cfg = base_config("spectral");
    CHECK(pointer_of([&] { run_suite(cfg); }) == "/suite");
    SuiteConfig noseed = base_config("tables");
    noseed.seed_set = false;
    CHECK(pointer_of([&] { run_suite(noseed); }) == "/seed");
}

TEST_CASE("emit_report is deterministic and format-complete") {
    RunReport r;
    r.config = base_config("tables");
    CheckResult a;
    a.name = "c1.demo";
    a.verdict = "FAIL";
    a.reason = "value, with \"quotes\"";
    a.constants["beta"] = 0.25;
    a.constants["alpha"] = 1.0 / 3.0;
    a.exponents["eps_hat"] = -0.5;
    a.seconds = 1.25; // must not appear in any serialization
    CheckResult b;
    b.name = "c2.demo";
    r.checks = {a, b};

    for (ReportFormat f : {ReportFormat::Json, ReportFormat::Csv, ReportFormat::Text}) {
        const std::string one = emit_report(r, f);
        const std::string two = emit_report(r, f);
        CHECK(one == two);
        CHECK(one.find("1.25") == std::string::npos);
        CHECK(one.find("seconds") == std::string::npos);
    }
    const std::string js = emit_report(r, ReportFormat::Json);
    const json parsed = json::parse(js);
    CHECK(parsed["checks"].size() == 2);
    CHECK(parsed["checks"][0]["constants"]["alpha"].get<double>() ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(parsed["checks"][0]["reason"].get<std::string>() == "value, with \"quotes\"");
    // keys arrive sorted
    CHECK(js.find("\"alpha\"") < js.find("\"beta\""));
    CHECK(js.find("\"checks\"") < js.find("\"config\""));
    CHECK(js.find("\"config\"") < js.find("\"version\""));

    const std::string cs = emit_report(r, ReportFormat::Csv);
    CHECK(cs.rfind("check,verdict,reason,metric,value\n", 0) == 0);
    CHECK(cs.find("\"value, with \"\"quotes\"\"\"") != std::string::npos);
    CHECK(cs.find("c2.demo,PASS,,,") != std::string::npos);

    const std::string tx = emit_report(r, ReportFormat::Text);
    CHECK(tx.find("c1.demo") != std::string::npos);
    CHECK(tx.find("FAIL") != std::string::npos);
    CHECK(tx.find("failures: 1") != std::string::npos);
}

TEST_CASE("reports are identical across worker counts") {
    SuiteConfig cfg = base_config("geom-sum");
    const RunReport serial = run_suite(cfg);
    cfg.jobs = 4;
    const RunReport parallel = run_suite(cfg);
    // jobs is part of the config echo, so compare the checks via a copy
    RunReport reserial = parallel;
    reserial.config.jobs = 1;
    CHECK(emit_report(serial, ReportFormat::Json) ==
          emit_report(reserial, ReportFormat::Json));
    CHECK_FALSE(serial.any_fail());
}

TEST_CASE("environment seed override wins over the config") {
    SuiteConfig cfg = base_config("tables");
    cfg.seed = 1u;
    setenv("FLAGLAB_SEED", "42", 1);
    const RunReport rep = run_suite(cfg);
    unsetenv("FLAGLAB_SEED");
    CHECK(rep.config.seed == 42u);
    CHECK_FALSE(rep.any_fail());
}

TEST_CASE("suite battery is stable and complete") {
    const auto names = suite_names();
    CHECK(names.size() == 9);
    CHECK(names.front() == "tables");
    CHECK(names.back() == "operators");
}
