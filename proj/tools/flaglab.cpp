#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flaglab/combinatorics.hpp"
#include "flaglab/report.hpp"
#include "flaglab/suites.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

#ifndef FLAGLAB_DATA_DIR
#define FLAGLAB_DATA_DIR "data"
#endif

std::vector<int> parse_blocks(const std::string& spec) {
    std::vector<int> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stoi(item));
    }
    if (out.empty()) throw CLI::ValidationError("partition list is empty");
    return out;
}

void write_file(const fs::path& path, const std::string& bytes) {
    fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    os << bytes;
}

int cmd_run(const std::string& suite, const std::string& config_path,
            const std::string& out_dir, int jobs, bool jobs_set, long long seed,
            bool seed_set, bool bless) {
    json j = json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) {
            std::cerr << "error: cannot open config file " << config_path << "\n";
            return 2;
        }
        try {
            in >> j;
        } catch (const std::exception& e) {
            std::cerr << "error: config is not valid JSON: " << e.what() << "\n";
            return 2;
        }
    }
    j["suite"] = suite;
    if (!out_dir.empty()) j["out_dir"] = out_dir;
    if (jobs_set) j["jobs"] = jobs;
    if (seed_set) j["seed"] = seed;
    if (bless) j["bless"] = true;
    if (!j.contains("seed")) {
        if (const char* env = std::getenv("FLAGLAB_SEED"))
            j["seed"] = std::strtoll(env, nullptr, 10);
    }
    if (!j.contains("data_dir")) j["data_dir"] = FLAGLAB_DATA_DIR;

    flaglab::SuiteConfig cfg;
    try {
        cfg = flaglab::config_from_json(j);
    } catch (const flaglab::ConfigError& e) {
        std::cerr << "config error at " << (e.pointer.empty() ? "/" : e.pointer) << ": "
                  << e.what() << "\n";
        return 2;
    }

    flaglab::RunReport rep;
    try {
        rep = flaglab::run_suite(cfg);
    } catch (const flaglab::ConfigError& e) {
        std::cerr << "config error at " << (e.pointer.empty() ? "/" : e.pointer) << ": "
                  << e.what() << "\n";
        return 2;
    }

    std::cout << flaglab::emit_report(rep, flaglab::ReportFormat::Text);
    if (!cfg.out_dir.empty()) {
        write_file(fs::path(cfg.out_dir) / "report.json",
                   flaglab::emit_report(rep, flaglab::ReportFormat::Json));
        write_file(fs::path(cfg.out_dir) / "report.csv",
                   flaglab::emit_report(rep, flaglab::ReportFormat::Csv));
        for (const auto& [name, gf] : rep.grids) {
            const fs::path p = fs::path(cfg.out_dir) / "grids" / (name + ".bin");
            fs::create_directories(p.parent_path());
            std::ofstream os(p, std::ios::binary);
            flaglab::dump(gf, os);
        }
    }
    return rep.any_fail() ? 1 : 0;
}

int cmd_tables(const std::string& pa, const std::string& pb, const std::string& out_dir) {
    const flaglab::Partition A(parse_blocks(pa));
    const flaglab::Partition B(parse_blocks(pb));
    const flaglab::Table tab = flaglab::emit_tables(A, B);
    std::cout << tab.text();
    if (!out_dir.empty()) write_file(fs::path(out_dir) / "table.csv", tab.csv());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"flaglab: verification workbench for flag kernels on homogeneous groups"};
    app.require_subcommand(1);

    std::string suite, config_path, out_dir;
    int jobs = 1;
    long long seed = 0;
    bool bless = false;
    auto* run = app.add_subcommand("run", "run a verification suite (or 'all')");
    run->add_option("suite", suite, "suite name or 'all'")->required();
    run->add_option("--config", config_path, "JSON config file");
    run->add_option("--out", out_dir, "output directory for reports and artifacts");
    auto* jobs_opt = run->add_option("--jobs", jobs, "worker threads");
    auto* seed_opt = run->add_option("--seed", seed, "override the config seed");
    run->add_flag("--bless", bless, "rewrite golden tables from the current output");

    std::string pa, pb, tables_out;
    auto* tables = app.add_subcommand("tables", "emit a shuffle-class table");
    tables->add_option("--pa", pa, "first partition, e.g. 2,3")->required();
    tables->add_option("--pb", pb, "second partition, e.g. 1,2,2")->required();
    tables->add_option("--out", tables_out, "directory for the CSV form");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(suite, config_path, out_dir, jobs, jobs_opt->count() > 0, seed,
                           seed_opt->count() > 0, bless);
        return cmd_tables(pa, pb, tables_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
