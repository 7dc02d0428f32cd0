#include "flaglab/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

namespace flaglab {

namespace {

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.12e", v);
    return buf;
}

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default:
            if (static_cast<unsigned char>(c) < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                out += buf;
            } else {
                out += c;
            }
        }
    }
    return out;
}

std::string q(const std::string& s) { return "\"" + json_escape(s) + "\""; }

void write_map(std::ostream& os, const std::map<std::string, double>& m,
               const std::string& pad) {
    if (m.empty()) {
        os << "{}";
        return;
    }
    os << "{\n";
    bool first = true;
    for (const auto& [k, v] : m) {
        if (!first) os << ",\n";
        first = false;
        os << pad << "  " << q(k) << ": " << fmt_double(v);
    }
    os << "\n" << pad << "}";
}

std::string emit_json(const RunReport& r) {
    std::ostringstream os;
    os << "{\n  \"checks\": [";
    for (std::size_t i = 0; i < r.checks.size(); ++i) {
        const CheckResult& c = r.checks[i];
        os << (i ? ",\n" : "\n") << "    {\n";
        os << "      \"constants\": ";
        write_map(os, c.constants, "      ");
        os << ",\n      \"exponents\": ";
        write_map(os, c.exponents, "      ");
        os << ",\n      \"name\": " << q(c.name);
        os << ",\n      \"reason\": " << q(c.reason);
        os << ",\n      \"verdict\": " << q(c.verdict);
        os << "\n    }";
    }
    os << (r.checks.empty() ? "]" : "\n  ]") << ",\n";
    const SuiteConfig& cfg = r.config;
    os << "  \"config\": {\n";
    os << "    \"bless\": " << (cfg.bless ? "true" : "false") << ",\n";
    os << "    \"data_dir\": " << q(cfg.data_dir) << ",\n";
    os << "    \"grid_nodes\": " << cfg.grid_nodes << ",\n";
    os << "    \"group\": " << q(cfg.group) << ",\n";
    os << "    \"jobs\": " << cfg.jobs << ",\n";
    os << "    \"out_dir\": " << q(cfg.out_dir) << ",\n";
    os << "    \"partitions\": [";
    for (std::size_t i = 0; i < cfg.partitions.size(); ++i) {
        os << (i ? ", [" : "[");
        for (std::size_t j = 0; j < cfg.partitions[i].size(); ++j)
            os << (j ? ", " : "") << cfg.partitions[i][j];
        os << "]";
    }
    os << "],\n";
    os << "    \"seed\": " << cfg.seed << ",\n";
    os << "    \"suite\": " << q(cfg.suite) << ",\n";
    os << "    \"tolerances\": ";
    write_map(os, cfg.tolerances, "    ");
    os << ",\n    \"window\": [";
    for (std::size_t i = 0; i < cfg.window.size(); ++i)
        os << (i ? ", " : "") << cfg.window[i];
    os << "]\n  },\n";
    os << "  \"version\": " << q(r.version) << "\n}\n";
    return os.str();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string emit_csv(const RunReport& r) {
    std::ostringstream os;
    os << "check,verdict,reason,metric,value\n";
    for (const CheckResult& c : r.checks) {
        const std::string head =
            csv_field(c.name) + "," + csv_field(c.verdict) + "," + csv_field(c.reason);
        bool wrote = false;
        for (const auto& [k, v] : c.constants) {
            os << head << "," << csv_field(k) << "," << fmt_double(v) << "\n";
            wrote = true;
        }
        for (const auto& [k, v] : c.exponents) {
            os << head << "," << csv_field(k) << "," << fmt_double(v) << "\n";
            wrote = true;
        }
        if (!wrote) os << head << ",,\n";
    }
    return os.str();
}

std::string emit_text(const RunReport& r) {
    std::size_t wname = 5;
    for (const CheckResult& c : r.checks) wname = std::max(wname, c.name.size());
    std::ostringstream os;
    os << r.version << "  suite=" << r.config.suite << "  seed=" << r.config.seed << "\n";
    int fails = 0, skips = 0;
    for (const CheckResult& c : r.checks) {
        os << c.name << std::string(wname - c.name.size() + 2, ' ');
        os << c.verdict;
        if (c.verdict != "PASS") os << "  (" << c.reason << ")";
        if (c.verdict == "FAIL") ++fails;
        if (c.verdict == "SKIP") ++skips;
        bool first = true;
        for (const auto& [k, v] : c.constants) {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "%.6g", v);
            os << (first ? "  " : ", ") << k << "=" << buf;
            first = false;
        }
        for (const auto& [k, v] : c.exponents) {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "%.6g", v);
            os << (first ? "  " : ", ") << k << "=" << buf;
            first = false;
        }
        os << "\n";
    }
    os << "checks: " << r.checks.size() << "  failures: " << fails << "  skipped: " << skips
       << "\n";
    return os.str();
}

} // namespace

bool RunReport::any_fail() const {
    for (const CheckResult& c : checks)
        if (c.verdict == "FAIL") return true;
    return false;
}

double RunReport::total_seconds() const {
    double s = 0.0;
    for (const CheckResult& c : checks) s += c.seconds;
    return s;
}

std::string emit_report(const RunReport& r, ReportFormat f) {
    switch (f) {
    case ReportFormat::Json: return emit_json(r);
    case ReportFormat::Csv: return emit_csv(r);
    case ReportFormat::Text: return emit_text(r);
    }
    return {};
}

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& ptr, const std::string& msg) {
    throw ConfigError(ptr, msg);
}

int require_int(const json& j, const std::string& ptr, int lo) {
    if (!j.is_number_integer()) bad(ptr, "expected an integer");
    const long long v = j.get<long long>();
    if (v < lo) bad(ptr, "value below the minimum " + std::to_string(lo));
    return static_cast<int>(v);
}

} // namespace

SuiteConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) bad("", "config must be a JSON object");
    static const std::vector<std::string> known = {
        "bless",  "data_dir", "grid_nodes", "group",      "jobs",  "out_dir",
        "partitions", "seed", "suite",      "tolerances", "window"};
    for (const auto& [k, v] : j.items()) {
        (void)v;
        if (std::find(known.begin(), known.end(), k) == known.end())
            bad("/" + k, "unknown config field");
    }
    SuiteConfig c;
    if (j.contains("suite")) {
        if (!j["suite"].is_string()) bad("/suite", "expected a string");
        c.suite = j["suite"].get<std::string>();
    }
    if (j.contains("group")) {
        if (!j["group"].is_string()) bad("/group", "expected a string");
        c.group = j["group"].get<std::string>();
        static const std::vector<std::string> groups = {"abelian", "heisenberg", "engel"};
        if (std::find(groups.begin(), groups.end(), c.group) == groups.end())
            bad("/group", "unknown group '" + c.group + "'");
    }
    if (j.contains("partitions")) {
        const json& ps = j["partitions"];
        if (!ps.is_array()) bad("/partitions", "expected an array of partitions");
        c.partitions.clear();
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const std::string pi = "/partitions/" + std::to_string(i);
            if (!ps[i].is_array()) bad(pi, "expected an array of block sizes");
            std::vector<int> part;
            for (std::size_t k = 0; k < ps[i].size(); ++k)
                part.push_back(require_int(ps[i][k], pi + "/" + std::to_string(k), 1));
            if (part.empty()) bad(pi, "partition must have at least one block");
            c.partitions.push_back(std::move(part));
        }
    }
    if (j.contains("window")) {
        const json& w = j["window"];
        if (!w.is_array()) bad("/window", "expected an array of radii");
        c.window.clear();
        for (std::size_t i = 0; i < w.size(); ++i)
            c.window.push_back(require_int(w[i], "/window/" + std::to_string(i), 1));
        if (c.window.empty()) bad("/window", "at least one window radius is required");
        for (std::size_t i = 1; i < c.window.size(); ++i)
            if (c.window[i] <= c.window[i - 1])
                bad("/window/" + std::to_string(i), "radii must be strictly increasing");
    }
    if (j.contains("grid_nodes")) c.grid_nodes = require_int(j["grid_nodes"], "/grid_nodes", 3);
    if (j.contains("tolerances")) {
        const json& t = j["tolerances"];
        if (!t.is_object()) bad("/tolerances", "expected an object of named tolerances");
        for (const auto& [k, v] : t.items()) {
            if (!v.is_number()) bad("/tolerances/" + k, "expected a number");
            const double tv = v.get<double>();
            if (!(tv > 0.0)) bad("/tolerances/" + k, "tolerance must be positive");
            c.tolerances[k] = tv;
        }
    }
    if (!j.contains("seed")) bad("/seed", "seed is mandatory");
    {
        const json& s = j["seed"];
        if (!s.is_number_integer() || s.get<long long>() < 0)
            bad("/seed", "expected a nonnegative integer");
        c.seed = static_cast<unsigned>(s.get<long long>());
        c.seed_set = true;
    }
    if (j.contains("out_dir")) {
        if (!j["out_dir"].is_string()) bad("/out_dir", "expected a string");
        c.out_dir = j["out_dir"].get<std::string>();
    }
    if (j.contains("data_dir")) {
        if (!j["data_dir"].is_string()) bad("/data_dir", "expected a string");
        c.data_dir = j["data_dir"].get<std::string>();
    }
    if (j.contains("jobs")) c.jobs = require_int(j["jobs"], "/jobs", 1);
    if (j.contains("bless")) {
        if (!j["bless"].is_boolean()) bad("/bless", "expected a boolean");
        c.bless = j["bless"].get<bool>();
    }
    return c;
}

nlohmann::json config_to_json(const SuiteConfig& c) {
    json j;
    j["suite"] = c.suite;
    j["group"] = c.group;
    j["partitions"] = c.partitions;
    j["window"] = c.window;
    j["grid_nodes"] = c.grid_nodes;
    j["tolerances"] = c.tolerances;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    j["data_dir"] = c.data_dir;
    j["jobs"] = c.jobs;
    j["bless"] = c.bless;
    return j;
}

} // namespace flaglab
