#include "gmr/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gmr/errors.hpp"

namespace gmr {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

ConfigFile ConfigFile::parse_string(const std::string& text) {
    ConfigFile cf;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    Section* cur = nullptr;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            std::string name = trim(t.substr(1, t.size() - 2));
            if (name.empty())
                throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
            for (const auto& s : cf.sections)
                if (s.name == name)
                    throw ConfigError("line " + std::to_string(lineno) + ": duplicate section [" +
                                      name + "]");
            cf.sections.push_back({name, {}});
            cur = &cf.sections.back();
            continue;
        }
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        if (!cur)
            throw ConfigError("line " + std::to_string(lineno) + ": key outside any [section]");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        for (const auto& e : cur->entries)
            if (e.first == key)
                throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key +
                                  "' in [" + cur->name + "]");
        cur->entries.emplace_back(std::move(key), std::move(value));
    }
    return cf;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
}

std::string ConfigFile::emit() const {
    std::string out;
    for (const auto& s : sections) {
        if (!out.empty()) out += "\n";
        out += "[" + s.name + "]\n";
        for (const auto& e : s.entries) out += e.first + " = " + e.second + "\n";
    }
    return out;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    for (const auto& s : sections)
        if (s.name == section)
            for (const auto& e : s.entries)
                if (e.first == key) return true;
    return false;
}

const std::string& ConfigFile::get(const std::string& section, const std::string& key) const {
    for (const auto& s : sections)
        if (s.name == section)
            for (const auto& e : s.entries)
                if (e.first == key) return e.second;
    throw ConfigError("missing required key [" + section + "] " + key);
}

std::string ConfigFile::get_or(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

namespace {

double to_double(const std::string& section, const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError("[" + section + "] " + key + ": not a number: '" + v + "'");
    return x;
}

}  // namespace

double ConfigFile::get_double(const std::string& section, const std::string& key) const {
    return to_double(section, key, get(section, key));
}

double ConfigFile::get_double_or(const std::string& section, const std::string& key,
                                 double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
}

long ConfigFile::get_long(const std::string& section, const std::string& key) const {
    const std::string& v = get(section, key);
    char* end = nullptr;
    const long x = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError("[" + section + "] " + key + ": not an integer: '" + v + "'");
    return x;
}

long ConfigFile::get_long_or(const std::string& section, const std::string& key,
                             long fallback) const {
    return has(section, key) ? get_long(section, key) : fallback;
}

std::vector<double> ConfigFile::get_list(const std::string& section,
                                         const std::string& key) const {
    const std::string& v = get(section, key);
    std::vector<double> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty())
            throw ConfigError("[" + section + "] " + key + ": empty list element");
        out.push_back(to_double(section, key, item));
    }
    if (out.empty()) throw ConfigError("[" + section + "] " + key + ": empty list");
    return out;
}

ExperimentKind parse_kind(const std::string& name) {
    if (name == "lq_table") return ExperimentKind::lq_table;
    if (name == "triad_case") return ExperimentKind::triad_case;
    if (name == "strong_rate") return ExperimentKind::strong_rate;
    if (name == "sigma_star") return ExperimentKind::sigma_star;
    if (name == "pitchfork_scan") return ExperimentKind::pitchfork_scan;
    if (name == "worst_case") return ExperimentKind::worst_case;
    throw ConfigError("unknown experiment kind: '" + name + "'");
}

std::string kind_name(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::lq_table: return "lq_table";
        case ExperimentKind::triad_case: return "triad_case";
        case ExperimentKind::strong_rate: return "strong_rate";
        case ExperimentKind::sigma_star: return "sigma_star";
        case ExperimentKind::pitchfork_scan: return "pitchfork_scan";
        case ExperimentKind::worst_case: return "worst_case";
    }
    throw ConfigError("invalid experiment kind value");
}

namespace {

struct SchemaKey {
    const char* section;
    const char* key;
    bool required;
};

const std::vector<SchemaKey>& schema_for(ExperimentKind kind) {
    static const std::vector<SchemaKey> common = {
        {"experiment", "kind", true},
        {"experiment", "seed", false},
        {"experiment", "output_dir", false},
    };
    static const std::vector<SchemaKey> lq_model = {
        {"model", "a11", true},   {"model", "a12", true}, {"model", "a21", true},
        {"model", "a22", true},   {"model", "b1", true},  {"model", "b2", true},
        {"model", "q0", false},   {"model", "q1", true},
        {"model", "fast_scaling_exponent", false},
    };
    static std::vector<std::vector<SchemaKey>> tables = [] {
        std::vector<std::vector<SchemaKey>> t(6);
        auto add = [&](ExperimentKind k, std::vector<SchemaKey> extra) {
            auto& v = t[static_cast<int>(k)];
            v = common;
            v.insert(v.end(), extra.begin(), extra.end());
        };
        auto with_lq = [&](std::vector<SchemaKey> extra) {
            std::vector<SchemaKey> v = lq_model;
            v.insert(v.end(), extra.begin(), extra.end());
            return v;
        };
        add(ExperimentKind::lq_table,
            with_lq({{"run", "epsilons", true},
                     {"run", "sigma_lo", true},
                     {"run", "sigma_hi", true},
                     {"run", "horizon_T", true},
                     {"run", "x0", true},
                     {"grid", "slow_cells", false},
                     {"grid", "fast_cells", false},
                     {"grid", "slow_halfwidth", false},
                     {"grid", "fast_halfwidth", false}}));
        add(ExperimentKind::triad_case,
            {{"model", "a1", true},
             {"model", "a2", true},
             {"model", "a3", true},
             {"model", "lambda_lo", true},
             {"model", "lambda_hi", true},
             {"model", "epsilon", true},
             {"model", "gamma", false},
             {"run", "horizon_T", true},
             {"run", "x0", true},
             {"run", "n_steps", false},
             {"run", "n_samples", false},
             {"run", "degree", false},
             {"grid", "halfwidth", false},
             {"grid", "cells", false}});
        add(ExperimentKind::strong_rate,
            with_lq({{"run", "epsilons", true},
                     {"run", "sigma_lo", true},
                     {"run", "sigma_hi", true},
                     {"run", "n_theta", false},
                     {"run", "n_paths", false},
                     {"run", "horizon_T", true},
                     {"run", "x0", true},
                     {"run", "dt_scale", false}}));
        add(ExperimentKind::sigma_star,
            {{"model", "a_bar", true},
             {"model", "b_bar", true},
             {"model", "q0", false},
             {"model", "terminal_weight", true},
             {"run", "sigma_lo", true},
             {"run", "sigma_hi", true},
             {"run", "horizon_T", true},
             {"grid", "lo", false},
             {"grid", "hi", false},
             {"grid", "cells", false},
             {"run", "store_times", false}});
        add(ExperimentKind::pitchfork_scan,
            {{"run", "thetas", true},
             {"run", "r_lo", false},
             {"run", "r_hi", false},
             {"run", "n_grid", false},
             {"run", "n_scan", false}});
        add(ExperimentKind::worst_case,
            {{"run", "epsilons", true},
             {"run", "theta_lo", true},
             {"run", "theta_hi", true},
             {"run", "n_theta", false},
             {"run", "n_paths", false},
             {"run", "horizon_T", true},
             {"run", "x0", true},
             {"run", "dt_scale", false}});
        return t;
    }();
    return tables[static_cast<int>(kind)];
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const ConfigFile& file) {
    ExperimentConfig cfg;
    cfg.file = file;
    cfg.kind = parse_kind(file.get("experiment", "kind"));
    const auto& schema = schema_for(cfg.kind);
    for (const auto& s : file.sections) {
        for (const auto& e : s.entries) {
            bool known = false;
            for (const auto& sk : schema)
                if (s.name == sk.section && e.first == sk.key) known = true;
            if (!known)
                throw ConfigError("unknown key [" + s.name + "] " + e.first + " for experiment " +
                                  kind_name(cfg.kind));
        }
    }
    for (const auto& sk : schema)
        if (sk.required && !file.has(sk.section, sk.key))
            throw ConfigError(std::string("missing required key [") + sk.section + "] " + sk.key);
    const long seed = file.get_long_or("experiment", "seed", 1);
    if (seed < 0) throw ConfigError("[experiment] seed must be nonnegative");
    cfg.seed = static_cast<unsigned long long>(seed);
    cfg.output_dir = file.get_or("experiment", "output_dir", ".");
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    return from_file(ConfigFile::parse_file(path));
}

}  // namespace gmr
