#pragma once

#include <string>
#include <vector>

namespace gmr {

/// Plain-text configuration: `[section]` headers with `key = value` lines.
/// Unknown sections or keys are rejected against the experiment schema so a
/// misspelled parameter can never silently fall back to a default.
struct ConfigFile {
    struct Section {
        std::string name;
        std::vector<std::pair<std::string, std::string>> entries;
        bool operator==(const Section&) const = default;
    };
    std::vector<Section> sections;

    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text);
    std::string emit() const;

    bool has(const std::string& section, const std::string& key) const;
    const std::string& get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key) const;
    double get_double_or(const std::string& section, const std::string& key,
                         double fallback) const;
    long get_long(const std::string& section, const std::string& key) const;
    long get_long_or(const std::string& section, const std::string& key, long fallback) const;
    std::vector<double> get_list(const std::string& section, const std::string& key) const;

    bool operator==(const ConfigFile&) const = default;
};

enum class ExperimentKind {
    lq_table,
    triad_case,
    strong_rate,
    sigma_star,
    pitchfork_scan,
    worst_case,
};

ExperimentKind parse_kind(const std::string& name);
std::string kind_name(ExperimentKind kind);

/// A schema-validated experiment description.
struct ExperimentConfig {
    ExperimentKind kind;
    unsigned long long seed = 1;
    std::string output_dir = ".";
    ConfigFile file;

    static ExperimentConfig load(const std::string& path);
    static ExperimentConfig from_file(const ConfigFile& file);
};

}  // namespace gmr
