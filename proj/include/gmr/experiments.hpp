#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gmr/config.hpp"

namespace gmr {

/// Outcome of one experiment run: headline numbers (each also present in an
/// emitted CSV) and the list of files written.
struct ExperimentReport {
    std::string kind;
    std::vector<std::pair<std::string, double>> headline;
    std::vector<std::string> output_files;
    double wall_seconds = 0.0;

    std::string summary() const;
};

ExperimentReport run_experiment(const ExperimentConfig& cfg);

ExperimentReport run_lq_table(const ExperimentConfig& cfg);
ExperimentReport run_triad_case(const ExperimentConfig& cfg);
ExperimentReport run_strong_rate(const ExperimentConfig& cfg);
ExperimentReport run_sigma_star(const ExperimentConfig& cfg);
ExperimentReport run_pitchfork_scan(const ExperimentConfig& cfg);
ExperimentReport run_worst_case(const ExperimentConfig& cfg);

/// Writes `contents` to `path` via a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& contents);

/// Runs writer(tmp) against a temporary name, then renames onto `path`.
void write_atomic(const std::string& path,
                  const std::function<void(const std::string&)>& writer);

}  // namespace gmr
