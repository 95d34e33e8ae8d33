#pragma once

#include "mmic/simulation.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace mmic {

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

/// From MMIC_LOG (quiet | info | debug); info when unset.
LogLevel log_level_from_env();

/// 16 hex chars of FNV-1a 64 over the config snapshot text.
std::string run_id_for(const std::string& config_snapshot);

struct RunOptions {
    std::string config_path;                                 // empty: defaults only
    std::vector<std::pair<std::string, std::string>> overrides; // applied in order
    std::filesystem::path out_dir = "runs";
    LogLevel log = LogLevel::info;
};

/// Files written into the run directory.
inline constexpr const char* kMetricsFile = "metrics.jsonl";
inline constexpr const char* kSummaryFile = "summary.csv";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kConfigFile = "config.txt";
inline constexpr const char* kAssignmentFile = "assignment.txt";
inline constexpr const char* kTimingFile = "timing.csv";

/// Load config + overrides, run the simulation and write the run directory.
/// Returns 0 on success; on failure prints the round context to `err` and
/// returns nonzero.
int run(const RunOptions& options, std::ostream& log, std::ostream& err);

/// One run per value of `key`, in sibling directories <out_dir>/<key_tail>-<value>.
int run_matrix(const RunOptions& options, const std::string& key, const std::vector<std::string>& values,
               std::ostream& log, std::ostream& err);

struct WindowStats {
    double mean = 0.0;
    double std = 0.0; // population standard deviation
};

WindowStats window_stats(const std::vector<double>& series, std::size_t window);

struct CompareRow {
    std::string run;
    std::string run_id;
    std::size_t rounds = 0;
    WindowStats global_accuracy;
    WindowStats global_f1;
    WindowStats personalized_accuracy;
    WindowStats personalized_f1;
};

/// Final-window mean +- std per completed run; incomplete runs are skipped
/// with a warning on `err`.
std::vector<CompareRow> compare_runs(const std::vector<std::filesystem::path>& dirs, std::size_t window,
                                     std::ostream& err);
void print_compare_table(const std::vector<CompareRow>& rows, std::ostream& out);
void write_compare_csv(const std::vector<CompareRow>& rows, std::ostream& out);

} // namespace mmic
