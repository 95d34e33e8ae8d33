#pragma once

#include "mmic/simulation.hpp"

#include <string>
#include <vector>

namespace mmic {

/// Bumped whenever a field in the metrics line changes meaning or name.
inline constexpr int kMetricsSchemaVersion = 1;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// One self-contained JSON object (no trailing newline). Field order is fixed.
std::string metrics_json_line(const MetricsRecord& record, const std::string& run_id);

/// The subset of a metrics line that `compare` and the summary need.
struct MetricsSummaryRow {
    std::size_t round = 0;
    double global_accuracy = 0.0;
    double global_f1 = 0.0;
    double personalized_accuracy = 0.0;
    double personalized_f1 = 0.0;
};

MetricsSummaryRow parse_metrics_line(const std::string& line);

/// "round,global_acc,global_f1,personalized_acc" header.
std::string summary_csv_header();
std::string summary_csv_line(const MetricsRecord& record);

} // namespace mmic
