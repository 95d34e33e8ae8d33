#include "mmic/metrics.hpp"

#include "mmic/errors.hpp"

#include <json.hpp>

#include <array>
#include <charconv>

namespace mmic {

using ojson = nlohmann::ordered_json;

std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), r.ptr);
}

std::string metrics_json_line(const MetricsRecord& r, const std::string& run_id) {
    ojson j;
    j["schema"] = kMetricsSchemaVersion;
    j["run_id"] = run_id;
    j["round"] = r.round;
    j["global"] = {{"accuracy", r.global_accuracy}, {"macro_f1", r.global_f1}};
    j["personalized"] = {{"accuracy", r.personalized_accuracy}, {"macro_f1", r.personalized_f1}};
    j["selected"] = r.selected;
    ojson clusters = ojson::array();
    for (const auto& c : r.clusters) {
        ojson cj;
        cj["cluster"] = c.cluster;
        cj["members"] = c.members;
        cj["probabilities"] = c.probabilities;
        cj["selected"] = c.selected;
        cj["returns"] = c.returns;
        cj["core"] = c.core;
        cj["A"] = c.cluster_return;
        cj["threshold"] = c.threshold;
        cj["risk"] = c.risk;
        cj["rarc"] = c.rarc;
        cj["beta_star"] = c.beta_star;
        cj["substitution_skipped"] = c.substitution_skipped;
        clusters.push_back(std::move(cj));
    }
    j["clusters"] = std::move(clusters);
    ojson pov = ojson::array();
    for (const auto& p : r.poverty)
        pov.push_back({{"client", p.client}, {"cluster", p.cluster}, {"layer", p.layer}, {"rate", p.rate},
                       {"substituted", p.substituted}});
    j["poverty"] = std::move(pov);
    j["ledger"] = {{"T", r.selected_counts}, {"phi", r.core_counts}};
    j["subset_samples"] = r.subset_samples;
    j["trained_samples"] = r.trained_samples;
    j["missing_rates"] = r.missing_rates;
    return j.dump();
}

MetricsSummaryRow parse_metrics_line(const std::string& line) {
    ojson j;
    try {
        j = ojson::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("unparseable metrics line: ") + e.what());
    }
    try {
        if (j.at("schema").get<int>() != kMetricsSchemaVersion) throw ConfigError("unsupported metrics schema version");
        MetricsSummaryRow row;
        row.round = j.at("round").get<std::size_t>();
        row.global_accuracy = j.at("global").at("accuracy").get<double>();
        row.global_f1 = j.at("global").at("macro_f1").get<double>();
        row.personalized_accuracy = j.at("personalized").at("accuracy").get<double>();
        row.personalized_f1 = j.at("personalized").at("macro_f1").get<double>();
        return row;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("metrics line missing field: ") + e.what());
    }
}

std::string summary_csv_header() { return "round,global_acc,global_f1,personalized_acc"; }

std::string summary_csv_line(const MetricsRecord& r) {
    return std::to_string(r.round) + "," + format_double(r.global_accuracy) + "," + format_double(r.global_f1) + "," +
           format_double(r.personalized_accuracy);
}

} // namespace mmic
