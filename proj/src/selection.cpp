#include "mmic/selection.hpp"

#include "mmic/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mmic {

double coalition_return(std::span<const double> weights, std::span<const double> returns) {
    if (weights.size() != returns.size()) throw ContractError("coalition_return: weights/returns length mismatch");
    double a = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) a += weights[i] * returns[i];
    return a;
}

std::vector<std::size_t> identify_core_members(std::span<const double> weights, std::span<const double> returns,
                                               double threshold) {
    if (weights.size() != returns.size()) throw ContractError("identify_core_members: length mismatch");
    std::vector<std::size_t> core;
    if (weights.empty()) return core;
    const double total = coalition_return(weights, returns);
    if (total < threshold) return core;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        // recompute rather than subtract so the result matches a fresh leave-one-out sum
        double without = 0.0;
        for (std::size_t j = 0; j < weights.size(); ++j)
            if (j != i) without += weights[j] * returns[j];
        if (without < threshold) core.push_back(i);
    }
    return core;
}

SelectionLedger::SelectionLedger(std::size_t clients, std::size_t clusters)
    : entries_(clients), cluster_returns_(clusters) {}

double SelectionLedger::record_metric(std::size_t client, std::size_t round, double metric) {
    auto& e = entries_.at(client);
    if (!e.returns.empty() && e.returns.back().first >= round)
        throw ContractError("record_metric: rounds must increase for client " + std::to_string(client));
    const double alpha = client_return(metric, e.last_metric.value_or(0.0));
    e.returns.emplace_back(round, alpha);
    e.last_metric = metric;
    return alpha;
}

void SelectionLedger::update_counters(std::span<const std::size_t> selected, std::span<const std::size_t> core) {
    for (auto c : core)
        if (std::find(selected.begin(), selected.end(), c) == selected.end())
            throw ContractError("update_counters: core client " + std::to_string(c) + " was not selected");
    for (auto s : selected) ++entries_.at(s).selected;
    for (auto c : core) ++entries_.at(c).core;
}

double SelectionLedger::threshold(std::size_t cluster, ThresholdRule rule) const {
    if (rule == ThresholdRule::zero) return 0.0;
    const auto& h = cluster_returns_.at(cluster);
    if (h.empty()) return 0.0;
    return std::accumulate(h.begin(), h.end(), 0.0) / static_cast<double>(h.size());
}

void SelectionLedger::record_cluster_return(std::size_t cluster, double a) { cluster_returns_.at(cluster).push_back(a); }

std::vector<long> SelectionLedger::selected_counts() const {
    std::vector<long> out;
    for (const auto& e : entries_) out.push_back(e.selected);
    return out;
}

std::vector<long> SelectionLedger::core_counts() const {
    std::vector<long> out;
    for (const auto& e : entries_) out.push_back(e.core);
    return out;
}

std::vector<double> selection_probabilities(const SelectionLedger& ledger, std::span<const std::size_t> members,
                                            double tau) {
    if (members.empty()) throw ContractError("selection_probabilities: empty cluster");
    if (!(tau > 0.0)) throw ConfigError("selection_probabilities: temperature must be positive");
    std::vector<double> logits;
    logits.reserve(members.size());
    for (auto m : members) {
        const auto& e = ledger.entry(m);
        const double ratio = e.selected > 0 ? static_cast<double>(e.core) / static_cast<double>(e.selected) : 0.0;
        logits.push_back(tau * ratio);
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (auto& l : logits) z += (l = std::exp(l - mx));
    for (auto& l : logits) l /= z;
    return logits;
}

std::vector<std::size_t> sample_clients(std::span<const double> probabilities, std::size_t count, Rng& rng) {
    if (count == 0) throw ConfigError("sample_clients: count must be positive");
    if (count > probabilities.size()) throw ContractError("sample_clients: count exceeds cluster size");
    std::vector<double> p(probabilities.begin(), probabilities.end());
    for (double x : p)
        if (!(x >= 0.0)) throw ContractError("sample_clients: negative probability");
    std::vector<std::size_t> picked;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    while (picked.size() < count) {
        double total = 0.0;
        for (double x : p) total += x;
        std::size_t choice = p.size();
        if (total > 0.0) {
            const double u = u01(rng) * total;
            double cum = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (p[i] <= 0.0) continue;
                cum += p[i];
                choice = i;
                if (u < cum) break;
            }
        } else {
            // remaining mass is zero: fall back to uniform over the unpicked
            std::vector<std::size_t> rest;
            for (std::size_t i = 0; i < p.size(); ++i)
                if (std::find(picked.begin(), picked.end(), i) == picked.end()) rest.push_back(i);
            choice = rest[std::uniform_int_distribution<std::size_t>(0, rest.size() - 1)(rng)];
        }
        picked.push_back(choice);
        p[choice] = 0.0;
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

std::size_t selection_count(std::size_t cluster_size, double fraction) {
    const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(cluster_size)));
    return std::min(cluster_size, std::max<std::size_t>(1, n));
}

} // namespace mmic
