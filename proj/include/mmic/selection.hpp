#pragma once

#include "mmic/rng.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace mmic {

/// Round-over-round change of a client's evaluation metric.
inline double client_return(double metric_now, double metric_prev) { return metric_now - metric_prev; }

/// Weighted sum of returns, A = sum_i w_i * alpha_i.
double coalition_return(std::span<const double> weights, std::span<const double> returns);

/// Positions (into the subset) of the swing clients: A_S >= threshold and
/// A_{S without i} < threshold, with the same fixed weights.
std::vector<std::size_t> identify_core_members(std::span<const double> weights, std::span<const double> returns,
                                               double threshold);

enum class ThresholdRule { zero, running_mean };

struct ClientLedgerEntry {
    long selected = 0; // T(i)
    long core = 0;     // phi(i)
    std::vector<std::pair<std::size_t, double>> returns; // (round, alpha)
    std::optional<double> last_metric;                   // from the latest selected round
};

class SelectionLedger {
public:
    SelectionLedger(std::size_t clients, std::size_t clusters);

    std::size_t clients() const noexcept { return entries_.size(); }
    const ClientLedgerEntry& entry(std::size_t client) const { return entries_.at(client); }

    /// alpha = metric - previous selected-round metric (0 if none), appended to history.
    double record_metric(std::size_t client, std::size_t round, double metric);

    /// T(i) += 1 for selected, phi(i) += 1 for core. core must be a subset of selected.
    void update_counters(std::span<const std::size_t> selected, std::span<const std::size_t> core);

    /// Success threshold for a cluster this round (before recording its A).
    double threshold(std::size_t cluster, ThresholdRule rule) const;
    void record_cluster_return(std::size_t cluster, double a);

    std::vector<long> selected_counts() const;
    std::vector<long> core_counts() const;

private:
    std::vector<ClientLedgerEntry> entries_;
    std::vector<std::vector<double>> cluster_returns_;
};

/// softmax over members of tau * phi(i) / T(i), with the ratio 0 when T(i) = 0.
std::vector<double> selection_probabilities(const SelectionLedger& ledger, std::span<const std::size_t> members,
                                            double tau);

/// Weighted sampling without replacement: draw one, drop it, renormalise.
/// Returns ascending positions into `probabilities`.
std::vector<std::size_t> sample_clients(std::span<const double> probabilities, std::size_t count, Rng& rng);

/// max(1, round(fraction * cluster_size)), capped at cluster_size.
std::size_t selection_count(std::size_t cluster_size, double fraction);

} // namespace mmic
