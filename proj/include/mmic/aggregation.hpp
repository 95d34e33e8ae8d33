#pragma once

#include "mmic/tensor.hpp"

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace mmic {

/// Entrywise weighted mean; weights are renormalised over the given models.
ModelParams fedavg(std::span<const ModelParams* const> models, std::span<const double> weights);
ModelParams fedavg(std::span<const ModelParams> models, std::span<const double> weights);

/// (round, alpha) pairs in increasing round order.
using ReturnSeries = std::vector<std::pair<std::size_t, double>>;

/// Deviation of every return from the mean of the same client's earlier
/// returns (0 before the first), aligned with the series.
std::vector<double> return_deviations(const ReturnSeries& series);

/// sigma_bar = sum_ij w_i w_j sigma_ij with
/// sigma_ij = 1/(T-1) * sum over rounds where both i and j have returns of
/// dev_i(t) * dev_j(t). Zero when T < 2. Computed directly from the histories.
double cluster_risk(std::span<const ReturnSeries* const> histories, std::span<const double> weights, std::size_t rounds);

/// Incremental path for cluster_risk: running prefix sums give each client's
/// historical mean in O(1) and pairwise cross-products are accumulated once
/// per round, so a risk query costs O(|S|^2) instead of O(|S|^2 T).
class RiskTracker {
public:
    explicit RiskTracker(std::size_t clients);

    /// Returns observed in one round (client, alpha); rounds must not repeat.
    void record_round(std::size_t round, std::span<const std::pair<std::size_t, double>> returns);

    double risk(std::span<const std::size_t> clients, std::span<const double> weights, std::size_t rounds) const;

private:
    std::size_t n_;
    std::vector<double> sum_;      // prefix sum of returns per client
    std::vector<std::size_t> cnt_; // number of returns per client
    std::vector<double> cross_;    // n x n accumulated dev_i * dev_j
    std::size_t last_round_ = 0;
};

/// gamma = lambda * risk - (1 - lambda) * return.
double rarc(double risk, double cluster_return, double lambda);

/// beta* = beta + tanh(relu(gamma)) / tau_s. Requires beta in [0,1),
/// tau_s > 0 and beta + 1/tau_s <= 1.
double dynamic_beta(double beta, double gamma, double tau_s);
void validate_beta_range(double beta, double tau_s);

enum class CombineMode { summed, sequential };
enum class StateMode { per_cluster, pooled };

struct GlobalOptConfig {
    double lr = 0.05;    // eta
    double beta = 0.9;
    double tau_a = 1e-3; // adaptivity constant
    double tau_s = 10.0; // beta* smoothing temperature
    CombineMode combine = CombineMode::summed;
    StateMode state = StateMode::per_cluster;

    void validate() const;
};

/// Server-side FedAdagrad state with one momentum/accumulator per cluster
/// (or a single pooled pair).
struct GlobalOptState {
    GlobalOptConfig config;
    std::vector<ModelParams> momentum;
    std::vector<ModelParams> accum;

    static GlobalOptState create(const ModelParams& model, std::size_t clusters, const GlobalOptConfig& config);
};

/// FedAdagrad step with per-cluster dynamic beta*:
///   delta_m = w_m (Theta_m - theta_G)
///   mtn_m   = beta*_m mtn_m + (1 - beta*_m) delta_m
///   v_m    += delta_m^2
///   theta_G += lr * sum_m mtn_m / (sqrt(v_m) + tau_a)
/// Returns beta*_m per cluster. Cluster weights must sum to 1 within 1e-6.
std::vector<double> global_aggregate(GlobalOptState& state, ModelParams& global,
                                     std::span<const ModelParams* const> cluster_models,
                                     std::span<const double> cluster_weights, std::span<const double> rarcs);

} // namespace mmic
