#pragma once

#include "mmic/aggregation.hpp"
#include "mmic/clustering.hpp"
#include "mmic/data.hpp"
#include "mmic/model.hpp"
#include "mmic/parallel.hpp"
#include "mmic/selection.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mmic {

enum class Algorithm { mmic, fedavg, fedadagrad };
enum class ClusteringBackend { lsh_kmeans, svd_hierarchical };
enum class RiskPath { direct, prefix };

struct Ablation {
    bool pps = true;
    bool bpi = true;
    bool mpo = true;
    bool operator==(const Ablation&) const = default;
};

struct SimConfig {
    PartitionSpec data;
    std::size_t hidden = 16;
    Algorithm algorithm = Algorithm::mmic;
    Ablation ablation;

    std::size_t rounds = 90;
    std::size_t warmup_rounds = 30;
    double participation = 0.4;
    std::size_t batch_size = 16;
    std::size_t local_epochs = 3;
    std::size_t subset_size = 128;
    double client_lr = 0.005;
    /// Per-round activation of missing data with probability mc instead of
    /// static designation of round(mc*K) clients.
    bool stochastic_activation = false;

    GlobalOptConfig server;
    double lambda = 0.5;
    double selection_tau = 1.0;
    ThresholdRule threshold = ThresholdRule::zero;
    RiskPath risk_path = RiskPath::prefix;

    ClusteringBackend backend = ClusteringBackend::lsh_kmeans;
    std::vector<double> sweep; // empty: k in [2, min(10, K/3)] or thresholds 0.05..0.95
    std::size_t lsh_planes = 32;
    std::size_t svd_rank = 3;

    std::uint64_t model_seed = 1;
    std::uint64_t selection_seed = 1;
    std::uint64_t clustering_seed = 1;
    std::uint64_t training_seed = 1;

    int threads = 0; // 0: OpenMP default
    Exec exec = Exec::parallel;

    bool pps_enabled() const noexcept { return algorithm == Algorithm::mmic && ablation.pps; }
    bool bpi_enabled() const noexcept { return algorithm == Algorithm::mmic && ablation.bpi; }
    bool mpo_enabled() const noexcept { return algorithm == Algorithm::mmic && ablation.mpo; }

    ModelSpec model_spec() const;
    /// The sweep actually used (defaults resolved).
    std::vector<double> resolved_sweep() const;

    /// Every violated constraint, named by config key. Empty when valid.
    std::vector<std::string> problems() const;
    /// Throws ConfigError listing all problems.
    void validate() const;
};

struct ClusterRound {
    std::size_t cluster = 0;
    std::vector<std::size_t> members;
    std::vector<double> probabilities; // aligned with members
    std::vector<std::size_t> selected;
    std::vector<std::size_t> core;
    std::vector<double> returns; // aligned with selected
    double cluster_return = 0.0;
    double threshold = 0.0;
    double risk = 0.0;
    double rarc = 0.0;
    double beta_star = 0.0;
    bool substitution_skipped = false;
};

struct PovertyEvent {
    std::size_t client = 0;
    std::size_t cluster = 0;
    std::string layer;
    double rate = 0.0;
    bool substituted = false;
};

struct MetricsRecord {
    std::size_t round = 0;
    double global_accuracy = 0.0;
    double global_f1 = 0.0;
    double personalized_accuracy = 0.0;
    double personalized_f1 = 0.0;
    std::vector<ClusterRound> clusters;
    std::vector<std::size_t> selected;
    std::vector<PovertyEvent> poverty;
    std::vector<long> selected_counts; // T(i)
    std::vector<long> core_counts;     // phi(i)
    std::size_t subset_samples = 0;    // sum of selected subset sizes
    std::size_t trained_samples = 0;   // samples through the optimizer, all epochs
    std::vector<double> missing_rates; // aligned with selected
    double wall_seconds = 0.0;         // not part of the deterministic stream
};

/// Everything produced before round 1.
struct SimSetup {
    SamplePool global_test;
    std::vector<ClientDataset> clients;
    std::vector<double> client_weights; // n_k / sum n
    ClusteringResult clustering;
    std::vector<std::vector<std::size_t>> members;
    std::vector<double> cluster_weights;
    std::vector<std::vector<Sample>> cluster_tests;
};

/// Data generation, partition, missing designation and one-shot clustering.
/// `forced_assignment` skips the sweep.
SimSetup prepare_setup(const SimConfig& config, const std::optional<ClusterAssignment>& forced_assignment = {});

struct SimResult {
    SimSetup setup;
    std::vector<MetricsRecord> records;
    ModelParams global;
    std::vector<ModelParams> client_models;
};

using RoundCallback = std::function<void(const MetricsRecord&)>;

/// Round protocol: select -> local train (change tracking) -> poverty
/// substitution -> cluster FedAvg -> returns/core accounting -> risk/RARC ->
/// global aggregation -> evaluation. Deterministic for fixed seeds regardless
/// of thread count.
SimResult run_simulation(const SimConfig& config, const RoundCallback& on_round = {},
                         const std::optional<ClusterAssignment>& forced_assignment = {});

const char* to_string(Algorithm a);
const char* to_string(ClusteringBackend b);

} // namespace mmic
