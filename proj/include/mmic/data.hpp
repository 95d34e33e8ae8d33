#pragma once

#include "mmic/model.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace mmic {

struct Sample {
    std::vector<double> xa;
    std::vector<double> xb;
    int label = 0;
};

enum class ModalityMask : std::uint8_t { complete = 0, missing_a = 1, missing_b = 2 };

struct SamplePool {
    std::size_t dim_a = 0;
    std::size_t dim_b = 0;
    std::size_t classes = 0;
    std::vector<Sample> samples;

    std::size_t size() const noexcept { return samples.size(); }
};

struct ClientDataset {
    std::size_t id = 0;
    std::size_t dim_a = 0;
    std::size_t dim_b = 0;
    std::vector<Sample> train;
    std::vector<ModalityMask> masks; // aligned with train
    std::vector<Sample> test;
    bool missing_designated = false;
    std::vector<std::size_t> missing_indices; // sorted, into train

    std::size_t n() const noexcept { return train.size(); }
};

struct PartitionSpec {
    std::size_t clients = 20;
    double dirichlet_beta = 0.5;
    std::size_t classes = 4;
    std::size_t dim_a = 16;
    std::size_t dim_b = 16;
    std::size_t samples_per_class = 800;
    double mm = 0.2;
    double mc = 0.5;
    /// Std-dev of class prototypes; samples are prototype + N(0, noise_sigma^2).
    double prototype_scale = 0.5;
    double noise_sigma = 1.0;
    std::size_t min_samples = 20;
    double local_test_fraction = 0.2;
    double global_test_fraction = 0.1;
    /// When > 0, clients are split round-robin into this many groups and every
    /// group gets its own feature offset of norm group_shift (clusterable fixture).
    std::size_t client_groups = 0;
    double group_shift = 0.0;
    std::uint64_t data_seed = 1;
    std::uint64_t partition_seed = 1;
    std::uint64_t missing_seed = 1;

    void validate() const;
};

/// Gaussian mixture pool: per class one prototype per modality, samples are
/// prototype + noise. Ordered class-major, exactly samples_per_class per class.
SamplePool gen_synthetic(const PartitionSpec& spec);

/// Stratified split of a pool into (held-out, remainder).
std::pair<SamplePool, SamplePool> split_holdout(const SamplePool& pool, double fraction, std::uint64_t seed);

/// Per-class Dirichlet(beta) proportions over clients. Every client ends up with
/// at least min_samples; proportions are redrawn until that holds. Returns K
/// shards whose union is the pool (train only; test split is separate).
std::vector<ClientDataset> dirichlet_partition(const SamplePool& pool, std::size_t clients, double beta,
                                               std::uint64_t seed, std::size_t min_samples = 20);

/// Move a stratified fraction of every client's shard into its local test set.
void split_local_test(std::vector<ClientDataset>& clients, double fraction, std::uint64_t seed);

/// Flag exactly round(mc*K) clients; each gets a fixed set of round(mm*n_k)
/// missing samples, each dropping modality A or B by a fair coin.
void designate_missing(std::vector<ClientDataset>& clients, double mm, double mc, std::uint64_t seed);

/// Shift features by a per-group offset (see PartitionSpec::client_groups).
/// Client k belongs to group k % G; global test sample i gets group i % G.
/// No-op when client_groups == 0.
void apply_group_shift(std::vector<ClientDataset>& clients, SamplePool& global_test, const PartitionSpec& spec);

struct RoundBatches {
    std::vector<Batch> batches;
    std::vector<std::vector<ModalityMask>> masks; // per batch, per sample
    std::size_t subset_size = 0;
    std::size_t missing_in_subset = 0;

    /// Realised missing rate of the round's subset, min(missing/subset, 1).
    double missing_rate() const noexcept;
    std::size_t samples() const noexcept;
};

/// Draw the round's training subset (depends on seed, client, round only),
/// shuffle it for the given epoch and cut it into batches. Masked modalities
/// are zero-filled. With activate_missing=false masks are ignored.
RoundBatches batch_iter(const ClientDataset& client, std::size_t subset_size, std::size_t batch_size,
                        std::size_t round, std::size_t epoch, std::uint64_t seed, bool activate_missing = true);

/// All samples in one complete-modality batch.
Batch make_batch(const std::vector<Sample>& samples, std::size_t dim_a, std::size_t dim_b);

/// Columnar text: "# mmic-dataset v1", then "dim_a dim_b classes", then one row
/// per sample: label xa... xb... mask.
void write_dataset(std::ostream& out, const SamplePool& pool, const std::vector<ModalityMask>& masks = {});
SamplePool read_dataset(std::istream& in, std::vector<ModalityMask>* masks = nullptr);

} // namespace mmic
