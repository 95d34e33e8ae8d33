#pragma once

#include "mmic/data.hpp"
#include "mmic/parallel.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mmic {

using Point = std::vector<double>;

/// Square, row-major.
struct DistanceMatrix {
    std::size_t n = 0;
    std::vector<double> d;

    double operator()(std::size_t i, std::size_t j) const { return d[i * n + j]; }
    double& operator()(std::size_t i, std::size_t j) { return d[i * n + j]; }
};

/// Dense sample matrix (rows = samples), row-major.
struct SampleMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
};

struct ClientDescriptor {
    std::size_t client = 0;
    Point vector;
};

struct ClusterAssignment {
    std::vector<std::size_t> labels; // client index -> cluster in [0, M)
    std::size_t clusters = 1;
    double scv = 0.0;

    /// Client indices per cluster, ascending.
    std::vector<std::vector<std::size_t>> members() const;
};

/// One point of a hyperparameter sweep.
struct SweepCandidate {
    double parameter = 0.0; // k for kmeans, threshold for hierarchical
    std::size_t clusters = 0;
    std::optional<double> scv; // absent when the candidate yields one cluster
    std::vector<std::size_t> labels;
};

struct ClusteringResult {
    ClusterAssignment assignment;
    double chosen_parameter = 0.0;
    std::vector<SweepCandidate> candidates;
    bool fell_back_to_single = false;
};

/// Normalised class histogram followed by per-modality feature means over the
/// observed (unmasked) modality vectors.
ClientDescriptor client_descriptor(const ClientDataset& client, std::size_t classes);

/// Random unit hyperplanes (rows), seeded.
std::vector<Point> random_hyperplanes(std::size_t planes, std::size_t dim, std::uint64_t seed);

/// Sign pattern of the descriptor against each hyperplane, in {-1, +1}; zero maps to +1.
std::vector<int> lsh_sketch(const Point& desc, const std::vector<Point>& planes);
std::vector<int> lsh_sketch(const Point& desc, std::size_t planes, std::uint64_t seed);

struct KMeansResult {
    std::vector<std::size_t> labels;
    std::vector<Point> centroids;
    std::vector<double> inertia_history; // after every assignment step
    int iterations = 0;

    double inertia() const { return inertia_history.empty() ? 0.0 : inertia_history.back(); }
};

/// Lloyd's algorithm with seeded k-means++ init; an empty cluster is re-seeded
/// from the point farthest from its centroid.
KMeansResult kmeans(const std::vector<Point>& points, std::size_t k, std::uint64_t seed, int max_iter = 100);

/// 1 - mean squared cosine of the principal angles between the top-q right
/// singular subspaces. If either matrix has rank < q, q is reduced to the
/// smaller rank (reported through `effective_q`).
double svd_subspace_distance(const SampleMatrix& a, const SampleMatrix& b, std::size_t q,
                             std::size_t* effective_q = nullptr);

/// Client train matrix [xa | xb] with masked modalities zero-filled.
SampleMatrix client_matrix(const ClientDataset& client);

DistanceMatrix euclidean_distances(const std::vector<Point>& points, Exec exec = Exec::serial);
DistanceMatrix subspace_distances(const std::vector<SampleMatrix>& data, std::size_t q, Exec exec = Exec::serial);

/// Average-linkage agglomeration; stops once the closest pair of clusters is
/// farther apart than `threshold`.
std::vector<std::size_t> hierarchical_cluster(const DistanceMatrix& dist, double threshold);

/// Mean silhouette; singleton-cluster points contribute 0. nullopt when the
/// labels form fewer than two clusters.
std::optional<double> silhouette(const DistanceMatrix& dist, std::span<const std::size_t> labels,
                                 Exec exec = Exec::serial);
std::optional<double> silhouette(const std::vector<Point>& points, std::span<const std::size_t> labels,
                                 Exec exec = Exec::serial);

/// Sweep k and keep the max-SCV assignment (ties -> fewer clusters).
ClusteringResult select_clustering(const std::vector<Point>& points, std::span<const std::size_t> ks,
                                   std::uint64_t seed, int max_iter = 100, Exec exec = Exec::serial);
/// Sweep hierarchical thresholds and keep the max-SCV assignment.
ClusteringResult select_clustering(const DistanceMatrix& dist, std::span<const double> thresholds,
                                   Exec exec = Exec::serial);

/// Relabel so cluster ids appear in order of first occurrence.
std::vector<std::size_t> canonical_labels(std::span<const std::size_t> labels);

/// "client cluster scv" lines with a header.
void write_assignment(std::ostream& out, const ClusterAssignment& a);

} // namespace mmic
