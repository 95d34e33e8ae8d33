#include "mmic/clustering.hpp"

#include "mmic/errors.hpp"
#include "mmic/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

namespace mmic {

std::vector<std::vector<std::size_t>> ClusterAssignment::members() const {
    std::vector<std::vector<std::size_t>> out(clusters);
    for (std::size_t i = 0; i < labels.size(); ++i) out.at(labels[i]).push_back(i);
    return out;
}

ClientDescriptor client_descriptor(const ClientDataset& client, std::size_t classes) {
    ClientDescriptor d;
    d.client = client.id;
    d.vector.assign(classes + client.dim_a + client.dim_b, 0.0);
    std::size_t seen_a = 0;
    std::size_t seen_b = 0;
    for (std::size_t i = 0; i < client.n(); ++i) {
        const auto& s = client.train[i];
        const ModalityMask m = i < client.masks.size() ? client.masks[i] : ModalityMask::complete;
        d.vector.at(static_cast<std::size_t>(s.label)) += 1.0;
        if (m != ModalityMask::missing_a) {
            for (std::size_t j = 0; j < client.dim_a; ++j) d.vector[classes + j] += s.xa[j];
            ++seen_a;
        }
        if (m != ModalityMask::missing_b) {
            for (std::size_t j = 0; j < client.dim_b; ++j) d.vector[classes + client.dim_a + j] += s.xb[j];
            ++seen_b;
        }
    }
    if (client.n() > 0)
        for (std::size_t c = 0; c < classes; ++c) d.vector[c] /= static_cast<double>(client.n());
    if (seen_a > 0)
        for (std::size_t j = 0; j < client.dim_a; ++j) d.vector[classes + j] /= static_cast<double>(seen_a);
    if (seen_b > 0)
        for (std::size_t j = 0; j < client.dim_b; ++j)
            d.vector[classes + client.dim_a + j] /= static_cast<double>(seen_b);
    return d;
}

std::vector<Point> random_hyperplanes(std::size_t planes, std::size_t dim, std::uint64_t seed) {
    if (planes < 1) throw ContractError("lsh: need at least one hyperplane");
    if (dim < 1) throw ContractError("lsh: zero-length descriptor");
    Rng rng = make_rng(seed, {20});
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Point> out(planes, Point(dim));
    for (auto& p : out) {
        double norm = 0.0;
        for (auto& x : p) {
            x = g(rng);
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (auto& x : p) x /= norm;
    }
    return out;
}

std::vector<int> lsh_sketch(const Point& desc, const std::vector<Point>& planes) {
    if (desc.empty()) throw ContractError("lsh_sketch: zero-length descriptor");
    if (planes.empty()) throw ContractError("lsh_sketch: need at least one hyperplane");
    std::vector<int> out;
    out.reserve(planes.size());
    for (const auto& p : planes) {
        if (p.size() != desc.size()) throw ContractError("lsh_sketch: hyperplane/descriptor dim mismatch");
        double dot = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * desc[i];
        out.push_back(dot >= 0.0 ? 1 : -1);
    }
    return out;
}

std::vector<int> lsh_sketch(const Point& desc, std::size_t planes, std::uint64_t seed) {
    if (desc.empty()) throw ContractError("lsh_sketch: zero-length descriptor");
    return lsh_sketch(desc, random_hyperplanes(planes, desc.size(), seed));
}

namespace {

double sq_dist(const Point& a, const Point& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

} // namespace

KMeansResult kmeans(const std::vector<Point>& points, std::size_t k, std::uint64_t seed, int max_iter) {
    if (k == 0) throw ConfigError("kmeans: k must be positive");
    const std::size_t n = points.size();
    if (k > n) throw ContractError("kmeans: k exceeds the number of points");
    for (const auto& p : points)
        if (p.size() != points.front().size()) throw ContractError("kmeans: ragged points");

    Rng rng = make_rng(seed, {21, k});
    KMeansResult r;
    // k-means++ seeding
    std::vector<std::size_t> chosen;
    chosen.push_back(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (chosen.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sq_dist(points[i], points[chosen.back()]));
            total += d2[i];
        }
        std::size_t next = n;
        if (total > 0.0) {
            const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
            double cum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                cum += d2[i];
                next = i;
                if (cum >= u) break;
            }
        }
        if (next == n) {
            // all remaining points coincide with a centre; take the first unchosen index
            for (std::size_t i = 0; i < n; ++i)
                if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
                    next = i;
                    break;
                }
        }
        chosen.push_back(next);
    }
    for (auto c : chosen) r.centroids.push_back(points[c]);

    r.labels.assign(n, 0);
    std::vector<std::size_t> prev;
    for (int it = 0; it < std::max(1, max_iter); ++it) {
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = sq_dist(points[i], r.centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            r.labels[i] = best;
            inertia += best_d;
        }
        r.inertia_history.push_back(inertia);
        r.iterations = it + 1;
        if (r.labels == prev) break;
        prev = r.labels;

        // update step
        std::vector<Point> sums(k, Point(points.front().size(), 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = sums[r.labels[i]];
            for (std::size_t j = 0; j < s.size(); ++j) s[j] += points[i][j];
            ++counts[r.labels[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            for (auto& x : sums[c]) x /= static_cast<double>(counts[c]);
            r.centroids[c] = std::move(sums[c]);
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[r.labels[i]] <= 1) continue;
                const double d = sq_dist(points[i], r.centroids[r.labels[i]]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far_d < 0.0) continue;
            --counts[r.labels[far]];
            r.labels[far] = c;
            counts[c] = 1;
            r.centroids[c] = points[far];
        }
    }
    return r;
}

SampleMatrix client_matrix(const ClientDataset& client) {
    SampleMatrix m;
    m.rows = client.n();
    m.cols = client.dim_a + client.dim_b;
    m.values.reserve(m.rows * m.cols);
    for (std::size_t i = 0; i < client.n(); ++i) {
        const auto& s = client.train[i];
        const ModalityMask mask = i < client.masks.size() ? client.masks[i] : ModalityMask::complete;
        if (mask == ModalityMask::missing_a) m.values.insert(m.values.end(), client.dim_a, 0.0);
        else m.values.insert(m.values.end(), s.xa.begin(), s.xa.end());
        if (mask == ModalityMask::missing_b) m.values.insert(m.values.end(), client.dim_b, 0.0);
        else m.values.insert(m.values.end(), s.xb.begin(), s.xb.end());
    }
    return m;
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Top right singular vectors (columns) and numerical rank.
std::pair<Eigen::MatrixXd, std::size_t> right_subspace(const SampleMatrix& m) {
    Eigen::Map<const RowMatrix> a(m.values.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    std::size_t rank = 0;
    const double tol = sv.size() > 0 ? sv(0) * 1e-10 * static_cast<double>(std::max(m.rows, m.cols)) : 0.0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) ++rank;
    return {svd.matrixV(), rank};
}

} // namespace

double svd_subspace_distance(const SampleMatrix& a, const SampleMatrix& b, std::size_t q, std::size_t* effective_q) {
    if (a.cols != b.cols) throw ContractError("svd_subspace_distance: feature dims differ");
    if (q == 0) throw ContractError("svd_subspace_distance: q must be positive");
    if (a.rows < q || b.rows < q) throw ContractError("svd_subspace_distance: fewer rows than q");
    auto [va, ra] = right_subspace(a);
    auto [vb, rb] = right_subspace(b);
    std::size_t use_q = std::min({q, ra, rb, a.cols});
    if (use_q < q)
        std::cerr << "warning: svd_subspace_distance reduced q from " << q << " to " << use_q << " (rank)\n";
    if (effective_q) *effective_q = use_q;
    if (use_q == 0) return 1.0;
    const auto qi = static_cast<Eigen::Index>(use_q);
    const Eigen::MatrixXd overlap = va.leftCols(qi).transpose() * vb.leftCols(qi);
    const double mean_cos2 = overlap.squaredNorm() / static_cast<double>(use_q);
    return std::clamp(1.0 - mean_cos2, 0.0, 1.0);
}

DistanceMatrix euclidean_distances(const std::vector<Point>& points, Exec exec) {
    DistanceMatrix d{points.size(), std::vector<double>(points.size() * points.size(), 0.0)};
    for_each_index(exec, points.size(), [&](std::size_t i) {
        for (std::size_t j = 0; j < points.size(); ++j)
            if (j != i) d(i, j) = std::sqrt(sq_dist(points[i], points[j]));
    });
    return d;
}

DistanceMatrix subspace_distances(const std::vector<SampleMatrix>& data, std::size_t q, Exec exec) {
    const std::size_t n = data.size();
    DistanceMatrix d{n, std::vector<double>(n * n, 0.0)};
    // upper triangle, one row per task; mirrored afterwards
    for_each_index(exec, n, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < n; ++j) d(i, j) = svd_subspace_distance(data[i], data[j], q);
    });
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) d(j, i) = d(i, j);
    return d;
}

std::vector<std::size_t> canonical_labels(std::span<const std::size_t> labels) {
    std::map<std::size_t, std::size_t> remap;
    std::vector<std::size_t> out;
    out.reserve(labels.size());
    for (auto l : labels) {
        auto [it, inserted] = remap.emplace(l, remap.size());
        out.push_back(it->second);
    }
    return out;
}

std::vector<std::size_t> hierarchical_cluster(const DistanceMatrix& dist, double threshold) {
    const std::size_t n = dist.n;
    if (dist.d.size() != n * n) throw ContractError("hierarchical_cluster: matrix is not square");
    for (std::size_t i = 0; i < n; ++i) {
        if (dist(i, i) != 0.0) throw ContractError("hierarchical_cluster: nonzero diagonal");
        for (std::size_t j = 0; j < n; ++j) {
            if (dist(i, j) < 0.0 || !std::isfinite(dist(i, j)))
                throw ContractError("hierarchical_cluster: negative or non-finite distance");
            if (std::abs(dist(i, j) - dist(j, i)) > 1e-12)
                throw ContractError("hierarchical_cluster: asymmetric distance matrix");
        }
    }

    std::vector<std::vector<std::size_t>> groups(n);
    for (std::size_t i = 0; i < n; ++i) groups[i] = {i};
    std::vector<double> link = dist.d; // cluster-to-cluster average linkage
    std::vector<char> alive(n, 1);
    for (std::size_t merges = 0; merges + 1 < n; ++merges) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = n;
        std::size_t bj = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (!alive[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!alive[j]) continue;
                if (link[i * n + j] < best) {
                    best = link[i * n + j];
                    bi = i;
                    bj = j;
                }
            }
        }
        if (bi == n || best > threshold) break;
        const double si = static_cast<double>(groups[bi].size());
        const double sj = static_cast<double>(groups[bj].size());
        for (std::size_t k = 0; k < n; ++k) {
            if (!alive[k] || k == bi || k == bj) continue;
            const double l = (si * link[bi * n + k] + sj * link[bj * n + k]) / (si + sj);
            link[bi * n + k] = l;
            link[k * n + bi] = l;
        }
        groups[bi].insert(groups[bi].end(), groups[bj].begin(), groups[bj].end());
        groups[bj].clear();
        alive[bj] = 0;
    }
    std::vector<std::size_t> labels(n, 0);
    for (std::size_t g = 0; g < n; ++g)
        for (auto i : groups[g]) labels[i] = g;
    return canonical_labels(labels);
}

namespace {

template <class DistFn>
std::optional<double> silhouette_impl(std::size_t n, std::span<const std::size_t> labels, Exec exec, DistFn dist) {
    if (labels.size() != n) throw ContractError("silhouette: labels not aligned with points");
    if (n == 0) return std::nullopt;
    const std::size_t k = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::size_t> sizes(k, 0);
    for (auto l : labels) ++sizes[l];
    const auto nonempty = std::count_if(sizes.begin(), sizes.end(), [](auto s) { return s > 0; });
    if (nonempty < 2) return std::nullopt;

    std::vector<double> s(n, 0.0);
    for_each_index(exec, n, [&](std::size_t i) {
        if (sizes[labels[i]] <= 1) return;
        std::vector<double> sum(k, 0.0);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sum[labels[j]] += dist(i, j);
        const double a = sum[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c)
            if (c != labels[i] && sizes[c] > 0) b = std::min(b, sum[c] / static_cast<double>(sizes[c]));
        const double m = std::max(a, b);
        s[i] = m > 0.0 ? (b - a) / m : 0.0;
    });
    double total = 0.0;
    for (double v : s) total += v;
    return total / static_cast<double>(n);
}

} // namespace

std::optional<double> silhouette(const DistanceMatrix& dist, std::span<const std::size_t> labels, Exec exec) {
    return silhouette_impl(dist.n, labels, exec, [&](std::size_t i, std::size_t j) { return dist(i, j); });
}

std::optional<double> silhouette(const std::vector<Point>& points, std::span<const std::size_t> labels, Exec exec) {
    return silhouette_impl(points.size(), labels, exec,
                           [&](std::size_t i, std::size_t j) { return std::sqrt(sq_dist(points[i], points[j])); });
}

namespace {

ClusteringResult pick_best(std::vector<SweepCandidate> candidates, std::size_t n) {
    if (candidates.empty()) throw ConfigError("select_clustering: empty sweep");
    ClusteringResult r;
    const SweepCandidate* best = nullptr;
    for (const auto& c : candidates) {
        if (!c.scv) continue;
        if (!best || *c.scv > *best->scv || (*c.scv == *best->scv && c.clusters < best->clusters)) best = &c;
    }
    if (best) {
        r.assignment.labels = best->labels;
        r.assignment.clusters = best->clusters;
        r.assignment.scv = *best->scv;
        r.chosen_parameter = best->parameter;
    } else {
        std::cerr << "warning: every clustering candidate produced a single cluster; using M=1\n";
        r.assignment.labels.assign(n, 0);
        r.assignment.clusters = 1;
        r.assignment.scv = 0.0;
        r.chosen_parameter = candidates.front().parameter;
        r.fell_back_to_single = true;
    }
    r.candidates = std::move(candidates);
    return r;
}

std::size_t count_clusters(const std::vector<std::size_t>& labels) {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

} // namespace

ClusteringResult select_clustering(const std::vector<Point>& points, std::span<const std::size_t> ks,
                                   std::uint64_t seed, int max_iter, Exec exec) {
    if (ks.empty()) throw ConfigError("select_clustering: empty sweep");
    const DistanceMatrix dist = euclidean_distances(points, exec);
    std::vector<SweepCandidate> candidates;
    for (auto k : ks) {
        if (k == 0) throw ConfigError("select_clustering: k must be positive");
        if (k > points.size()) continue;
        SweepCandidate c;
        c.parameter = static_cast<double>(k);
        c.labels = canonical_labels(kmeans(points, k, seed, max_iter).labels);
        c.clusters = count_clusters(c.labels);
        c.scv = silhouette(dist, c.labels, exec);
        candidates.push_back(std::move(c));
    }
    if (candidates.empty()) throw ConfigError("select_clustering: every k exceeds the number of clients");
    return pick_best(std::move(candidates), points.size());
}

ClusteringResult select_clustering(const DistanceMatrix& dist, std::span<const double> thresholds, Exec exec) {
    std::vector<SweepCandidate> candidates;
    for (double t : thresholds) {
        SweepCandidate c;
        c.parameter = t;
        c.labels = hierarchical_cluster(dist, t);
        c.clusters = count_clusters(c.labels);
        c.scv = silhouette(dist, c.labels, exec);
        candidates.push_back(std::move(c));
    }
    return pick_best(std::move(candidates), dist.n);
}

void write_assignment(std::ostream& out, const ClusterAssignment& a) {
    out << "client cluster scv\n";
    const auto old = out.precision(17);
    for (std::size_t i = 0; i < a.labels.size(); ++i) out << i << ' ' << a.labels[i] << ' ' << a.scv << '\n';
    out.precision(old);
}

} // namespace mmic
