// Serial reference vs OpenMP path for the hot kernels. Also checks that both
// paths return identical results.
//   mmic_bench [repeats]

#include "mmic/clustering.hpp"
#include "mmic/evaluation.hpp"
#include "mmic/model.hpp"
#include "mmic/parallel.hpp"
#include "mmic/rng.hpp"
#include "mmic/simulation.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

using namespace mmic;

namespace {

template <class F>
double best_of(int repeats, F&& f) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

template <class R>
void compare(const char* name, int repeats, const std::function<R(Exec)>& kernel) {
    R serial, parallel;
    const double ts = best_of(repeats, [&] { serial = kernel(Exec::serial); });
    const double tp = best_of(repeats, [&] { parallel = kernel(Exec::parallel); });
    std::printf("%-22s serial %9.4f s   parallel %9.4f s   speedup %5.2fx   %s\n", name, ts, tp, ts / tp,
                serial == parallel ? "identical" : "MISMATCH");
}

std::vector<Point> random_points(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Point> pts(n, Point(d));
    for (auto& p : pts)
        for (auto& v : p) v = g(rng);
    return pts;
}

} // namespace

int main(int argc, char** argv) {
    const int repeats = argc > 1 ? std::atoi(argv[1]) : 3;
    std::printf("threads: %d\n", parallel_threads());

    const auto pts = random_points(1200, 64, 1);
    compare<std::vector<double>>("euclidean_distances", repeats,
                                 [&](Exec e) { return euclidean_distances(pts, e).d; });

    const auto dist = euclidean_distances(pts);
    std::vector<std::size_t> labels(pts.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 7;
    compare<double>("silhouette", repeats, [&](Exec e) { return *silhouette(dist, labels, e); });

    std::vector<SampleMatrix> mats;
    for (std::uint64_t s = 0; s < 40; ++s) {
        const auto p = random_points(150, 32, 100 + s);
        SampleMatrix m{150, 32, {}};
        for (const auto& row : p) m.values.insert(m.values.end(), row.begin(), row.end());
        mats.push_back(std::move(m));
    }
    compare<std::vector<double>>("subspace_distances", repeats,
                                 [&](Exec e) { return subspace_distances(mats, 3, e).d; });

    PartitionSpec spec;
    spec.samples_per_class = 10000;
    const auto pool = gen_synthetic(spec);
    const auto model = init_model(ModelSpec{16, 16, 16, 4}, 1);
    compare<double>("evaluate_model", repeats,
                    [&](Exec e) { return evaluate_model(model, pool.samples, e).accuracy; });

    SimConfig cfg;
    cfg.rounds = 15;
    cfg.warmup_rounds = 5;
    compare<double>("simulation (15 rounds)", 1, [&](Exec e) {
        SimConfig c = cfg;
        c.exec = e;
        return run_simulation(c).records.back().global_accuracy;
    });
    return 0;
}
