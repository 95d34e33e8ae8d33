#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"

#include "mmic/aggregation.hpp"
#include "mmic/errors.hpp"
#include "mmic/model.hpp"

#include <cmath>

using namespace mmic;

namespace {

ModelParams scalar(double x) { return ModelParams({ParamLayer{"w", {1}, {x}}}); }

std::vector<ReturnSeries> to_series(const std::vector<oracle::History>& h) {
    std::vector<ReturnSeries> out;
    for (const auto& c : h) out.emplace_back(c.begin(), c.end());
    return out;
}

std::vector<const ReturnSeries*> ptrs(const std::vector<ReturnSeries>& s) {
    std::vector<const ReturnSeries*> out;
    for (const auto& x : s) out.push_back(&x);
    return out;
}

double prefix_risk(const std::vector<oracle::History>& h, const std::vector<double>& w, std::size_t rounds) {
    RiskTracker tracker(h.size());
    for (std::size_t r = 1; r <= rounds; ++r) {
        std::vector<std::pair<std::size_t, double>> obs;
        for (std::size_t i = 0; i < h.size(); ++i)
            if (auto it = h[i].find(r); it != h[i].end()) obs.emplace_back(i, it->second);
        tracker.record_round(r, obs);
    }
    std::vector<std::size_t> clients(h.size());
    for (std::size_t i = 0; i < clients.size(); ++i) clients[i] = i;
    return tracker.risk(clients, w, rounds);
}

} // namespace

TEST_CASE("fedavg of scalar models") {
    const std::vector<ModelParams> models{scalar(1.0), scalar(3.0)};
    const std::vector<double> eq{1.0, 1.0}, skew{1.0, 3.0};
    CHECK(fedavg(models, eq).layer(0).values[0] == doctest::Approx(2.0));
    CHECK(fedavg(models, skew).layer(0).values[0] == doctest::Approx(2.5));
    const std::vector<ModelParams> one{scalar(-4.0)};
    const std::vector<double> w1{7.0};
    CHECK(fedavg(one, w1) == one[0]);
    const std::vector<ModelParams> mixed{scalar(1.0), ModelParams({ParamLayer{"v", {1}, {1.0}}})};
    CHECK_THROWS_AS(fedavg(mixed, eq), ContractError);
}

TEST_CASE("risk of a single client with two returns") {
    const std::vector<oracle::History> h{{{1, 0.1}, {2, 0.3}}};
    const auto s = to_series(h);
    const std::vector<double> w{1.0};
    CHECK(cluster_risk(ptrs(s), w, 2) == doctest::Approx(0.05));
    CHECK(prefix_risk(h, w, 2) == doctest::Approx(0.05));
}

TEST_CASE("risk of zero returns and of short histories is zero") {
    const std::vector<oracle::History> h{{{1, 0.0}, {2, 0.0}, {3, 0.0}}, {{2, 0.0}}};
    const auto s = to_series(h);
    const std::vector<double> w{0.5, 0.5};
    CHECK(cluster_risk(ptrs(s), w, 3) == 0.0);
    const std::vector<oracle::History> one{{{1, 0.4}}};
    const std::vector<double> w1{1.0};
    CHECK(cluster_risk(ptrs(to_series(one)), w1, 1) == 0.0);
}

TEST_CASE("direct and prefix risk agree with the brute-force oracle") {
    Rng rng(21);
    std::uniform_int_distribution<std::size_t> kd(1, 8), td(1, 50);
    std::uniform_real_distribution<double> wd(0.01, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = kd(rng), t = td(rng);
        const auto h = oracle::random_histories(rng, k, t);
        std::vector<double> w(k);
        for (auto& x : w) x = wd(rng);
        const double expected = oracle::risk(h, w, t);
        const auto s = to_series(h);
        CHECK(std::abs(cluster_risk(ptrs(s), w, t) - expected) < 1e-10);
        CHECK(std::abs(prefix_risk(h, w, t) - expected) < 1e-10);
    }
}

TEST_CASE("risk is non-negative on random histories") {
    Rng rng(5);
    std::uniform_real_distribution<double> wd(0.0, 1.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto h = oracle::random_histories(rng, 5, 12);
        std::vector<double> w(5);
        for (auto& x : w) x = wd(rng);
        CHECK(cluster_risk(ptrs(to_series(h)), w, 12) >= -1e-15);
    }
}

TEST_CASE("rarc") {
    CHECK(rarc(0.2, 0.1, 0.5) == doctest::Approx(0.05));
    CHECK(rarc(0.2, 0.1, 1.0) == doctest::Approx(0.2));
    CHECK(rarc(0.2, 0.1, 0.0) == doctest::Approx(-0.1));
    CHECK_THROWS_AS(rarc(0.2, 0.1, 1.5), ConfigError);
}

TEST_CASE("dynamic beta") {
    CHECK(dynamic_beta(0.9, 0.05, 10.0) == doctest::Approx(0.9049958).epsilon(1e-7));
    CHECK(dynamic_beta(0.9, -0.3, 10.0) == 0.9);
    CHECK(dynamic_beta(0.9, 0.0, 10.0) == 0.9);
    CHECK(dynamic_beta(0.9, 1e6, 10.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(validate_beta_range(0.95, 10.0), ConfigError);
    CHECK_THROWS_AS(dynamic_beta(0.95, 0.1, 10.0), ConfigError);
}

TEST_CASE("dynamic beta stays in range and is monotone") {
    double prev = 0.0;
    for (double g = -1.0; g <= 5.0; g += 0.01) {
        const double b = dynamic_beta(0.85, g, 12.0);
        CHECK(b >= 0.85);
        CHECK(b < 0.85 + 1.0 / 12.0);
        CHECK(b >= prev);
        CHECK((b == 0.85) == (g <= 0.0));
        prev = b;
    }
}

TEST_CASE("scalar FedAdagrad step") {
    GlobalOptConfig cfg;
    cfg.lr = 1.0;
    cfg.tau_a = 1e-3;
    auto global = scalar(0.0);
    auto state = GlobalOptState::create(global, 1, cfg);
    const auto cluster = scalar(0.1);
    const std::vector<const ModelParams*> models{&cluster};
    const std::vector<double> w{1.0}, g{0.0};
    const auto beta = global_aggregate(state, global, models, w, g);
    CHECK(beta[0] == 0.9);
    CHECK(state.momentum[0].layer(0).values[0] == doctest::Approx(0.01));
    CHECK(state.accum[0].layer(0).values[0] == doctest::Approx(0.01));
    CHECK(global.layer(0).values[0] == doctest::Approx(0.01 / 0.101));
    CHECK(global.layer(0).values[0] == doctest::Approx(0.0990).epsilon(1e-3));
}

TEST_CASE("clusters equal to the global model are a fixed point") {
    const auto global0 = init_model(ModelSpec{2, 2, 3, 2}, 4);
    auto global = global0;
    auto state = GlobalOptState::create(global, 2, GlobalOptConfig{});
    for (auto& m : state.momentum)
        for (auto& l : m.layers())
            for (auto& v : l.values) v = 0.0;
    const std::vector<const ModelParams*> models{&global0, &global0};
    const std::vector<double> w{0.5, 0.5}, g{0.0, 0.0};
    global_aggregate(state, global, models, w, g);
    CHECK(global == global0);
}

TEST_CASE("momentum decays by beta star when clusters match the global model") {
    GlobalOptConfig cfg;
    auto global = scalar(1.0);
    auto state = GlobalOptState::create(global, 1, cfg);
    state.momentum[0].layer(0).values[0] = 0.5;
    const auto copy = global;
    const std::vector<const ModelParams*> same{&copy};
    const std::vector<double> w{1.0}, g{0.05};
    const auto beta = global_aggregate(state, global, same, w, g);
    CHECK(state.momentum[0].layer(0).values[0] == doctest::Approx(0.5 * beta[0]));
}

TEST_CASE("non-positive rarcs reproduce plain FedAdagrad bitwise over 50 rounds") {
    Rng rng(12);
    std::normal_distribution<double> noise(0.0, 0.05);
    std::uniform_real_distribution<double> neg(-1.0, 0.0);
    const ModelSpec spec{3, 2, 4, 3};
    auto global = init_model(spec, 1);
    GlobalOptConfig cfg;
    auto state = GlobalOptState::create(global, 3, cfg);
    oracle::FedAdagrad ref{cfg.lr, cfg.beta, cfg.tau_a, {}, {}};
    auto flat = oracle::flatten(global);
    const std::vector<double> w{0.2, 0.3, 0.5};
    for (int round = 0; round < 50; ++round) {
        std::vector<ModelParams> clusters(3, global);
        std::vector<std::vector<double>> flat_clusters;
        for (auto& c : clusters) {
            for (auto& l : c.layers())
                for (auto& v : l.values) v += noise(rng);
            flat_clusters.push_back(oracle::flatten(c));
        }
        std::vector<const ModelParams*> ptr;
        for (const auto& c : clusters) ptr.push_back(&c);
        const std::vector<double> g{neg(rng), 0.0, neg(rng)};
        global_aggregate(state, global, ptr, w, g);
        ref.step(flat, flat_clusters, w);
        REQUIRE(oracle::flatten(global) == flat);
    }
}

TEST_CASE("higher rarc keeps momentum closer to its history") {
    for (double gamma : {0.01, 0.1, 1.0}) {
        auto run = [](double g) {
            GlobalOptConfig cfg;
            auto global = scalar(0.0);
            auto state = GlobalOptState::create(global, 1, cfg);
            state.momentum[0].layer(0).values[0] = 0.3;
            const auto cluster = scalar(-0.2);
            const std::vector<const ModelParams*> models{&cluster};
            const std::vector<double> w{1.0}, gs{g};
            global_aggregate(state, global, models, w, gs);
            return state.momentum[0].layer(0).values[0];
        };
        CHECK(std::abs(run(gamma) - 0.3) < std::abs(run(0.0) - 0.3));
        CHECK(std::abs(run(gamma * 2) - 0.3) < std::abs(run(gamma) - 0.3));
    }
}

TEST_CASE("accumulator never decreases") {
    Rng rng(2);
    std::normal_distribution<double> noise(0.0, 0.1);
    auto global = init_model(ModelSpec{2, 2, 2, 2}, 3);
    auto state = GlobalOptState::create(global, 2, GlobalOptConfig{});
    for (int r = 0; r < 20; ++r) {
        const auto before = state.accum;
        std::vector<ModelParams> clusters(2, global);
        for (auto& c : clusters)
            for (auto& l : c.layers())
                for (auto& v : l.values) v += noise(rng);
        const std::vector<const ModelParams*> ptr{&clusters[0], &clusters[1]};
        const std::vector<double> w{0.5, 0.5}, g{0.2, -0.1};
        global_aggregate(state, global, ptr, w, g);
        for (std::size_t k = 0; k < 2; ++k)
            for (std::size_t l = 0; l < global.layer_count(); ++l)
                for (std::size_t i = 0; i < global.layer(l).size(); ++i)
                    CHECK(state.accum[k].layer(l).values[i] >= before[k].layer(l).values[i]);
    }
}

TEST_CASE("global_aggregate rejects bad cluster weights") {
    auto global = scalar(0.0);
    auto state = GlobalOptState::create(global, 2, GlobalOptConfig{});
    const auto c = scalar(1.0);
    const std::vector<const ModelParams*> models{&c, &c};
    const std::vector<double> w{0.5, 0.4}, g{0.0, 0.0};
    CHECK_THROWS_AS(global_aggregate(state, global, models, w, g), ContractError);
}

TEST_CASE("sequential and pooled modes coincide with summed for a single cluster") {
    for (auto [combine, st] : {std::pair{CombineMode::sequential, StateMode::per_cluster},
                               std::pair{CombineMode::summed, StateMode::pooled}}) {
        GlobalOptConfig a, b;
        b.combine = combine;
        b.state = st;
        auto ga = scalar(0.2), gb = scalar(0.2);
        auto sa = GlobalOptState::create(ga, 1, a), sb = GlobalOptState::create(gb, 1, b);
        const auto c = scalar(0.7);
        const std::vector<const ModelParams*> models{&c};
        const std::vector<double> w{1.0}, g{0.3};
        for (int r = 0; r < 5; ++r) {
            global_aggregate(sa, ga, models, w, g);
            global_aggregate(sb, gb, models, w, g);
        }
        CHECK(ga.layer(0).values[0] == doctest::Approx(gb.layer(0).values[0]).epsilon(1e-12));
    }
}
