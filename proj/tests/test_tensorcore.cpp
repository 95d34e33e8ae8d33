#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mmic/adam.hpp"
#include "mmic/errors.hpp"
#include "mmic/model.hpp"
#include "mmic/rng.hpp"

#include <cmath>

using namespace mmic;

namespace {

Batch random_batch(const ModelSpec& spec, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> label(0, static_cast<int>(spec.classes) - 1);
    Batch b;
    b.dim_a = spec.dim_a;
    b.dim_b = spec.dim_b;
    for (std::size_t i = 0; i < n * spec.dim_a; ++i) b.xa.push_back(g(rng));
    for (std::size_t i = 0; i < n * spec.dim_b; ++i) b.xb.push_back(g(rng));
    for (std::size_t i = 0; i < n; ++i) b.labels.push_back(label(rng));
    return b;
}

ModelParams scalar_model(double theta) { return ModelParams({ParamLayer{"w", {1}, {theta}}}); }

} // namespace

TEST_CASE("init_model is deterministic and seed-dependent") {
    const ModelSpec spec{4, 4, 8, 3};
    CHECK(init_model(spec, 7) == init_model(spec, 7));
    CHECK_FALSE(init_model(spec, 7) == init_model(spec, 8));
}

TEST_CASE("init_model layer layout") {
    const auto m = init_model(ModelSpec{4, 4, 8, 3}, 1);
    REQUIRE(m.layer_count() == 6);
    CHECK(m.layer(kEncoderAWeight).shape == std::vector<std::size_t>{4, 8});
    CHECK(m.layer(kEncoderBWeight).shape == std::vector<std::size_t>{4, 8});
    CHECK(m.layer(kHeadWeight).shape == std::vector<std::size_t>{16, 3});
    CHECK(m.layer(kHeadBias).shape == std::vector<std::size_t>{3});
    for (const auto& l : m.layers()) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.name.rfind("head", 0) == 0 ? 16 : 4));
        for (double v : l.values) CHECK(std::abs(v) <= bound);
    }
}

TEST_CASE("init_model rejects zero dims") {
    CHECK_THROWS_AS(init_model(ModelSpec{0, 4, 8, 3}, 1), ConfigError);
    CHECK_THROWS_AS(init_model(ModelSpec{4, 4, 0, 3}, 1), ConfigError);
}

TEST_CASE("uniform logits give ln(C)") {
    const ModelSpec spec{3, 5, 4, 6};
    auto m = init_model(spec, 2);
    for (auto* name : {kHeadWeight, kHeadBias})
        for (auto& v : m.layer(name).values) v = 0.0;
    const auto lg = forward_loss_grad(m, random_batch(spec, 7, 3));
    CHECK(lg.loss == doctest::Approx(std::log(6.0)).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
    const ModelSpec spec{4, 3, 5, 3};
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto model = init_model(spec, seed);
        const auto batch = random_batch(spec, 5, seed + 100);
        const auto lg = forward_loss_grad(model, batch);
        const double h = 1e-6;
        double worst = 0.0;
        for (std::size_t l = 0; l < model.layer_count(); ++l) {
            for (std::size_t i = 0; i < model.layer(l).size(); ++i) {
                auto plus = model;
                auto minus = model;
                plus.layer(l).values[i] += h;
                minus.layer(l).values[i] -= h;
                const double fd = (forward_loss(plus, batch) - forward_loss(minus, batch)) / (2 * h);
                const double an = lg.grads.layer(l).values[i];
                const double rel = std::abs(fd - an) / std::max(1e-8, std::abs(fd) + std::abs(an));
                worst = std::max(worst, std::abs(fd - an) < 1e-9 ? 0.0 : rel);
            }
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("zero-filled modality gives zero encoder weight gradient") {
    const ModelSpec spec{4, 3, 5, 3};
    auto batch = random_batch(spec, 5, 9);
    std::fill(batch.xa.begin(), batch.xa.end(), 0.0);
    const auto lg = forward_loss_grad(init_model(spec, 1), batch);
    for (double g : lg.grads.layer(kEncoderAWeight).values) CHECK(g == 0.0);
}

TEST_CASE("duplicated batch keeps the mean loss") {
    const ModelSpec spec{4, 4, 8, 3};
    const auto m = init_model(spec, 4);
    const auto b = random_batch(spec, 5, 5);
    Batch twice = b;
    twice.xa.insert(twice.xa.end(), b.xa.begin(), b.xa.end());
    twice.xb.insert(twice.xb.end(), b.xb.begin(), b.xb.end());
    twice.labels.insert(twice.labels.end(), b.labels.begin(), b.labels.end());
    CHECK(forward_loss(m, twice) == doctest::Approx(forward_loss(m, b)).epsilon(1e-12));
}

TEST_CASE("forward rejects bad batches") {
    const ModelSpec spec{4, 4, 8, 3};
    const auto m = init_model(spec, 4);
    Batch empty;
    empty.dim_a = 4;
    empty.dim_b = 4;
    CHECK_THROWS_AS(forward_loss_grad(m, empty), ContractError);
    auto b = random_batch(spec, 2, 1);
    b.xa[0] = std::nan("");
    CHECK_THROWS_AS(forward_loss_grad(m, b), NumericError);
}

TEST_CASE("first Adam step from theta=1, g=1") {
    auto m = scalar_model(1.0);
    auto st = AdamState::for_model(m);
    adam_step(m, scalar_model(1.0), st, 0.005);
    CHECK(st.step == 1);
    // m_hat = 1, v_hat = 1, step = 0.005 / (1 + 1e-8)
    CHECK(m.layer(0).values[0] == doctest::Approx(0.995).epsilon(1e-9));
    const auto rho = relative_change_from_adam(st, m, 0.005);
    CHECK(rho.at("w") == doctest::Approx(0.005).epsilon(1e-6));
}

TEST_CASE("zero gradient leaves parameters and rates at zero change") {
    auto m = init_model(ModelSpec{2, 2, 3, 2}, 5);
    const auto before = m;
    auto st = AdamState::for_model(m);
    adam_step(m, m.zeros_like(), st, 0.005);
    CHECK(m == before);
    for (const auto& [name, r] : relative_change_from_adam(st, m, 0.005)) CHECK(r == 0.0);
}

TEST_CASE("adam_step is deterministic and validates input") {
    const ModelSpec spec{3, 3, 4, 2};
    const auto base = init_model(spec, 6);
    const auto grads = forward_loss_grad(base, random_batch(spec, 4, 2)).grads;
    auto a = base;
    auto b = base;
    auto sa = AdamState::for_model(a);
    auto sb = AdamState::for_model(b);
    adam_step(a, grads, sa, 0.01);
    adam_step(b, grads, sb, 0.01);
    CHECK(a == b);
    CHECK_THROWS_AS(adam_step(a, scalar_model(1.0), sa, 0.01), ContractError);
    CHECK_THROWS_AS(adam_step(a, grads, sa, 0.0), ContractError);
}

TEST_CASE("relative change needs a step first") {
    const auto m = init_model(ModelSpec{2, 2, 2, 2}, 1);
    CHECK_THROWS_AS(relative_change_from_adam(AdamState::for_model(m), m, 0.005), ContractError);
}

TEST_CASE("Adam-derived change rate matches direct before/after measurement") {
    // oracle: keep a copy of the parameters and measure |post - pre| / (|pre| + guard)
    const ModelSpec spec{4, 5, 6, 3};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto m = init_model(spec, seed);
        auto st = AdamState::for_model(m);
        for (int step = 0; step < 4; ++step) {
            const auto pre = m;
            const auto grads = forward_loss_grad(m, random_batch(spec, 8, seed * 10 + step)).grads;
            adam_step(m, grads, st, 0.005);
            const auto rates = relative_change_from_adam(st, m, 0.005, 1e-12);
            for (std::size_t l = 0; l < m.layer_count(); ++l) {
                double direct = 0.0;
                const auto& a = pre.layer(l).values;
                const auto& b = m.layer(l).values;
                for (std::size_t i = 0; i < a.size(); ++i) direct += std::abs(b[i] - a[i]) / (std::abs(a[i]) + 1e-12);
                direct /= static_cast<double>(a.size());
                CHECK(std::abs(rates.at(m.layer(l).name) - direct) < 1e-6);
            }
        }
    }
}

TEST_CASE("aggregation compatibility is an equivalence relation") {
    const auto a = init_model(ModelSpec{2, 3, 4, 2}, 1);
    const auto b = init_model(ModelSpec{2, 3, 4, 2}, 2);
    const auto c = init_model(ModelSpec{2, 3, 4, 2}, 3);
    const auto other = init_model(ModelSpec{3, 3, 4, 2}, 1);
    CHECK(a.compatible(a));
    CHECK(a.compatible(b) == b.compatible(a));
    CHECK((a.compatible(b) && b.compatible(c)));
    CHECK(a.compatible(c));
    CHECK_FALSE(a.compatible(other));
    CHECK_FALSE(other.compatible(a));
}

TEST_CASE("ModelParams rejects duplicate names and bad shapes") {
    CHECK_THROWS_AS(ModelParams({ParamLayer{"w", {1}, {1.0}}, ParamLayer{"w", {1}, {2.0}}}), ContractError);
    CHECK_THROWS_AS(ModelParams({ParamLayer{"w", {2}, {1.0}}}), ContractError);
}
