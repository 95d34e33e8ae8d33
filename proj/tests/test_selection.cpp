#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mmic/errors.hpp"
#include "mmic/rng.hpp"
#include "mmic/selection.hpp"

#include <cmath>
#include <numeric>

using namespace mmic;

namespace {

// leave-one-out swing check written out directly
std::vector<std::size_t> brute_force_core(const std::vector<double>& w, const std::vector<double>& a, double th) {
    std::vector<std::size_t> out;
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) total += w[i] * a[i];
    if (total < th) return out;
    for (std::size_t i = 0; i < w.size(); ++i) {
        double rest = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j)
            if (j != i) rest += w[j] * a[j];
        if (rest < th) out.push_back(i);
    }
    return out;
}

} // namespace

TEST_CASE("client return is the metric difference") {
    CHECK(client_return(0.6, 0.5) == doctest::Approx(0.1));
    CHECK(client_return(0.5, 0.5) == 0.0);
}

TEST_CASE("first recorded metric is its own return") {
    SelectionLedger ledger(3, 1);
    CHECK(ledger.record_metric(1, 1, 0.4) == doctest::Approx(0.4));
    CHECK(ledger.record_metric(1, 5, 0.55) == doctest::Approx(0.15));
    CHECK(ledger.entry(1).returns.size() == 2);
    CHECK(*ledger.entry(1).last_metric == 0.55);
}

TEST_CASE("coalition return") {
    const std::vector<double> w{0.5, 0.5}, a{0.2, -0.1};
    CHECK(coalition_return(w, a) == doctest::Approx(0.05));
    const std::vector<double> zeros{0.0, 0.0};
    CHECK(coalition_return(w, zeros) == 0.0);
    const std::vector<double> w1{0.3}, a1{0.7};
    CHECK(coalition_return(w1, a1) == doctest::Approx(0.21));
    CHECK_THROWS_AS(coalition_return(w, a1), ContractError);
}

TEST_CASE("core members of the two-client example") {
    const std::vector<double> w{0.5, 0.5}, a{0.3, -0.1};
    CHECK(identify_core_members(w, a, 0.0) == std::vector<std::size_t>{0});
}

TEST_CASE("core member edge cases") {
    const std::vector<double> w{0.5, 0.5}, bad{-0.3, 0.1};
    CHECK(identify_core_members(w, bad, 0.0).empty());
    const std::vector<double> w1{0.4}, a1{0.5};
    CHECK(identify_core_members(w1, a1, 0.1) == std::vector<std::size_t>{0});
    CHECK(identify_core_members(std::span<const double>{}, std::span<const double>{}, 0.0).empty());
}

TEST_CASE("core members agree with exhaustive leave-one-out") {
    Rng rng(17);
    std::uniform_real_distribution<double> u(-0.2, 0.2), wd(0.01, 0.2);
    std::uniform_int_distribution<int> size(1, 8);
    for (int t = 0; t < 1000; ++t) {
        const int n = size(rng);
        std::vector<double> w(n), a(n);
        for (int i = 0; i < n; ++i) {
            w[i] = wd(rng);
            a[i] = u(rng);
        }
        const double th = t % 2 ? 0.0 : u(rng) * 0.1;
        CHECK(identify_core_members(w, a, th) == brute_force_core(w, a, th));
    }
}

TEST_CASE("counters") {
    SelectionLedger ledger(2, 1);
    const std::vector<std::size_t> sel{0, 1}, core{0};
    ledger.update_counters(sel, core);
    CHECK(ledger.selected_counts() == std::vector<long>{1, 1});
    CHECK(ledger.core_counts() == std::vector<long>{1, 0});
    for (int i = 0; i < 4; ++i) ledger.update_counters(sel, core);
    CHECK(ledger.selected_counts() == std::vector<long>{5, 5});
    CHECK(ledger.core_counts() == std::vector<long>{5, 0});
    const std::vector<std::size_t> only0{0}, only1{1};
    CHECK_THROWS_AS(ledger.update_counters(only0, only1), ContractError);
}

TEST_CASE("core counts never exceed selected counts") {
    Rng rng(4);
    SelectionLedger ledger(6, 1);
    std::bernoulli_distribution coin(0.5);
    for (int round = 0; round < 300; ++round) {
        std::vector<std::size_t> sel, core;
        for (std::size_t i = 0; i < 6; ++i)
            if (coin(rng)) {
                sel.push_back(i);
                if (coin(rng)) core.push_back(i);
            }
        ledger.update_counters(sel, core);
    }
    const auto t = ledger.selected_counts();
    const auto phi = ledger.core_counts();
    for (std::size_t i = 0; i < 6; ++i) CHECK(phi[i] <= t[i]);
}

TEST_CASE("threshold rules") {
    SelectionLedger ledger(2, 2);
    CHECK(ledger.threshold(0, ThresholdRule::zero) == 0.0);
    CHECK(ledger.threshold(0, ThresholdRule::running_mean) == 0.0);
    ledger.record_cluster_return(0, 0.2);
    ledger.record_cluster_return(0, 0.4);
    CHECK(ledger.threshold(0, ThresholdRule::running_mean) == doctest::Approx(0.3));
    CHECK(ledger.threshold(1, ThresholdRule::running_mean) == 0.0);
    CHECK(ledger.threshold(0, ThresholdRule::zero) == 0.0);
}

TEST_CASE("selection probabilities worked example") {
    SelectionLedger ledger(2, 1);
    const std::vector<std::size_t> both{0, 1}, c0{0}, c01{0, 1}, none{};
    ledger.update_counters(both, c01);
    ledger.update_counters(both, c0);
    ledger.update_counters(both, none);
    ledger.update_counters(both, none); // T=(4,4), phi=(2,1)
    const auto p = selection_probabilities(ledger, both, 1.0);
    CHECK(p[0] == doctest::Approx(0.5622).epsilon(1e-4));
    CHECK(p[1] == doctest::Approx(0.4378).epsilon(1e-4));
}

TEST_CASE("equal ratios and vanishing temperature give uniform probabilities") {
    SelectionLedger ledger(3, 1);
    const std::vector<std::size_t> members{0, 1, 2};
    for (double p : selection_probabilities(ledger, members, 1.0)) CHECK(p == doctest::Approx(1.0 / 3));
    const std::vector<std::size_t> sel{0, 1}, core{0};
    ledger.update_counters(sel, core);
    for (double p : selection_probabilities(ledger, members, 1e-9)) CHECK(p == doctest::Approx(1.0 / 3));
    CHECK_THROWS_AS(selection_probabilities(ledger, std::span<const std::size_t>{}, 1.0), ContractError);
}

TEST_CASE("probabilities form a distribution monotone in phi / T") {
    Rng rng(8);
    std::uniform_int_distribution<int> coin(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        SelectionLedger ledger(5, 1);
        for (int r = 0; r < 20; ++r) {
            std::vector<std::size_t> sel, core;
            for (std::size_t i = 0; i < 5; ++i)
                if (coin(rng)) {
                    sel.push_back(i);
                    if (coin(rng)) core.push_back(i);
                }
            ledger.update_counters(sel, core);
        }
        const std::vector<std::size_t> members{0, 1, 2, 3, 4};
        const auto p = selection_probabilities(ledger, members, 2.0);
        CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
        const auto t = ledger.selected_counts();
        const auto phi = ledger.core_counts();
        auto ratio = [&](std::size_t i) { return t[i] ? static_cast<double>(phi[i]) / t[i] : 0.0; };
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 5; ++j)
                if (ratio(i) > ratio(j)) CHECK(p[i] > p[j]);
    }
}

TEST_CASE("sample_clients edge cases") {
    Rng rng(1);
    const std::vector<double> p{0.2, 0.3, 0.5};
    CHECK(sample_clients(p, 3, rng) == std::vector<std::size_t>{0, 1, 2});
    const std::vector<double> degenerate{1.0, 0.0, 0.0};
    for (int i = 0; i < 20; ++i) CHECK(sample_clients(degenerate, 1, rng) == std::vector<std::size_t>{0});
    CHECK_THROWS_AS(sample_clients(p, 0, rng), ConfigError);
    CHECK_THROWS_AS(sample_clients(p, 4, rng), ContractError);
}

TEST_CASE("sampling frequencies match probabilities") {
    Rng rng(99);
    const std::vector<double> p{0.1, 0.25, 0.4, 0.25};
    std::vector<double> freq(4, 0.0);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) freq[sample_clients(p, 1, rng)[0]] += 1.0 / draws;
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(freq[i] - p[i]) < 0.02);
}

TEST_CASE("selection count") {
    CHECK(selection_count(10, 0.4) == 4);
    CHECK(selection_count(2, 0.1) == 1);
    CHECK(selection_count(3, 1.0) == 3);
}
