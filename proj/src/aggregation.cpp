#include "mmic/aggregation.hpp"

#include "mmic/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mmic {

ModelParams fedavg(std::span<const ModelParams* const> models, std::span<const double> weights) {
    if (models.empty()) throw ContractError("fedavg: no models");
    if (models.size() != weights.size()) throw ContractError("fedavg: models/weights length mismatch");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw ContractError("fedavg: negative weight");
        total += w;
    }
    if (!(total > 0.0)) throw ContractError("fedavg: weights sum to zero");
    for (const auto* m : models) require_compatible(*models.front(), *m, "fedavg");

    ModelParams out = models.front()->zeros_like();
    for (std::size_t k = 0; k < models.size(); ++k) {
        const double w = weights[k] / total;
        for (std::size_t l = 0; l < out.layer_count(); ++l) {
            auto& dst = out.layer(l).values;
            const auto& src = models[k]->layer(l).values;
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += w * src[i];
        }
    }
    return out;
}

ModelParams fedavg(std::span<const ModelParams> models, std::span<const double> weights) {
    std::vector<const ModelParams*> ptrs;
    for (const auto& m : models) ptrs.push_back(&m);
    return fedavg(std::span<const ModelParams* const>(ptrs), weights);
}

std::vector<double> return_deviations(const ReturnSeries& series) {
    std::vector<double> dev;
    dev.reserve(series.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const double mean_before = k == 0 ? 0.0 : sum / static_cast<double>(k);
        dev.push_back(series[k].second - mean_before);
        sum += series[k].second;
    }
    return dev;
}

double cluster_risk(std::span<const ReturnSeries* const> histories, std::span<const double> weights, std::size_t rounds) {
    if (histories.size() != weights.size()) throw ContractError("cluster_risk: histories/weights length mismatch");
    if (rounds < 2) return 0.0;
    std::vector<std::vector<double>> dev;
    for (const auto* h : histories) dev.push_back(return_deviations(*h));

    double total = 0.0;
    for (std::size_t i = 0; i < histories.size(); ++i) {
        for (std::size_t j = 0; j < histories.size(); ++j) {
            const auto& hi = *histories[i];
            const auto& hj = *histories[j];
            double cross = 0.0;
            std::size_t a = 0;
            std::size_t b = 0;
            while (a < hi.size() && b < hj.size()) {
                if (hi[a].first < hj[b].first) ++a;
                else if (hj[b].first < hi[a].first) ++b;
                else cross += dev[i][a++] * dev[j][b++];
            }
            total += weights[i] * weights[j] * cross / static_cast<double>(rounds - 1);
        }
    }
    return total;
}

RiskTracker::RiskTracker(std::size_t clients)
    : n_(clients), sum_(clients, 0.0), cnt_(clients, 0), cross_(clients * clients, 0.0) {}

void RiskTracker::record_round(std::size_t round, std::span<const std::pair<std::size_t, double>> returns) {
    if (round <= last_round_ && last_round_ != 0) throw ContractError("RiskTracker: rounds must increase");
    if (returns.empty()) return;
    last_round_ = round;
    std::vector<std::pair<std::size_t, double>> dev;
    for (const auto& [c, alpha] : returns) {
        if (c >= n_) throw ContractError("RiskTracker: client out of range");
        const double mean_before = cnt_[c] == 0 ? 0.0 : sum_[c] / static_cast<double>(cnt_[c]);
        dev.emplace_back(c, alpha - mean_before);
    }
    for (const auto& [c, alpha] : returns) {
        sum_[c] += alpha;
        ++cnt_[c];
    }
    for (const auto& [i, di] : dev)
        for (const auto& [j, dj] : dev) cross_[i * n_ + j] += di * dj;
}

double RiskTracker::risk(std::span<const std::size_t> clients, std::span<const double> weights, std::size_t rounds) const {
    if (clients.size() != weights.size()) throw ContractError("RiskTracker::risk: length mismatch");
    if (rounds < 2) return 0.0;
    double total = 0.0;
    for (std::size_t a = 0; a < clients.size(); ++a)
        for (std::size_t b = 0; b < clients.size(); ++b)
            total += weights[a] * weights[b] * cross_[clients[a] * n_ + clients[b]] / static_cast<double>(rounds - 1);
    return total;
}

double rarc(double risk, double cluster_return, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("rarc: lambda must be in [0, 1]");
    return lambda * risk - (1.0 - lambda) * cluster_return;
}

void validate_beta_range(double beta, double tau_s) {
    if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("beta must be in [0, 1)");
    if (!(tau_s > 0.0)) throw ConfigError("tau_s must be positive");
    if (beta + 1.0 / tau_s > 1.0) throw ConfigError("beta + 1/tau_s must be <= 1");
}

double dynamic_beta(double beta, double gamma, double tau_s) {
    validate_beta_range(beta, tau_s);
    return beta + std::tanh(std::max(gamma, 0.0)) / tau_s;
}

void GlobalOptConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("server lr must be positive");
    if (!(tau_a > 0.0)) throw ConfigError("tau_a must be positive");
    validate_beta_range(beta, tau_s);
}

GlobalOptState GlobalOptState::create(const ModelParams& model, std::size_t clusters, const GlobalOptConfig& config) {
    config.validate();
    if (clusters == 0) throw ContractError("GlobalOptState: need at least one cluster");
    GlobalOptState s;
    s.config = config;
    const std::size_t slots = config.state == StateMode::pooled ? 1 : clusters;
    s.momentum.assign(slots, model.zeros_like());
    s.accum.assign(slots, model.zeros_like());
    return s;
}

namespace {

void momentum_update(ModelParams& mtn, ModelParams& acc, const ModelParams& delta, double beta_star) {
    for (std::size_t l = 0; l < mtn.layer_count(); ++l) {
        auto& m = mtn.layer(l).values;
        auto& v = acc.layer(l).values;
        const auto& d = delta.layer(l).values;
        for (std::size_t i = 0; i < m.size(); ++i) {
            m[i] = beta_star * m[i] + (1.0 - beta_star) * d[i];
            v[i] += d[i] * d[i];
        }
    }
}

void apply_adaptive(ModelParams& global, const ModelParams& mtn, const ModelParams& acc, double lr, double tau_a) {
    for (std::size_t l = 0; l < global.layer_count(); ++l) {
        auto& g = global.layer(l).values;
        const auto& m = mtn.layer(l).values;
        const auto& v = acc.layer(l).values;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += lr * m[i] / (std::sqrt(v[i]) + tau_a);
    }
}

ModelParams weighted_delta(const ModelParams& cluster, const ModelParams& global, double w) {
    ModelParams d = global.zeros_like();
    for (std::size_t l = 0; l < d.layer_count(); ++l) {
        auto& dst = d.layer(l).values;
        const auto& c = cluster.layer(l).values;
        const auto& g = global.layer(l).values;
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = w * (c[i] - g[i]);
    }
    return d;
}

} // namespace

std::vector<double> global_aggregate(GlobalOptState& state, ModelParams& global,
                                     std::span<const ModelParams* const> cluster_models,
                                     std::span<const double> cluster_weights, std::span<const double> rarcs) {
    const std::size_t m = cluster_models.size();
    if (m == 0 || cluster_weights.size() != m || rarcs.size() != m)
        throw ContractError("global_aggregate: cluster models, weights and rarcs must align");
    const bool pooled = state.config.state == StateMode::pooled;
    if (!pooled && state.momentum.size() != m) throw ContractError("global_aggregate: state built for a different cluster count");
    double wsum = 0.0;
    for (double w : cluster_weights) wsum += w;
    if (std::abs(wsum - 1.0) > 1e-6) throw ContractError("global_aggregate: cluster weights sum to " + std::to_string(wsum));
    for (const auto* c : cluster_models) require_compatible(global, *c, "global_aggregate");

    const auto& cfg = state.config;
    std::vector<double> beta_star(m);
    for (std::size_t k = 0; k < m; ++k) beta_star[k] = dynamic_beta(cfg.beta, rarcs[k], cfg.tau_s);

    if (pooled) {
        ModelParams delta = global.zeros_like();
        double b = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const ModelParams dk = weighted_delta(*cluster_models[k], global, cluster_weights[k]);
            for (std::size_t l = 0; l < delta.layer_count(); ++l) {
                auto& dst = delta.layer(l).values;
                const auto& src = dk.layer(l).values;
                for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
            }
            b += cluster_weights[k] * beta_star[k];
        }
        momentum_update(state.momentum[0], state.accum[0], delta, b);
        apply_adaptive(global, state.momentum[0], state.accum[0], cfg.lr, cfg.tau_a);
        return beta_star;
    }

    if (cfg.combine == CombineMode::sequential) {
        for (std::size_t k = 0; k < m; ++k) {
            const ModelParams dk = weighted_delta(*cluster_models[k], global, cluster_weights[k]);
            momentum_update(state.momentum[k], state.accum[k], dk, beta_star[k]);
            apply_adaptive(global, state.momentum[k], state.accum[k], cfg.lr, cfg.tau_a);
        }
        return beta_star;
    }

    for (std::size_t k = 0; k < m; ++k) {
        const ModelParams dk = weighted_delta(*cluster_models[k], global, cluster_weights[k]);
        momentum_update(state.momentum[k], state.accum[k], dk, beta_star[k]);
    }
    ModelParams step = global.zeros_like();
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t l = 0; l < step.layer_count(); ++l) {
            auto& s = step.layer(l).values;
            const auto& mt = state.momentum[k].layer(l).values;
            const auto& v = state.accum[k].layer(l).values;
            for (std::size_t i = 0; i < s.size(); ++i) s[i] += mt[i] / (std::sqrt(v[i]) + cfg.tau_a);
        }
    }
    for (std::size_t l = 0; l < global.layer_count(); ++l) {
        auto& g = global.layer(l).values;
        const auto& s = step.layer(l).values;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += cfg.lr * s[i];
    }
    return beta_star;
}

} // namespace mmic
