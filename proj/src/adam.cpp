#include "mmic/adam.hpp"

#include "mmic/errors.hpp"

#include <cmath>

namespace mmic {

AdamState AdamState::for_model(const ModelParams& model, double beta1, double beta2, double eps) {
    AdamState s;
    s.m = model.zeros_like();
    s.v = model.zeros_like();
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    return s;
}

void adam_step(ModelParams& model, const Gradients& grads, AdamState& state, double lr) {
    if (!(lr > 0.0)) throw ContractError("adam_step: learning rate must be positive");
    require_compatible(model, grads, "adam_step(grads)");
    require_compatible(model, state.m, "adam_step(state)");

    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        auto& theta = model.layer(l).values;
        const auto& g = grads.layer(l).values;
        auto& m = state.m.layer(l).values;
        auto& v = state.v.layer(l).values;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            theta[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

LayerRates relative_change_from_adam(const AdamState& state, const ModelParams& post_step, double lr,
                                     double eps_guard) {
    if (state.step < 1) throw ContractError("relative_change_from_adam called before any optimizer step");
    require_compatible(post_step, state.m, "relative_change_from_adam");

    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    LayerRates rates;
    for (std::size_t l = 0; l < post_step.layer_count(); ++l) {
        const auto& theta = post_step.layer(l).values;
        const auto& m = state.m.layer(l).values;
        const auto& v = state.v.layer(l).values;
        double sum = 0.0;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double step = lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + state.eps);
            const double pre = theta[i] + step;
            sum += std::abs(step) / (std::abs(pre) + eps_guard);
        }
        rates[post_step.layer(l).name] = theta.empty() ? 0.0 : sum / static_cast<double>(theta.size());
    }
    return rates;
}

} // namespace mmic
