#pragma once

#include "mmic/tensor.hpp"

#include <map>
#include <string>

namespace mmic {

/// Adam moments laid out like the model. `step` counts applied updates.
struct AdamState {
    ModelParams m;
    ModelParams v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_model(const ModelParams& model, double beta1 = 0.9, double beta2 = 0.999,
                               double eps = 1e-8);
};

/// Bias-corrected Adam update, in place. Increments state.step by one.
void adam_step(ModelParams& model, const Gradients& grads, AdamState& state, double lr);

/// Per-layer mean relative change, keyed by layer name.
using LayerRates = std::map<std::string, double>;

inline constexpr double kDefaultEpsGuard = 1e-12;

/// Relative parameter change of the step that was just applied, recovered from
/// the optimizer moments instead of a stored copy of the previous parameters.
///
/// `post_step` is the model after the step. For every entry the step size is
/// lr * |m_hat| / (sqrt(v_hat) + eps); the pre-step value is reconstructed as
/// post + lr * m_hat / (sqrt(v_hat) + eps), and the rate is
/// |step| / (|theta_pre| + eps_guard), averaged over the layer.
LayerRates relative_change_from_adam(const AdamState& state, const ModelParams& post_step, double lr,
                                     double eps_guard = kDefaultEpsGuard);

} // namespace mmic
