#pragma once

#include "mmic/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mmic {

enum class Activation { tanh };

/// Two per-modality linear encoders, a nonlinearity, concatenation fusion and a
/// linear classifier head. Layers (weight and bias separate):
///   encoder_A.weight [d_A x h], encoder_A.bias [h],
///   encoder_B.weight [d_B x h], encoder_B.bias [h],
///   head.weight [2h x C],       head.bias [C].
struct ModelSpec {
    std::size_t dim_a = 16;
    std::size_t dim_b = 16;
    std::size_t hidden = 16;
    std::size_t classes = 4;
    Activation activation = Activation::tanh;

    void validate() const;
};

inline constexpr const char* kEncoderAWeight = "encoder_A.weight";
inline constexpr const char* kEncoderABias = "encoder_A.bias";
inline constexpr const char* kEncoderBWeight = "encoder_B.weight";
inline constexpr const char* kEncoderBBias = "encoder_B.bias";
inline constexpr const char* kHeadWeight = "head.weight";
inline constexpr const char* kHeadBias = "head.bias";

/// Row-major inputs for n samples. Missing modalities are already zero-filled.
struct Batch {
    std::size_t dim_a = 0;
    std::size_t dim_b = 0;
    std::vector<double> xa;  // n * dim_a
    std::vector<double> xb;  // n * dim_b
    std::vector<int> labels; // n
    bool has_missing = false;

    std::size_t size() const noexcept { return labels.size(); }
};

struct LossGrad {
    double loss = 0.0;
    Gradients grads;
    std::size_t correct = 0;
};

/// Scaled-uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every layer.
ModelParams init_model(const ModelSpec& spec, std::uint64_t seed);

/// Mean softmax cross-entropy over the batch and its analytic gradients.
LossGrad forward_loss_grad(const ModelParams& model, const Batch& batch);

/// Loss only (no gradient buffers); used by finite-difference checks.
double forward_loss(const ModelParams& model, const Batch& batch);

/// Arg-max class per sample.
std::vector<int> predict(const ModelParams& model, const Batch& batch);

/// Recover the spec a model was built from (validates the layer layout).
ModelSpec spec_of(const ModelParams& model);

} // namespace mmic
