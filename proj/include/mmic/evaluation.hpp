#pragma once

#include "mmic/data.hpp"
#include "mmic/parallel.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace mmic {

struct ClassificationMetrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::size_t samples = 0;
};

/// Row = true class, column = predicted class.
using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted, std::size_t classes);

/// Mean per-class F1 over classes that occur in the truth or the predictions.
double macro_f1(const ConfusionMatrix& cm);
double accuracy(const ConfusionMatrix& cm);

/// Predictions over complete-modality samples, in chunks; the parallel path
/// splits chunks across threads.
ClassificationMetrics evaluate_model(const ModelParams& model, const std::vector<Sample>& samples,
                                     Exec exec = Exec::serial);

/// Global model on the held-out global test set.
ClassificationMetrics evaluate_global(const ModelParams& global, const SamplePool& test, Exec exec = Exec::serial);

/// sum_k w_k * metric_k with weights renormalised to sum to one.
double evaluate_personalized(std::span<const double> metrics, std::span<const double> weights);

} // namespace mmic
