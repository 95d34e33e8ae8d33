#include "mmic/evaluation.hpp"

#include "mmic/errors.hpp"

#include <algorithm>

namespace mmic {

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted, std::size_t classes) {
    if (truth.size() != predicted.size()) throw ContractError("confusion_matrix: length mismatch");
    ConfusionMatrix cm(classes, std::vector<std::size_t>(classes, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || predicted[i] < 0 || static_cast<std::size_t>(truth[i]) >= classes ||
            static_cast<std::size_t>(predicted[i]) >= classes)
            throw ContractError("confusion_matrix: label out of range");
        ++cm[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    std::size_t hit = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < cm.size(); ++i)
        for (std::size_t j = 0; j < cm.size(); ++j) {
            total += cm[i][j];
            if (i == j) hit += cm[i][j];
        }
    return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

double macro_f1(const ConfusionMatrix& cm) {
    const std::size_t c = cm.size();
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t k = 0; k < c; ++k) {
        const double tp = static_cast<double>(cm[k][k]);
        double fp = 0.0;
        double fn = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            if (j == k) continue;
            fp += static_cast<double>(cm[j][k]);
            fn += static_cast<double>(cm[k][j]);
        }
        if (tp + fp + fn == 0.0) continue;
        sum += 2.0 * tp / (2.0 * tp + fp + fn);
        ++used;
    }
    return used == 0 ? 0.0 : sum / static_cast<double>(used);
}

ClassificationMetrics evaluate_model(const ModelParams& model, const std::vector<Sample>& samples, Exec exec) {
    if (samples.empty()) throw ContractError("evaluate_model: empty test set");
    const ModelSpec spec = spec_of(model);
    constexpr std::size_t kChunk = 256;
    const std::size_t chunks = (samples.size() + kChunk - 1) / kChunk;
    std::vector<int> predicted(samples.size());
    for_each_index(exec, chunks, [&](std::size_t ch) {
        const std::size_t lo = ch * kChunk;
        const std::size_t hi = std::min(samples.size(), lo + kChunk);
        const std::vector<Sample> part(samples.begin() + static_cast<std::ptrdiff_t>(lo),
                                       samples.begin() + static_cast<std::ptrdiff_t>(hi));
        const auto p = predict(model, make_batch(part, spec.dim_a, spec.dim_b));
        std::copy(p.begin(), p.end(), predicted.begin() + static_cast<std::ptrdiff_t>(lo));
    });
    std::vector<int> truth;
    truth.reserve(samples.size());
    for (const auto& s : samples) truth.push_back(s.label);
    const auto cm = confusion_matrix(truth, predicted, spec.classes);
    return ClassificationMetrics{accuracy(cm), macro_f1(cm), samples.size()};
}

ClassificationMetrics evaluate_global(const ModelParams& global, const SamplePool& test, Exec exec) {
    return evaluate_model(global, test.samples, exec);
}

double evaluate_personalized(std::span<const double> metrics, std::span<const double> weights) {
    if (metrics.size() != weights.size()) throw ContractError("evaluate_personalized: length mismatch");
    if (metrics.empty()) throw ContractError("evaluate_personalized: no clients");
    double total = 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < metrics.size(); ++i) {
        total += weights[i];
        acc += weights[i] * metrics[i];
    }
    if (!(total > 0.0)) throw ContractError("evaluate_personalized: weights sum to zero");
    return acc / total;
}

} // namespace mmic
