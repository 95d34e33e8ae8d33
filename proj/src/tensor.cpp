#include "mmic/tensor.hpp"

#include "mmic/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace mmic {

ModelParams::ModelParams(std::vector<ParamLayer> layers) : layers_(std::move(layers)) {
    std::set<std::string> seen;
    for (const auto& l : layers_) {
        if (!seen.insert(l.name).second) throw ContractError("duplicate layer name: " + l.name);
        const std::size_t expected =
            std::accumulate(l.shape.begin(), l.shape.end(), std::size_t{1}, std::multiplies<>{});
        if (l.shape.empty() || expected != l.values.size())
            throw ContractError("layer " + l.name + " has values inconsistent with its shape");
    }
}

std::size_t ModelParams::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.size();
    return n;
}

std::size_t ModelParams::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < layers_.size(); ++i)
        if (layers_[i].name == name) return i;
    throw ContractError("unknown layer: " + name);
}

std::vector<std::string> ModelParams::layer_names() const {
    std::vector<std::string> names;
    names.reserve(layers_.size());
    for (const auto& l : layers_) names.push_back(l.name);
    return names;
}

bool ModelParams::compatible(const ModelParams& other) const noexcept {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i)
        if (!layers_[i].same_shape(other.layers_[i])) return false;
    return true;
}

ModelParams ModelParams::zeros_like() const {
    ModelParams out = *this;
    for (auto& l : out.layers_) std::fill(l.values.begin(), l.values.end(), 0.0);
    return out;
}

bool ModelParams::all_finite() const noexcept {
    for (const auto& l : layers_)
        for (double v : l.values)
            if (!std::isfinite(v)) return false;
    return true;
}

void require_compatible(const ModelParams& a, const ModelParams& b, const char* context) {
    if (!a.compatible(b)) throw ContractError(std::string(context) + ": incompatible model layouts");
}

} // namespace mmic
