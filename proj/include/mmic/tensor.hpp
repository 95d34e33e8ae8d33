#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mmic {

/// One named parameter array. Row-major; the shape is fixed at model creation.
struct ParamLayer {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    bool same_shape(const ParamLayer& other) const noexcept {
        return name == other.name && shape == other.shape && values.size() == other.values.size();
    }
    bool operator==(const ParamLayer&) const = default;
};

/// Ordered list of named layers: the unit of substitution and aggregation.
class ModelParams {
public:
    ModelParams() = default;
    explicit ModelParams(std::vector<ParamLayer> layers);

    std::span<const ParamLayer> layers() const noexcept { return layers_; }
    std::span<ParamLayer> layers() noexcept { return layers_; }
    std::size_t layer_count() const noexcept { return layers_.size(); }
    std::size_t parameter_count() const noexcept;

    const ParamLayer& layer(std::size_t i) const { return layers_.at(i); }
    ParamLayer& layer(std::size_t i) { return layers_.at(i); }

    /// Throws ContractError when no layer has that name.
    std::size_t index_of(const std::string& name) const;
    const ParamLayer& layer(const std::string& name) const { return layers_[index_of(name)]; }
    ParamLayer& layer(const std::string& name) { return layers_[index_of(name)]; }

    std::vector<std::string> layer_names() const;

    /// Same names, same order, same shapes.
    bool compatible(const ModelParams& other) const noexcept;

    /// Same layout with every entry set to zero.
    ModelParams zeros_like() const;

    bool all_finite() const noexcept;

    bool operator==(const ModelParams&) const = default;

private:
    std::vector<ParamLayer> layers_;
};

/// Gradients share the parameter layout.
using Gradients = ModelParams;

/// Throws ContractError naming `context` when the two layouts differ.
void require_compatible(const ModelParams& a, const ModelParams& b, const char* context);

} // namespace mmic
