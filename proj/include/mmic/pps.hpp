#pragma once

#include "mmic/adam.hpp"
#include "mmic/tensor.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mmic {

/// Per-epoch accumulator of change rates over the batches that carry complete
/// modalities right after a batch with missing modalities.
struct ChangeTracker {
    LayerRates sums;
    std::size_t count = 0;
    bool prev_missing = false;
};

/// Accumulate `rates` iff the previous batch had missing modalities and this
/// one does not; then remember this batch's flag. `rates` must name every
/// layer already present in the tracker.
void observe_batch(ChangeTracker& tracker, bool cur_missing, const LayerRates& rates);

struct PovertyReport {
    std::size_t client = 0;
    std::size_t round = 0;
    std::optional<std::string> layer; // absent: nothing to substitute
    LayerRates rates;                 // cross-epoch mean per layer
};

/// Per epoch rate = sum / |B*|; epochs with empty B* are skipped; the epoch
/// rates are averaged and the arg-max layer is returned. Ties go to the
/// lexicographically first layer name.
PovertyReport poverty_layer(std::span<const ChangeTracker> epochs);

struct PovertyTarget {
    ModelParams* model = nullptr;
    std::string layer;
};

struct Donor {
    const ModelParams* model = nullptr;
    double weight = 0.0; // dataset size or share; renormalised over donors
};

/// Replace each target's poverty layer with the donor-weighted average of that
/// layer. Returns false (and leaves targets untouched) when there are no donors;
/// callers record the skip.
bool substitute(std::span<const PovertyTarget> targets, std::span<const Donor> donors);

} // namespace mmic
