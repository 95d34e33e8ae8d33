#include "mmic/pps.hpp"

#include "mmic/errors.hpp"

#include <cmath>

namespace mmic {

void observe_batch(ChangeTracker& tracker, bool cur_missing, const LayerRates& rates) {
    for (const auto& [name, _] : tracker.sums)
        if (!rates.contains(name)) throw ContractError("observe_batch: missing rate for layer " + name);
    if (tracker.prev_missing && !cur_missing) {
        for (const auto& [name, r] : rates) {
            if (!std::isfinite(r)) throw NumericError("observe_batch: non-finite rate for layer " + name);
            tracker.sums[name] += r;
        }
        ++tracker.count;
    }
    tracker.prev_missing = cur_missing;
}

PovertyReport poverty_layer(std::span<const ChangeTracker> epochs) {
    PovertyReport report;
    std::size_t used = 0;
    for (const auto& e : epochs) {
        if (e.count == 0) continue;
        ++used;
        for (const auto& [name, s] : e.sums) report.rates[name] += s / static_cast<double>(e.count);
    }
    if (used == 0) return report;
    for (auto& [_, r] : report.rates) r /= static_cast<double>(used);
    // std::map iterates in name order, so strict '>' keeps the first name on ties
    const std::string* best = nullptr;
    double best_rate = 0.0;
    for (const auto& [name, r] : report.rates) {
        if (!best || r > best_rate) {
            best = &name;
            best_rate = r;
        }
    }
    if (best) report.layer = *best;
    return report;
}

bool substitute(std::span<const PovertyTarget> targets, std::span<const Donor> donors) {
    if (targets.empty()) return true;
    if (donors.empty()) return false;
    double total = 0.0;
    for (const auto& d : donors) {
        if (!d.model) throw ContractError("substitute: null donor model");
        if (!(d.weight >= 0.0)) throw ContractError("substitute: negative donor weight");
        total += d.weight;
    }
    if (!(total > 0.0)) throw ContractError("substitute: donor weights sum to zero");

    for (const auto& t : targets) {
        if (!t.model) throw ContractError("substitute: null poverty model");
        for (const auto& d : donors) require_compatible(*t.model, *d.model, "substitute");
        const std::size_t li = t.model->index_of(t.layer);
        auto& dst = t.model->layer(li).values;
        std::vector<double> acc(dst.size(), 0.0);
        for (const auto& d : donors) {
            const double w = d.weight / total;
            const auto& src = d.model->layer(li).values;
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * src[i];
        }
        dst = std::move(acc);
    }
    return true;
}

} // namespace mmic
