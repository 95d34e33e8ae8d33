#include "mmic/model.hpp"

#include "mmic/errors.hpp"
#include "mmic/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mmic {

void ModelSpec::validate() const {
    if (dim_a == 0 || dim_b == 0 || hidden == 0 || classes == 0)
        throw ConfigError("model dims must be positive (dim_a, dim_b, hidden, classes)");
    if (classes < 2) throw ConfigError("model needs at least 2 classes");
}

namespace {

ParamLayer uniform_layer(std::string name, std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return ParamLayer{std::move(name), std::move(shape), std::move(v)};
}

struct Dims {
    std::size_t da, db, h, c;
};

Dims dims_of(const ModelParams& m) {
    if (m.layer_count() != 6) throw ContractError("model must have the six encoder/head layers");
    const auto& wa = m.layer(0);
    const auto& wb = m.layer(2);
    const auto& wh = m.layer(4);
    if (wa.name != kEncoderAWeight || m.layer(1).name != kEncoderABias || wb.name != kEncoderBWeight ||
        m.layer(3).name != kEncoderBBias || wh.name != kHeadWeight || m.layer(5).name != kHeadBias)
        throw ContractError("unexpected layer names for the two-encoder model");
    return Dims{wa.shape.at(0), wb.shape.at(0), wa.shape.at(1), wh.shape.at(1)};
}

// Activations for one batch, kept for the backward pass.
struct Forward {
    std::vector<double> za; // n*h, post-tanh
    std::vector<double> zb; // n*h
    std::vector<double> probs; // n*c
};

void encode(const std::vector<double>& x, std::size_t n, std::size_t d, std::size_t h, const ParamLayer& w,
            const ParamLayer& b, std::vector<double>& z) {
    z.assign(n * h, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        double* zs = &z[s * h];
        for (std::size_t j = 0; j < h; ++j) zs[j] = b.values[j];
        for (std::size_t i = 0; i < d; ++i) {
            const double xi = x[s * d + i];
            if (xi == 0.0) continue;
            const double* wi = &w.values[i * h];
            for (std::size_t j = 0; j < h; ++j) zs[j] += xi * wi[j];
        }
        for (std::size_t j = 0; j < h; ++j) zs[j] = std::tanh(zs[j]);
    }
}

void check_finite(const std::vector<double>& v, const char* layer) {
    for (double x : v)
        if (!std::isfinite(x)) throw NumericError(std::string("non-finite activation after layer ") + layer);
}

Forward run_forward(const ModelParams& m, const Batch& batch, const Dims& d) {
    const std::size_t n = batch.size();
    if (n == 0) throw ContractError("forward pass on an empty batch");
    if (batch.dim_a != d.da || batch.dim_b != d.db || batch.xa.size() != n * d.da || batch.xb.size() != n * d.db)
        throw ContractError("batch dims do not match model");

    Forward f;
    encode(batch.xa, n, d.da, d.h, m.layer(0), m.layer(1), f.za);
    check_finite(f.za, kEncoderAWeight);
    encode(batch.xb, n, d.db, d.h, m.layer(2), m.layer(3), f.zb);
    check_finite(f.zb, kEncoderBWeight);

    const auto& wh = m.layer(4).values;
    const auto& bh = m.layer(5).values;
    f.probs.assign(n * d.c, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        double* p = &f.probs[s * d.c];
        for (std::size_t k = 0; k < d.c; ++k) p[k] = bh[k];
        for (std::size_t j = 0; j < d.h; ++j) {
            const double a = f.za[s * d.h + j];
            const double b = f.zb[s * d.h + j];
            const double* wa = &wh[j * d.c];
            const double* wb = &wh[(d.h + j) * d.c];
            for (std::size_t k = 0; k < d.c; ++k) p[k] += a * wa[k] + b * wb[k];
        }
        const double mx = *std::max_element(p, p + d.c);
        double z = 0.0;
        for (std::size_t k = 0; k < d.c; ++k) {
            p[k] = std::exp(p[k] - mx);
            z += p[k];
        }
        for (std::size_t k = 0; k < d.c; ++k) p[k] /= z;
    }
    check_finite(f.probs, kHeadWeight);
    return f;
}

double mean_nll(const Forward& f, const Batch& batch, std::size_t c, std::size_t* correct) {
    const std::size_t n = batch.size();
    double loss = 0.0;
    std::size_t hits = 0;
    for (std::size_t s = 0; s < n; ++s) {
        const int y = batch.labels[s];
        if (y < 0 || static_cast<std::size_t>(y) >= c) throw ContractError("label out of range");
        const double* p = &f.probs[s * c];
        loss -= std::log(std::max(p[y], 1e-300));
        if (static_cast<std::size_t>(std::max_element(p, p + c) - p) == static_cast<std::size_t>(y)) ++hits;
    }
    if (correct) *correct = hits;
    return loss / static_cast<double>(n);
}

} // namespace

ModelParams init_model(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng = make_rng(seed, {0x6d6f64656cULL});
    const std::size_t h = spec.hidden;
    std::vector<ParamLayer> layers;
    layers.push_back(uniform_layer(kEncoderAWeight, {spec.dim_a, h}, spec.dim_a, rng));
    layers.push_back(uniform_layer(kEncoderABias, {h}, spec.dim_a, rng));
    layers.push_back(uniform_layer(kEncoderBWeight, {spec.dim_b, h}, spec.dim_b, rng));
    layers.push_back(uniform_layer(kEncoderBBias, {h}, spec.dim_b, rng));
    layers.push_back(uniform_layer(kHeadWeight, {2 * h, spec.classes}, 2 * h, rng));
    layers.push_back(uniform_layer(kHeadBias, {spec.classes}, 2 * h, rng));
    return ModelParams(std::move(layers));
}

ModelSpec spec_of(const ModelParams& model) {
    const Dims d = dims_of(model);
    return ModelSpec{d.da, d.db, d.h, d.c, Activation::tanh};
}

double forward_loss(const ModelParams& model, const Batch& batch) {
    const Dims d = dims_of(model);
    const Forward f = run_forward(model, batch, d);
    return mean_nll(f, batch, d.c, nullptr);
}

std::vector<int> predict(const ModelParams& model, const Batch& batch) {
    const Dims d = dims_of(model);
    const Forward f = run_forward(model, batch, d);
    std::vector<int> out(batch.size());
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const double* p = &f.probs[s * d.c];
        out[s] = static_cast<int>(std::max_element(p, p + d.c) - p);
    }
    return out;
}

LossGrad forward_loss_grad(const ModelParams& model, const Batch& batch) {
    const Dims d = dims_of(model);
    const Forward f = run_forward(model, batch, d);
    const std::size_t n = batch.size();

    LossGrad out;
    out.loss = mean_nll(f, batch, d.c, &out.correct);
    if (!std::isfinite(out.loss)) throw NumericError("non-finite loss at layer head.bias");
    out.grads = model.zeros_like();

    auto& g_wa = out.grads.layer(0).values;
    auto& g_ba = out.grads.layer(1).values;
    auto& g_wb = out.grads.layer(2).values;
    auto& g_bb = out.grads.layer(3).values;
    auto& g_wh = out.grads.layer(4).values;
    auto& g_bh = out.grads.layer(5).values;
    const auto& wh = model.layer(4).values;

    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> dlogit(d.c);
    std::vector<double> dpre_a(d.h);
    std::vector<double> dpre_b(d.h);
    for (std::size_t s = 0; s < n; ++s) {
        const double* p = &f.probs[s * d.c];
        for (std::size_t k = 0; k < d.c; ++k) dlogit[k] = p[k] * inv_n;
        dlogit[static_cast<std::size_t>(batch.labels[s])] -= inv_n;

        const double* za = &f.za[s * d.h];
        const double* zb = &f.zb[s * d.h];
        for (std::size_t k = 0; k < d.c; ++k) g_bh[k] += dlogit[k];
        for (std::size_t j = 0; j < d.h; ++j) {
            double ga = 0.0;
            double gb = 0.0;
            const double* wa = &wh[j * d.c];
            const double* wb = &wh[(d.h + j) * d.c];
            double* gwa = &g_wh[j * d.c];
            double* gwb = &g_wh[(d.h + j) * d.c];
            for (std::size_t k = 0; k < d.c; ++k) {
                gwa[k] += za[j] * dlogit[k];
                gwb[k] += zb[j] * dlogit[k];
                ga += wa[k] * dlogit[k];
                gb += wb[k] * dlogit[k];
            }
            dpre_a[j] = ga * (1.0 - za[j] * za[j]);
            dpre_b[j] = gb * (1.0 - zb[j] * zb[j]);
        }
        for (std::size_t j = 0; j < d.h; ++j) {
            g_ba[j] += dpre_a[j];
            g_bb[j] += dpre_b[j];
        }
        for (std::size_t i = 0; i < d.da; ++i) {
            const double x = batch.xa[s * d.da + i];
            if (x == 0.0) continue;
            double* gw = &g_wa[i * d.h];
            for (std::size_t j = 0; j < d.h; ++j) gw[j] += x * dpre_a[j];
        }
        for (std::size_t i = 0; i < d.db; ++i) {
            const double x = batch.xb[s * d.db + i];
            if (x == 0.0) continue;
            double* gw = &g_wb[i * d.h];
            for (std::size_t j = 0; j < d.h; ++j) gw[j] += x * dpre_b[j];
        }
    }
    return out;
}

} // namespace mmic
