#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tnq/data.hpp"
#include "tnq/error.hpp"
#include "tnq/quantizer.hpp"
#include "tnq/rng.hpp"

namespace tnq {

enum class ModelKind { linear_regression, logistic_regression, mlp };

/// Parameters live as one flat vector per layer, a layer being one weight
/// matrix or one bias vector. Weight matrices are stored input-major:
/// W[j*out + c] connects input j to output c.
struct ModelSpec {
    ModelKind kind = ModelKind::linear_regression;
    int input_dim = 1;
    int classes = 0;  // 0 for regression
    int hidden = 0;   // mlp only

    static ModelSpec linreg(int input_dim) {
        if (input_dim < 1) throw InvalidArgument("model: input_dim must be >= 1");
        return ModelSpec{ModelKind::linear_regression, input_dim, 0, 0};
    }
    static ModelSpec logreg(int input_dim, int classes) {
        if (input_dim < 1 || classes < 2)
            throw InvalidArgument("model: logreg needs input_dim >= 1 and classes >= 2");
        return ModelSpec{ModelKind::logistic_regression, input_dim, classes, 0};
    }
    static ModelSpec make_mlp(int input_dim, int hidden, int classes) {
        if (input_dim < 1 || hidden < 1 || classes < 2)
            throw InvalidArgument("model: mlp needs positive dims and classes >= 2");
        return ModelSpec{ModelKind::mlp, input_dim, classes, hidden};
    }

    std::vector<std::size_t> layer_sizes() const {
        switch (kind) {
            case ModelKind::linear_regression: return {std::size_t(input_dim)};
            case ModelKind::logistic_regression:
                return {std::size_t(input_dim) * classes, std::size_t(classes)};
            case ModelKind::mlp:
                return {std::size_t(input_dim) * hidden, std::size_t(hidden),
                        std::size_t(hidden) * classes, std::size_t(classes)};
        }
        throw InvalidArgument("model: unknown kind");
    }

    std::size_t param_count() const {
        std::size_t total = 0;
        for (auto s : layer_sizes()) total += s;
        return total;
    }
};

using Params = std::vector<GradientVector>;

/// Zero-initialized convex models; Glorot-uniform hidden weights for the MLP
/// (zero weights would never break symmetry).
inline Params init_params(const ModelSpec& spec, CounterRng rng) {
    Params p;
    for (auto s : spec.layer_sizes()) p.emplace_back(s, 0.0);
    if (spec.kind == ModelKind::mlp) {
        auto glorot = [&](GradientVector& w, int fan_in, int fan_out) {
            double bound = std::sqrt(6.0 / (fan_in + fan_out));
            for (auto& v : w) v = (2.0 * rng.uniform() - 1.0) * bound;
        };
        glorot(p[0], spec.input_dim, spec.hidden);
        glorot(p[2], spec.hidden, spec.classes);
    }
    return p;
}

namespace detail {

/// Numerically stable softmax cross-entropy: returns the loss and leaves
/// probabilities in `z`.
inline double softmax_xent(std::vector<double>& z, int label) {
    double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (auto& v : z) v /= sum;
    return -std::log(std::max(z[std::size_t(label)], 1e-300));
}

}  // namespace detail

/// Mean loss over the index set; when `grads` is non-null it receives the
/// mean analytic gradient, shaped like the parameters.
inline double model_loss_grad(const ModelSpec& spec, const Params& params, const Dataset& ds,
                              std::span<const std::size_t> idx, Params* grads) {
    if (idx.empty()) throw InvalidArgument("model: empty sample batch");
    if (ds.dim != std::size_t(spec.input_dim))
        throw InvalidArgument("model: dataset dimension mismatch");
    if (spec.kind != ModelKind::linear_regression && ds.num_classes > spec.classes)
        throw InvalidArgument("model: dataset has more classes than the model");
    if (params.size() != spec.layer_sizes().size())
        throw InvalidArgument("model: parameter layer count mismatch");
    if (grads) {
        grads->resize(params.size());
        for (std::size_t l = 0; l < params.size(); ++l) (*grads)[l].assign(params[l].size(), 0.0);
    }
    const double inv_b = 1.0 / static_cast<double>(idx.size());
    double loss = 0.0;

    switch (spec.kind) {
        case ModelKind::linear_regression: {
            const auto& w = params[0];
            for (std::size_t i : idx) {
                auto x = ds.row(i);
                double pred = 0.0;
                for (std::size_t j = 0; j < x.size(); ++j) pred += w[j] * x[j];
                double e = pred - ds.labels[i];
                loss += 0.5 * e * e;
                if (grads) {
                    auto& gw = (*grads)[0];
                    double c = e * inv_b;
                    for (std::size_t j = 0; j < x.size(); ++j) gw[j] += c * x[j];
                }
            }
            break;
        }
        case ModelKind::logistic_regression: {
            const auto& w = params[0];
            const auto& b = params[1];
            const int c_n = spec.classes;
            std::vector<double> z(c_n);
            for (std::size_t i : idx) {
                auto x = ds.row(i);
                std::copy(b.begin(), b.end(), z.begin());
                for (std::size_t j = 0; j < x.size(); ++j) {
                    double xj = x[j];
                    if (xj == 0.0) continue;
                    const double* wj = w.data() + j * c_n;
                    for (int c = 0; c < c_n; ++c) z[c] += xj * wj[c];
                }
                int label = static_cast<int>(ds.labels[i]);
                loss += detail::softmax_xent(z, label);
                if (grads) {
                    z[std::size_t(label)] -= 1.0;  // z now holds dL/dlogits
                    auto& gw = (*grads)[0];
                    auto& gb = (*grads)[1];
                    for (int c = 0; c < c_n; ++c) gb[c] += z[c] * inv_b;
                    for (std::size_t j = 0; j < x.size(); ++j) {
                        double xj = x[j] * inv_b;
                        if (xj == 0.0) continue;
                        double* gwj = gw.data() + j * c_n;
                        for (int c = 0; c < c_n; ++c) gwj[c] += xj * z[c];
                    }
                }
            }
            break;
        }
        case ModelKind::mlp: {
            const auto& w1 = params[0];
            const auto& b1 = params[1];
            const auto& w2 = params[2];
            const auto& b2 = params[3];
            const int h_n = spec.hidden;
            const int c_n = spec.classes;
            std::vector<double> h(h_n), z(c_n), dh(h_n);
            for (std::size_t i : idx) {
                auto x = ds.row(i);
                std::copy(b1.begin(), b1.end(), h.begin());
                for (std::size_t j = 0; j < x.size(); ++j) {
                    double xj = x[j];
                    if (xj == 0.0) continue;
                    const double* w1j = w1.data() + j * h_n;
                    for (int k = 0; k < h_n; ++k) h[k] += xj * w1j[k];
                }
                for (auto& v : h) v = std::max(v, 0.0);  // relu
                std::copy(b2.begin(), b2.end(), z.begin());
                for (int k = 0; k < h_n; ++k) {
                    double hk = h[k];
                    if (hk == 0.0) continue;
                    const double* w2k = w2.data() + k * c_n;
                    for (int c = 0; c < c_n; ++c) z[c] += hk * w2k[c];
                }
                int label = static_cast<int>(ds.labels[i]);
                loss += detail::softmax_xent(z, label);
                if (grads) {
                    z[std::size_t(label)] -= 1.0;
                    auto& gw1 = (*grads)[0];
                    auto& gb1 = (*grads)[1];
                    auto& gw2 = (*grads)[2];
                    auto& gb2 = (*grads)[3];
                    for (int c = 0; c < c_n; ++c) gb2[c] += z[c] * inv_b;
                    for (int k = 0; k < h_n; ++k) {
                        const double* w2k = w2.data() + k * c_n;
                        double* gw2k = gw2.data() + k * c_n;
                        double acc = 0.0;
                        double hk = h[k] * inv_b;
                        for (int c = 0; c < c_n; ++c) {
                            gw2k[c] += hk * z[c];
                            acc += w2k[c] * z[c];
                        }
                        dh[k] = h[k] > 0.0 ? acc : 0.0;  // relu subgradient
                    }
                    for (int k = 0; k < h_n; ++k) gb1[k] += dh[k] * inv_b;
                    for (std::size_t j = 0; j < x.size(); ++j) {
                        double xj = x[j] * inv_b;
                        if (xj == 0.0) continue;
                        double* gw1j = gw1.data() + j * h_n;
                        for (int k = 0; k < h_n; ++k) gw1j[k] += xj * dh[k];
                    }
                }
            }
            break;
        }
    }
    return loss * inv_b;
}

/// Mean loss over the whole dataset.
inline double dataset_loss(const ModelSpec& spec, const Params& params, const Dataset& ds) {
    std::vector<std::size_t> all(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i) all[i] = i;
    return model_loss_grad(spec, params, ds, all, nullptr);
}

/// Classification accuracy (argmax of the logits); 0 for regression models,
/// where accuracy has no meaning.
inline double accuracy(const ModelSpec& spec, const Params& params, const Dataset& ds) {
    if (spec.kind == ModelKind::linear_regression || ds.n == 0) return 0.0;
    const int c_n = spec.classes;
    const int h_n = spec.hidden;
    std::vector<double> z(c_n), h(std::max(h_n, 1));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ds.n; ++i) {
        auto x = ds.row(i);
        if (spec.kind == ModelKind::logistic_regression) {
            std::copy(params[1].begin(), params[1].end(), z.begin());
            for (std::size_t j = 0; j < x.size(); ++j) {
                double xj = x[j];
                if (xj == 0.0) continue;
                const double* wj = params[0].data() + j * c_n;
                for (int c = 0; c < c_n; ++c) z[c] += xj * wj[c];
            }
        } else {
            std::copy(params[1].begin(), params[1].end(), h.begin());
            for (std::size_t j = 0; j < x.size(); ++j) {
                double xj = x[j];
                if (xj == 0.0) continue;
                const double* w1j = params[0].data() + j * h_n;
                for (int k = 0; k < h_n; ++k) h[k] += xj * w1j[k];
            }
            for (int k = 0; k < h_n; ++k) h[k] = std::max(h[k], 0.0);
            std::copy(params[3].begin(), params[3].end(), z.begin());
            for (int k = 0; k < h_n; ++k) {
                double hk = h[k];
                if (hk == 0.0) continue;
                const double* w2k = params[2].data() + k * c_n;
                for (int c = 0; c < c_n; ++c) z[c] += hk * w2k[c];
            }
        }
        int best = 0;
        for (int c = 1; c < c_n; ++c)
            if (z[c] > z[best]) best = c;
        if (best == static_cast<int>(ds.labels[i])) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(ds.n);
}

inline double grad_sq_norm(const Params& grads) {
    double total = 0.0;
    for (const auto& layer : grads)
        for (double v : layer) total += v * v;
    return total;
}

}  // namespace tnq
