#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tnq/codec.hpp"
#include "tnq/data.hpp"
#include "tnq/error.hpp"
#include "tnq/model.hpp"
#include "tnq/rng.hpp"
#include "tnq/schemes.hpp"

namespace tnq {

/// One simulated training experiment. scheme == nullopt runs the
/// uncompressed baseline (raw float32 gradients, 32 bits per coordinate).
struct TrainConfig {
    int clients = 4;
    int batch = 32;  // 0 = full client shard every round
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    int rounds = 100;
    std::optional<Scheme> scheme = Scheme::tnq;
    int bits = 3;
    std::vector<double> weights;  // empty = proportional to shard sizes
    std::uint64_t seed = 1;
    int eval_every = 1;  // metric cadence; the final round is always evaluated
};

struct RoundRow {
    int round;
    double loss;
    double grad_sq_norm;
    double test_acc;
    std::uint64_t bits_round;
    std::uint64_t bits_cum;
};

struct GammaRow {
    int round;
    int client;
    int layer;
    double gamma;
};

struct RunMetrics {
    std::vector<RoundRow> rows;
    std::vector<GammaRow> gammas;
    double final_loss = 0.0;
    double final_test_acc = 0.0;
    std::uint64_t total_bits = 0;
    Params final_params;
};

namespace detail {
// Stream labels that cannot collide with client indices.
inline constexpr std::uint64_t kInitStream = 0xFFFFFFFFull;
inline constexpr std::uint64_t kPartitionStream = 0xFFFFFFFEull;
}  // namespace detail

/// Mean gradient over one client's batch: `batch` samples drawn from the
/// shard with replacement, or the whole shard when batch == 0.
inline Params client_gradient(const ModelSpec& spec, const Params& params, const Dataset& ds,
                              std::span<const std::size_t> shard, int batch, CounterRng& rng) {
    if (shard.empty()) throw InvalidArgument("client_gradient: empty shard");
    Params grads;
    if (batch == 0) {
        model_loss_grad(spec, params, ds, shard, &grads);
        return grads;
    }
    std::vector<std::size_t> idx(static_cast<std::size_t>(batch));
    for (auto& i : idx) i = shard[rng.uniform_index(shard.size())];
    model_loss_grad(spec, params, ds, idx, &grads);
    return grads;
}

/// Compress each layer independently with its own estimated scale.
inline std::vector<EncodedGradient> compress_per_layer(const Params& grads, Scheme scheme,
                                                       int bits, CounterRng& rng) {
    std::vector<EncodedGradient> out;
    out.reserve(grads.size());
    for (const auto& layer : grads) out.push_back(compress(layer, scheme, bits, rng));
    return out;
}

/// Decode every client's layers (rebuilding grids from the headers, exactly
/// as a receiving server would) and form the weighted sum.
inline Params aggregate(const std::vector<std::vector<EncodedGradient>>& clients,
                        std::span<const double> weights) {
    if (clients.empty()) throw ProtocolError("aggregate: no client messages");
    if (weights.size() != clients.size())
        throw ProtocolError("aggregate: weight count does not match client count");
    std::size_t layers = clients[0].size();
    Params sum(layers);
    for (std::size_t l = 0; l < layers; ++l) sum[l].assign(clients[0][l].dim, 0.0);
    for (std::size_t c = 0; c < clients.size(); ++c) {
        if (clients[c].size() != layers)
            throw ProtocolError("aggregate: layer count mismatch at client " + std::to_string(c));
        for (std::size_t l = 0; l < layers; ++l) {
            const auto& e = clients[c][l];
            if (e.dim != sum[l].size() || e.bits != clients[0][l].bits ||
                e.scheme != clients[0][l].scheme)
                throw ProtocolError("aggregate: shape mismatch at client " + std::to_string(c) +
                                    " layer " + std::to_string(l));
            GradientVector decoded = decompress(e);
            for (std::size_t i = 0; i < decoded.size(); ++i) sum[l][i] += weights[c] * decoded[i];
        }
    }
    return sum;
}

/// Momentum SGD with weight decay: buf <- m*buf + (g + wd*theta);
/// theta <- theta - lr*buf. With m = wd = 0 this is plain SGD.
inline void server_update(Params& params, Params& buffers, const Params& agg, double lr,
                          double momentum, double weight_decay) {
    if (params.size() != agg.size() || buffers.size() != agg.size())
        throw ProtocolError("server_update: layer count mismatch");
    for (std::size_t l = 0; l < params.size(); ++l) {
        if (params[l].size() != agg[l].size())
            throw ProtocolError("server_update: layer size mismatch");
        for (std::size_t i = 0; i < params[l].size(); ++i) {
            buffers[l][i] = momentum * buffers[l][i] + (agg[l][i] + weight_decay * params[l][i]);
            params[l][i] -= lr * buffers[l][i];
        }
    }
}

/// T rounds of download -> client gradients -> compress -> aggregate ->
/// update. Deterministic given the seed: every random choice comes from a
/// counter stream keyed by (seed, client, round), so neither client order
/// nor threading could change the trajectory. `iterate_hook`, when set, sees
/// the parameters entering every round.
inline RunMetrics run(const TrainConfig& cfg, const ModelSpec& spec, const Dataset& train,
                      const Dataset& test = {},
                      const std::function<void(int, const Params&)>& iterate_hook = {}) {
    if (cfg.clients < 1) throw InvalidArgument("run: need at least one client");
    if (cfg.rounds < 1) throw InvalidArgument("run: need at least one round");
    if (cfg.batch < 0) throw InvalidArgument("run: batch must be >= 0");
    if (!(cfg.lr > 0.0)) throw InvalidArgument("run: learning rate must be positive");
    if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
        throw InvalidArgument("run: momentum must be in [0, 1)");
    if (cfg.weight_decay < 0.0) throw InvalidArgument("run: weight decay must be >= 0");
    if (cfg.eval_every < 1) throw InvalidArgument("run: eval_every must be >= 1");
    if (cfg.scheme && (cfg.bits < 1 || cfg.bits > 8))
        throw InvalidArgument("run: bit budget must be in [1, 8]");
    if (train.empty()) throw InvalidArgument("run: empty training set");

    CounterRng part_rng = CounterRng(cfg.seed).split(detail::kPartitionStream);
    Partition part =
        cfg.weights.empty()
            ? partition(train.n, cfg.clients, PartitionMode::iid_equal, part_rng)
            : partition(train.n, cfg.clients, PartitionMode::iid_sized, part_rng, cfg.weights);
    std::vector<double> w = part.weights();
    if (!cfg.weights.empty()) {
        double total = 0.0;
        for (double v : cfg.weights) total += v;
        if (std::abs(total - 1.0) > 1e-12)
            throw InvalidArgument("run: client weights must sum to 1");
        w = cfg.weights;
    }

    Params params = init_params(spec, CounterRng(cfg.seed).split(detail::kInitStream));
    Params buffers;
    for (const auto& layer : params) buffers.emplace_back(layer.size(), 0.0);

    RunMetrics metrics;
    std::vector<std::size_t> all(train.n);
    for (std::size_t i = 0; i < train.n; ++i) all[i] = i;
    auto evaluate = [&](int round, std::uint64_t bits_round, std::uint64_t bits_cum) {
        Params full_grad;
        double loss = model_loss_grad(spec, params, train, all, &full_grad);
        if (!std::isfinite(loss) || loss > 1e6)
            throw NumericalError("run: training diverged at round " + std::to_string(round) +
                                 " (loss " + std::to_string(loss) + ")");
        double acc = test.empty() ? 0.0 : accuracy(spec, params, test);
        metrics.rows.push_back(
            {round, loss, grad_sq_norm(full_grad), acc, bits_round, bits_cum});
    };

    evaluate(0, 0, 0);
    std::uint64_t bits_cum = 0;
    std::vector<std::vector<EncodedGradient>> encoded(cfg.clients);
    for (int t = 1; t <= cfg.rounds; ++t) {
        if (iterate_hook) iterate_hook(t - 1, params);
        std::uint64_t bits_round = 0;
        Params agg;
        for (const auto& layer : params) agg.emplace_back(layer.size(), 0.0);
        for (int c = 0; c < cfg.clients; ++c) {
            CounterRng base = CounterRng::for_round(cfg.seed, std::uint64_t(c), std::uint64_t(t));
            CounterRng batch_rng = base.split(0);
            CounterRng quant_rng = base.split(1);
            Params grads =
                client_gradient(spec, params, train, part.shards[c], cfg.batch, batch_rng);
            for (const auto& layer : grads)
                for (double v : layer)
                    if (!std::isfinite(v))
                        throw NumericalError("run: gradient diverged at round " +
                                             std::to_string(t));
            if (cfg.scheme) {
                encoded[c] = compress_per_layer(grads, *cfg.scheme, cfg.bits, quant_rng);
                for (std::size_t l = 0; l < encoded[c].size(); ++l) {
                    metrics.gammas.push_back({t, c, int(l), encoded[c][l].gamma});
                    bits_round += encoded[c][l].wire_bits();
                }
            } else {
                for (std::size_t l = 0; l < grads.size(); ++l) {
                    for (std::size_t i = 0; i < grads[l].size(); ++i)
                        agg[l][i] += w[c] * grads[l][i];
                    bits_round += 32 * grads[l].size();
                }
            }
        }
        if (cfg.scheme) agg = aggregate(encoded, w);
        server_update(params, buffers, agg, cfg.lr, cfg.momentum, cfg.weight_decay);
        bits_cum += bits_round;
        if (t % cfg.eval_every == 0 || t == cfg.rounds) evaluate(t, bits_round, bits_cum);
    }
    metrics.final_loss = metrics.rows.back().loss;
    metrics.final_test_acc = metrics.rows.back().test_acc;
    metrics.total_bits = bits_cum;
    metrics.final_params = std::move(params);
    return metrics;
}

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace detail

inline std::string metrics_csv(const RunMetrics& m) {
    std::string out = "round,loss,grad_sq_norm,test_acc,bits_round,bits_cum\n";
    for (const auto& r : m.rows) {
        out += std::to_string(r.round) + ',' + detail::fmt_double(r.loss) + ',' +
               detail::fmt_double(r.grad_sq_norm) + ',' + detail::fmt_double(r.test_acc) + ',' +
               std::to_string(r.bits_round) + ',' + std::to_string(r.bits_cum) + '\n';
    }
    return out;
}

inline std::string gamma_csv(const RunMetrics& m) {
    std::string out = "round,client,layer,gamma\n";
    for (const auto& g : m.gammas) {
        out += std::to_string(g.round) + ',' + std::to_string(g.client) + ',' +
               std::to_string(g.layer) + ',' + detail::fmt_double(g.gamma) + '\n';
    }
    return out;
}

}  // namespace tnq
