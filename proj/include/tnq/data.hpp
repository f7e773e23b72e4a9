#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tnq/error.hpp"
#include "tnq/laplace.hpp"
#include "tnq/linalg.hpp"
#include "tnq/rng.hpp"

namespace tnq {

/// In-memory dataset: row-major features, one label per row. num_classes 0
/// marks a regression task (labels are real targets), otherwise labels are
/// class ids in [0, num_classes).
struct Dataset {
    std::size_t n = 0;
    std::size_t dim = 0;
    std::vector<double> features;
    std::vector<double> labels;
    int num_classes = 0;
    std::string name;

    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(features).subspan(i * dim, dim);
    }
    bool empty() const { return n == 0; }
};

/// Raw IDX payload (u8 pixels) before scaling, so files can be written and
/// re-read bit-exactly.
struct RawIdx {
    std::uint32_t n = 0;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<std::uint8_t> pixels;  // n * rows * cols
    std::vector<std::uint8_t> labels;  // n
};

namespace detail {

inline std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
    std::uint8_t b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw FormatError(path + ": truncated IDX header");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline void write_u32_be(std::ostream& out, std::uint32_t v) {
    std::uint8_t b[4] = {std::uint8_t(v >> 24), std::uint8_t(v >> 16), std::uint8_t(v >> 8),
                         std::uint8_t(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

/// Parse an IDX image/label file pair (big-endian headers, u8 data). Pixels
/// are scaled to [0,1] by division with 255; labels define num_classes as
/// max label + 1.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw FormatError(images_path + ": cannot open");
    if (detail::read_u32_be(img, images_path) != 0x00000803u)
        throw FormatError(images_path + ": bad IDX image magic");
    std::uint32_t n = detail::read_u32_be(img, images_path);
    std::uint32_t rows = detail::read_u32_be(img, images_path);
    std::uint32_t cols = detail::read_u32_be(img, images_path);
    if (n == 0 || rows == 0 || cols == 0)
        throw FormatError(images_path + ": empty IDX image file");
    std::size_t dim = std::size_t(rows) * cols;
    std::vector<std::uint8_t> pixels(std::size_t(n) * dim);
    if (!img.read(reinterpret_cast<char*>(pixels.data()),
                  static_cast<std::streamsize>(pixels.size())))
        throw FormatError(images_path + ": truncated IDX pixel data");

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw FormatError(labels_path + ": cannot open");
    if (detail::read_u32_be(lab, labels_path) != 0x00000801u)
        throw FormatError(labels_path + ": bad IDX label magic");
    std::uint32_t ln = detail::read_u32_be(lab, labels_path);
    if (ln != n)
        throw FormatError(labels_path + ": label count " + std::to_string(ln) +
                          " does not match image count " + std::to_string(n));
    std::vector<std::uint8_t> labels(n);
    if (!lab.read(reinterpret_cast<char*>(labels.data()), n))
        throw FormatError(labels_path + ": truncated IDX label data");

    Dataset ds;
    ds.n = n;
    ds.dim = dim;
    ds.features.resize(pixels.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) ds.features[i] = pixels[i] / 255.0;
    ds.labels.resize(n);
    int max_label = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        ds.labels[i] = labels[i];
        max_label = std::max(max_label, int(labels[i]));
    }
    ds.num_classes = max_label + 1;
    ds.name = images_path;
    return ds;
}

/// Write a RawIdx to an IDX image/label file pair (inverse of load_idx).
inline void write_idx(const RawIdx& raw, const std::string& images_path,
                      const std::string& labels_path) {
    if (raw.pixels.size() != std::size_t(raw.n) * raw.rows * raw.cols ||
        raw.labels.size() != raw.n)
        throw InvalidArgument("write_idx: inconsistent RawIdx shape");
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw FormatError(images_path + ": cannot open for writing");
    detail::write_u32_be(img, 0x00000803u);
    detail::write_u32_be(img, raw.n);
    detail::write_u32_be(img, raw.rows);
    detail::write_u32_be(img, raw.cols);
    img.write(reinterpret_cast<const char*>(raw.pixels.data()),
              static_cast<std::streamsize>(raw.pixels.size()));
    if (!img) throw FormatError(images_path + ": write failed");

    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw FormatError(labels_path + ": cannot open for writing");
    detail::write_u32_be(lab, 0x00000801u);
    detail::write_u32_be(lab, raw.n);
    lab.write(reinterpret_cast<const char*>(raw.labels.data()),
              static_cast<std::streamsize>(raw.labels.size()));
    if (!lab) throw FormatError(labels_path + ": write failed");
}

/// Least-squares task with Laplace residuals: features are i.i.d. unit-scale
/// Laplace, targets y_i are pure Laplace(gamma) noise around the zero
/// parameter vector. The per-sample gradient at theta_0 = 0 is -y_i x_i, so
/// its coordinates have mean absolute value gamma, and conditioned on the
/// sample the coordinate profile across the vector is exactly Laplace. A
/// batch-of-one client therefore hands the quantizer a fresh Laplace-shaped
/// vector every round; averaged batches would erase that shape, since sums
/// of independent coordinates turn Gaussian while the tail positions freeze.
/// Ships the exact finite-sample minimizer, its loss, and the smoothness
/// constant of the mean squared loss.
struct SynthTask {
    Dataset train;
    Dataset test;
    std::vector<double> minimizer;   // argmin of the training loss
    double min_loss = 0.0;           // training loss at the minimizer
    double smoothness = 0.0;         // lambda_max(X^T X / n)
};

inline SynthTask synth_laplace_task(std::size_t d, std::size_t n, double gamma, CounterRng& rng,
                                    std::size_t test_n = 0) {
    if (d < 1 || n < 1) throw InvalidArgument("synth_laplace_task: d and n must be >= 1");
    LaplaceModel model(gamma);
    LaplaceModel feature_model(1.0);
    auto fill = [&](Dataset& ds, std::size_t rows) {
        ds.n = rows;
        ds.dim = d;
        ds.num_classes = 0;
        ds.features.resize(rows * d);
        ds.labels.resize(rows);
        for (auto& f : ds.features) f = laplace_sample(feature_model, rng);
        for (auto& y : ds.labels) y = laplace_sample(model, rng);
    };
    SynthTask task;
    fill(task.train, n);
    task.train.name = "synth_laplace";
    if (test_n > 0) {
        fill(task.test, test_n);
        task.test.name = "synth_laplace_test";
    }

    // Normal equations on the training set: (X^T X) theta = X^T y.
    std::vector<double> gram = gram_matrix(task.train.features, n, d);
    std::vector<double> xty(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = task.train.row(i);
        for (std::size_t j = 0; j < d; ++j) xty[j] += row[j] * task.train.labels[i];
    }
    task.minimizer = cholesky_solve(gram, xty);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto row = task.train.row(i);
        double pred = 0.0;
        for (std::size_t j = 0; j < d; ++j) pred += row[j] * task.minimizer[j];
        double e = pred - task.train.labels[i];
        loss += 0.5 * e * e;
    }
    task.min_loss = loss / static_cast<double>(n);
    for (auto& v : gram) v /= static_cast<double>(n);
    task.smoothness = power_lambda_max(gram, d);
    return task;
}

/// Synthetic 28x28 digit-like classification images: ten fixed two-blob
/// prototypes jittered by shift, intensity and pixel noise. Used when real
/// MNIST IDX files are not available; exercises the same pipeline.
inline RawIdx synth_digits(std::uint32_t n, CounterRng& rng) {
    if (n == 0) throw InvalidArgument("synth_digits: n must be >= 1");
    constexpr int kSide = 28;
    std::vector<std::array<double, kSide * kSide>> protos(10);
    for (int c = 0; c < 10; ++c) {
        double r1 = 7 + (3 * c) % 14, c1 = 5 + (5 * c) % 18;
        double r2 = 21 - (2 * c) % 12, c2 = 23 - (4 * c) % 16;
        for (int r = 0; r < kSide; ++r)
            for (int col = 0; col < kSide; ++col) {
                double d1 = (r - r1) * (r - r1) + (col - c1) * (col - c1);
                double d2 = (r - r2) * (r - r2) + (col - c2) * (col - c2);
                double v = 200.0 * std::exp(-d1 / 18.0) + 180.0 * std::exp(-d2 / 30.0);
                protos[c][r * kSide + col] = std::min(v, 255.0);
            }
    }
    RawIdx raw;
    raw.n = n;
    raw.rows = kSide;
    raw.cols = kSide;
    raw.pixels.resize(std::size_t(n) * kSide * kSide);
    raw.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        int c = int(i % 10);
        raw.labels[i] = std::uint8_t(c);
        int dx = int(rng.uniform_index(5)) - 2;
        int dy = int(rng.uniform_index(5)) - 2;
        double intensity = 0.7 + 0.3 * rng.uniform();
        std::uint8_t* out = raw.pixels.data() + std::size_t(i) * kSide * kSide;
        for (int r = 0; r < kSide; ++r)
            for (int col = 0; col < kSide; ++col) {
                int sr = r - dy, sc = col - dx;
                double v = (sr >= 0 && sr < kSide && sc >= 0 && sc < kSide)
                               ? protos[c][sr * kSide + sc]
                               : 0.0;
                v = v * intensity + (rng.uniform() - 0.5) * 40.0;
                out[r * kSide + col] = std::uint8_t(std::clamp(v, 0.0, 255.0));
            }
    }
    return raw;
}

inline Dataset to_dataset(const RawIdx& raw, const std::string& name) {
    Dataset ds;
    ds.n = raw.n;
    ds.dim = std::size_t(raw.rows) * raw.cols;
    ds.features.resize(raw.pixels.size());
    for (std::size_t i = 0; i < raw.pixels.size(); ++i) ds.features[i] = raw.pixels[i] / 255.0;
    ds.labels.assign(raw.labels.begin(), raw.labels.end());
    int max_label = 0;
    for (auto l : raw.labels) max_label = std::max(max_label, int(l));
    ds.num_classes = max_label + 1;
    ds.name = name;
    return ds;
}

enum class PartitionMode { iid_equal, iid_sized };

/// Disjoint client shards covering 0..n-1.
struct Partition {
    std::vector<std::vector<std::size_t>> shards;

    std::vector<double> weights() const {
        std::size_t total = 0;
        for (const auto& s : shards) total += s.size();
        std::vector<double> w(shards.size());
        for (std::size_t i = 0; i < shards.size(); ++i)
            w[i] = static_cast<double>(shards[i].size()) / static_cast<double>(total);
        return w;
    }
};

/// Random disjoint shards. iid_equal sizes differ by at most one; iid_sized
/// follows `sizing` by the largest-remainder rule. Every shard is nonempty.
inline Partition partition(std::size_t n, int clients, PartitionMode mode, CounterRng& rng,
                           std::span<const double> sizing = {}) {
    if (clients < 1) throw InvalidArgument("partition: need at least one client");
    if (std::size_t(clients) > n)
        throw InvalidArgument("partition: more clients than samples");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_index(i)]);

    std::vector<std::size_t> sizes(clients);
    if (mode == PartitionMode::iid_equal) {
        for (int i = 0; i < clients; ++i)
            sizes[i] = n / clients + (std::size_t(i) < n % clients ? 1 : 0);
    } else {
        if (sizing.size() != std::size_t(clients))
            throw InvalidArgument("partition: sizing weights must match client count");
        double total = 0.0;
        for (double w : sizing) {
            if (!(w > 0.0)) throw InvalidArgument("partition: sizing weights must be positive");
            total += w;
        }
        std::vector<std::pair<double, int>> frac(clients);
        std::size_t assigned = 0;
        for (int i = 0; i < clients; ++i) {
            double target = n * sizing[i] / total;
            sizes[i] = static_cast<std::size_t>(target);
            assigned += sizes[i];
            frac[i] = {target - static_cast<double>(sizes[i]), i};
        }
        std::stable_sort(frac.begin(), frac.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::size_t r = 0; r < n - assigned; ++r) ++sizes[frac[r % clients].second];
        // largest-remainder can starve a tiny weight; shards must be nonempty
        for (int i = 0; i < clients; ++i)
            while (sizes[i] == 0) {
                auto big = std::max_element(sizes.begin(), sizes.end());
                --*big;
                ++sizes[i];
            }
    }
    Partition p;
    p.shards.resize(clients);
    std::size_t pos = 0;
    for (int i = 0; i < clients; ++i) {
        p.shards[i].assign(order.begin() + pos, order.begin() + pos + sizes[i]);
        pos += sizes[i];
    }
    return p;
}

}  // namespace tnq
