#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "tnq/error.hpp"
#include "tnq/quantizer.hpp"
#include "tnq/rng.hpp"

namespace tnq {

enum class Scheme : std::uint8_t { tnq = 0, tuq = 1, nq = 2, uq = 3 };

inline const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::tnq: return "tnq";
        case Scheme::tuq: return "tuq";
        case Scheme::nq: return "nq";
        case Scheme::uq: return "uq";
    }
    return "?";
}

/// Compression settings: b bits per coordinate gives s = 2^b - 1 intervals
/// on [-threshold, threshold].
struct QuantConfig {
    Scheme scheme = Scheme::tnq;
    int bits = 3;
    int levels = 7;  // always 2^bits - 1
    double threshold = 0.0;

    static QuantConfig make(Scheme scheme, int bits, double threshold) {
        if (bits < 1 || bits > 8) throw InvalidArgument("bit budget must be in [1, 8]");
        if (!(threshold >= 0.0)) throw InvalidArgument("threshold must be nonnegative");
        return QuantConfig{scheme, bits, (1 << bits) - 1, threshold};
    }
};

/// One compressed vector: a 32-byte header plus ceil(d*b/8) payload bytes of
/// packed level indices. alpha == 0 marks a degenerate (all-zero) vector.
struct EncodedGradient {
    Scheme scheme = Scheme::tnq;
    int bits = 0;
    double alpha = 0.0;
    double gamma = 0.0;
    std::uint64_t dim = 0;
    std::vector<std::uint8_t> payload;

    int levels() const { return (1 << bits) - 1; }
    std::uint64_t payload_bytes() const { return (dim * bits + 7) / 8; }
    /// Wire cost in bits: fixed header plus b bits per coordinate.
    std::uint64_t wire_bits() const { return 256 + dim * bits; }
};

inline constexpr std::uint8_t kMagic[4] = {0x54, 0x4e, 0x51, 0x31};  // "TNQ1"
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 32;

/// Pack b-bit indices LSB-first into a little-endian byte stream.
inline std::vector<std::uint8_t> pack_indices(std::span<const int> indices, int bits) {
    std::vector<std::uint8_t> bytes((indices.size() * bits + 7) / 8, 0);
    std::size_t pos = 0;
    for (int idx : indices) {
        for (int b = 0; b < bits; ++b, ++pos)
            if (idx >> b & 1) bytes[pos >> 3] |= static_cast<std::uint8_t>(1u << (pos & 7));
    }
    return bytes;
}

inline std::vector<int> unpack_indices(std::span<const std::uint8_t> bytes, std::uint64_t dim,
                                       int bits) {
    if (bytes.size() < (dim * bits + 7) / 8)
        throw FormatError("payload too short for declared dimension");
    std::vector<int> indices(dim, 0);
    std::size_t pos = 0;
    for (std::uint64_t i = 0; i < dim; ++i) {
        int idx = 0;
        for (int b = 0; b < bits; ++b, ++pos)
            idx |= (bytes[pos >> 3] >> (pos & 7) & 1) << b;
        indices[i] = idx;
    }
    return indices;
}

namespace detail {

inline void put_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint64_t get_u64_le(std::span<const std::uint8_t> in) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
    return v;
}

inline std::uint64_t f64_bits(double x) {
    std::uint64_t v;
    std::memcpy(&v, &x, 8);
    return v;
}

inline double bits_f64(std::uint64_t v) {
    double x;
    std::memcpy(&x, &v, 8);
    return x;
}

}  // namespace detail

/// Truncate to the grid range, stochastically quantize each coordinate and
/// bit-pack the indices. `gamma` is carried in the header so the receiver
/// can rebuild the grid.
inline EncodedGradient encode(const GradientVector& g, const QuantConfig& config,
                              const QuantizationGrid& grid, CounterRng& rng,
                              double gamma = 0.0) {
    check_finite(g);
    if (grid.levels() != config.levels)
        throw InvalidArgument("encode: grid level count does not match config");
    std::vector<int> indices(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        indices[i] = stochastic_quantize(std::clamp(g[i], grid.lo(), grid.hi()), grid, rng);
    EncodedGradient enc;
    enc.scheme = config.scheme;
    enc.bits = config.bits;
    enc.alpha = grid.hi();
    enc.gamma = gamma;
    enc.dim = g.size();
    enc.payload = pack_indices(indices, config.bits);
    return enc;
}

/// Degenerate encoding of an all-zero vector (alpha == 0 marker). Costs the
/// same wire bits as a regular encoding so accounting stays uniform.
inline EncodedGradient encode_zero(Scheme scheme, int bits, std::uint64_t dim) {
    EncodedGradient enc;
    enc.scheme = scheme;
    enc.bits = bits;
    enc.alpha = 0.0;
    enc.gamma = 0.0;
    enc.dim = dim;
    enc.payload.assign((dim * bits + 7) / 8, 0);
    return enc;
}

/// Map packed indices back to grid points. Every output coordinate is a grid
/// point. alpha == 0 decodes to the all-zero vector without touching `grid`.
inline GradientVector decode(const EncodedGradient& e, const QuantizationGrid& grid) {
    if (e.dim == 0) throw FormatError("decode: empty gradient");
    if (e.alpha == 0.0) return GradientVector(e.dim, 0.0);
    if (e.payload.size() != e.payload_bytes())
        throw FormatError("decode: payload length mismatch");
    auto indices = unpack_indices(e.payload, e.dim, e.bits);
    GradientVector out(e.dim);
    for (std::uint64_t i = 0; i < e.dim; ++i) {
        if (indices[i] > grid.levels())
            throw FormatError("decode: corrupt index " + std::to_string(indices[i]));
        out[i] = grid.point(indices[i]);
    }
    return out;
}

/// Serialize header + payload. Layout (all little-endian): magic "TNQ1",
/// version, scheme tag, bits, reserved 0, alpha f64, gamma f64, dim u64.
inline std::vector<std::uint8_t> to_bytes(const EncodedGradient& e) {
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderBytes + e.payload.size());
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(kVersion);
    out.push_back(static_cast<std::uint8_t>(e.scheme));
    out.push_back(static_cast<std::uint8_t>(e.bits));
    out.push_back(0);
    detail::put_u64_le(out, detail::f64_bits(e.alpha));
    detail::put_u64_le(out, detail::f64_bits(e.gamma));
    detail::put_u64_le(out, e.dim);
    out.insert(out.end(), e.payload.begin(), e.payload.end());
    return out;
}

inline EncodedGradient from_bytes(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderBytes) throw FormatError("TNQ1 stream shorter than header");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad TNQ1 magic");
    if (bytes[4] != kVersion)
        throw FormatError("unsupported TNQ1 version " + std::to_string(bytes[4]));
    if (bytes[5] > 3) throw FormatError("unknown scheme tag " + std::to_string(bytes[5]));
    EncodedGradient e;
    e.scheme = static_cast<Scheme>(bytes[5]);
    e.bits = bytes[6];
    if (e.bits < 1 || e.bits > 8) throw FormatError("bit width out of range");
    e.alpha = detail::bits_f64(detail::get_u64_le(bytes.subspan(8)));
    e.gamma = detail::bits_f64(detail::get_u64_le(bytes.subspan(16)));
    e.dim = detail::get_u64_le(bytes.subspan(24));
    if (e.dim == 0) throw FormatError("TNQ1 header declares zero dimension");
    if (bytes.size() - kHeaderBytes != e.payload_bytes())
        throw FormatError("TNQ1 payload truncated or oversized");
    e.payload.assign(bytes.begin() + kHeaderBytes, bytes.end());
    return e;
}

}  // namespace tnq
