#pragma once

#include <algorithm>
#include <cmath>

#include "tnq/codec.hpp"
#include "tnq/error.hpp"
#include "tnq/laplace.hpp"
#include "tnq/quantizer.hpp"
#include "tnq/rng.hpp"

namespace tnq {

/// Truncation threshold for a scheme. The truncating schemes derive it from
/// the Laplace scale; NQ/UQ do not truncate, so their range is the data's
/// max magnitude.
inline double scheme_alpha(Scheme scheme, int levels, double gamma, double max_abs) {
    switch (scheme) {
        case Scheme::tnq: return optimal_alpha_tnq(levels, LaplaceModel(gamma));
        case Scheme::tuq: return optimal_alpha_tuq(levels, LaplaceModel(gamma));
        case Scheme::nq:
        case Scheme::uq: return max_abs;
    }
    throw InvalidArgument("unknown scheme");
}

/// Grid for (scheme, alpha, gamma): non-uniform schemes use the cube-root
/// (Laplace-optimal) density, uniform schemes equispaced points. Client and
/// server both call this with the header's (alpha, gamma), so the grids they
/// see are identical.
inline QuantizationGrid scheme_grid(Scheme scheme, int levels, double alpha, double gamma) {
    switch (scheme) {
        case Scheme::tnq:
        case Scheme::nq:
            return build_grid(optimal_density_tnq(levels, LaplaceModel(gamma), alpha), alpha,
                              levels);
        case Scheme::tuq:
        case Scheme::uq: return QuantizationGrid::uniform(alpha, levels);
    }
    throw InvalidArgument("unknown scheme");
}

/// Full client-side compression of one vector: estimate gamma, derive the
/// scheme threshold and grid, truncate and encode. All-zero vectors take the
/// degenerate alpha == 0 path.
inline EncodedGradient compress(const GradientVector& g, Scheme scheme, int bits,
                                CounterRng& rng) {
    check_finite(g);
    QuantConfig config = QuantConfig::make(scheme, bits, 0.0);
    double sum_abs = 0.0;
    double max_abs = 0.0;
    for (double v : g) {
        sum_abs += std::abs(v);
        max_abs = std::max(max_abs, std::abs(v));
    }
    if (sum_abs == 0.0) return encode_zero(scheme, bits, g.size());
    double gamma = sum_abs / static_cast<double>(g.size());
    double alpha = scheme_alpha(scheme, config.levels, gamma, max_abs);
    config.threshold = alpha;
    QuantizationGrid grid = scheme_grid(scheme, config.levels, alpha, gamma);
    return encode(g, config, grid, rng, gamma);
}

/// Server-side decompression driven entirely by the header.
inline GradientVector decompress(const EncodedGradient& e) {
    if (e.dim == 0) throw FormatError("decompress: empty gradient");
    if (e.alpha == 0.0) return GradientVector(e.dim, 0.0);
    QuantizationGrid grid = scheme_grid(e.scheme, e.levels(), e.alpha, e.gamma);
    return decode(e, grid);
}

}  // namespace tnq
