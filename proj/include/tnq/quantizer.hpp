#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tnq/error.hpp"
#include "tnq/numeric.hpp"
#include "tnq/rng.hpp"

namespace tnq {

using GradientVector = std::vector<double>;

inline void check_finite(std::span<const double> values) {
    if (values.empty()) throw InvalidArgument("gradient vector must not be empty");
    for (double v : values)
        if (!std::isfinite(v)) throw InvalidArgument("gradient vector contains a non-finite value");
}

/// Clip a single value to [-alpha, alpha].
inline double truncate(double g, double alpha) {
    return std::clamp(g, -alpha, alpha);
}

/// Clip every coordinate to [-alpha, alpha]. Rejects non-finite input.
inline GradientVector truncate(const GradientVector& g, double alpha) {
    if (!(alpha > 0.0)) throw InvalidArgument("truncation threshold must be positive");
    check_finite(g);
    GradientVector out(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = truncate(g[i], alpha);
    return out;
}

/// Quantization-point density on [-alpha, alpha]. `lambda` is the pointwise
/// density (reciprocal of the local step size); it must integrate to the
/// level count over the range. `cumulative` is an optional closed form for
/// x -> integral of lambda over [-alpha, x]; grid construction falls back to
/// quadrature when it is absent.
struct DensityFunction {
    std::function<double(double)> lambda;
    std::function<double(double)> cumulative;
};

/// Sorted quantization points l_0 < ... < l_s.
class QuantizationGrid {
  public:
    explicit QuantizationGrid(std::vector<double> points) : points_(std::move(points)) {
        if (points_.size() < 2) throw InvalidArgument("grid needs at least two points");
        for (std::size_t i = 1; i < points_.size(); ++i)
            if (!(points_[i] > points_[i - 1]))
                throw InvalidArgument("grid points must be strictly increasing");
    }

    /// Equispaced points on [-alpha, alpha], symmetric by construction.
    static QuantizationGrid uniform(double alpha, int levels) {
        if (!(alpha > 0.0)) throw InvalidArgument("grid range must be positive");
        if (levels < 1) throw InvalidArgument("level count must be >= 1");
        std::vector<double> pts(levels + 1);
        for (int k = 0; k <= levels / 2; ++k) {
            double p = alpha * (2.0 * k / levels - 1.0);
            pts[k] = p;
            pts[levels - k] = -p;
        }
        if (levels % 2 == 0) pts[levels / 2] = 0.0;
        return QuantizationGrid(std::move(pts));
    }

    int levels() const { return static_cast<int>(points_.size()) - 1; }
    double point(int k) const { return points_[static_cast<std::size_t>(k)]; }
    double lo() const { return points_.front(); }
    double hi() const { return points_.back(); }
    std::span<const double> points() const { return points_; }

  private:
    std::vector<double> points_;
};

/// Place the s+1 grid points for `density` on [-alpha, alpha] so that the
/// cumulative density at l_k equals k. Each interior point is found by a
/// safeguarded Newton solve on the running cumulative (tolerance 1e-10 in
/// the cumulative value); endpoints are pinned to +-alpha. Symmetric
/// densities yield exactly symmetric grids.
inline QuantizationGrid build_grid(const DensityFunction& density, double alpha, int levels) {
    if (!(alpha > 0.0)) throw InvalidArgument("build_grid: range must be positive");
    if (levels < 1) throw InvalidArgument("build_grid: level count must be >= 1");
    if (!density.lambda) throw InvalidArgument("build_grid: density is empty");

    // All quadrature runs in the rescaled coordinate u = g / alpha, where the
    // density has O(levels) values on [-1, 1] whatever the data scale. Grids
    // for gamma-hat near machine scale would otherwise stall the integrator.
    auto lam_u = [&](double u) { return alpha * density.lambda(alpha * u); };

    double total = integrate(lam_u, -1.0, 1.0);
    if (std::abs(total - levels) > 1e-6 * levels)
        throw NumericalError("build_grid: density integrates to " + std::to_string(total) +
                             ", expected " + std::to_string(levels));
    for (int i = 1; i < 64; ++i) {
        double u = -1.0 + 2.0 * i / 64.0;
        if (!(lam_u(u) > 0.0))
            throw InvalidArgument("build_grid: density must be positive on the open interval");
    }

    std::vector<double> pts(levels + 1);
    pts[0] = -1.0;
    pts[levels] = 1.0;
    double cum_prev = 0.0;  // cumulative at pts[k-1]
    for (int k = 1; k < levels; ++k) {
        double prev = pts[k - 1];
        auto cum = [&](double u) {
            return density.cumulative ? density.cumulative(alpha * u)
                                      : cum_prev + integrate(lam_u, prev, u, 1e-12);
        };
        auto g = [&](double u) { return cum(u) - k; };
        pts[k] = newton_bisect(g, lam_u, prev, 1.0, 1e-10);
        cum_prev = cum(pts[k]);
    }

    // Mirror the points of a symmetric density so l_k == -l_{s-k} exactly.
    bool symmetric = true;
    for (int i = 1; i <= 8 && symmetric; ++i) {
        double u = i / 9.0;
        symmetric = std::abs(lam_u(u) - lam_u(-u)) <= 1e-9 * std::max(lam_u(u), lam_u(-u));
    }
    if (symmetric) {
        for (int k = 0; k < (levels + 1) / 2; ++k) {
            double p = 0.5 * (pts[k] - pts[levels - k]);
            pts[k] = p;
            pts[levels - k] = -p;
        }
        if (levels % 2 == 0) pts[levels / 2] = 0.0;
    }
    for (auto& p : pts) p *= alpha;
    return QuantizationGrid(std::move(pts));
}

/// Stochastically round x to an adjacent grid point; returns the point index.
/// x must lie within the grid range. E[l_index] == x.
inline int stochastic_quantize(double x, const QuantizationGrid& grid, CounterRng& rng) {
    if (!(x >= grid.lo() && x <= grid.hi()))
        throw InvalidArgument("stochastic_quantize: value outside grid range; truncate first");
    auto pts = grid.points();
    if (x == grid.hi()) return grid.levels();
    // First point strictly greater than x: x lives in [pts[hi-1], pts[hi]).
    auto it = std::upper_bound(pts.begin(), pts.end(), x);
    int hi = static_cast<int>(it - pts.begin());
    double lo_pt = pts[hi - 1];
    double p_up = (x - lo_pt) / (pts[hi] - lo_pt);
    return rng.uniform() < p_up ? hi : hi - 1;
}

inline double dequantize(int index, const QuantizationGrid& grid) {
    if (index < 0 || index > grid.levels())
        throw InvalidArgument("dequantize: index out of range");
    return grid.point(index);
}

/// Worst-case mean squared quantization error sum_k P_k |Delta_k|^2 / 4 for
/// values distributed with density `pdf`. `support` bounds where the pdf is
/// nonzero (pass finite bounds for compactly supported densities); the pdf
/// must integrate to 1 over it.
inline double variance_bound(const QuantizationGrid& grid,
                             const std::function<double(double)>& pdf,
                             std::pair<double, double> support = {
                                 -std::numeric_limits<double>::infinity(),
                                 std::numeric_limits<double>::infinity()}) {
    double mass = integrate(pdf, support.first, support.second);
    if (std::abs(mass - 1.0) > 1e-6)
        throw NumericalError("variance_bound: pdf integrates to " + std::to_string(mass));
    double bound = 0.0;
    for (int k = 1; k <= grid.levels(); ++k) {
        double lo = grid.point(k - 1);
        double hi = grid.point(k);
        double p_k = integrate(pdf, std::max(lo, support.first), std::min(hi, support.second));
        double width = hi - lo;
        bound += p_k * width * width / 4.0;
    }
    return bound;
}

}  // namespace tnq
