#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tnq/error.hpp"
#include "tnq/numeric.hpp"
#include "tnq/quantizer.hpp"
#include "tnq/rng.hpp"

namespace tnq {

/// Zero-mean Laplace gradient model with scale gamma.
struct LaplaceModel {
    double scale;

    explicit LaplaceModel(double gamma) : scale(gamma) {
        if (!(gamma > 0.0)) throw InvalidArgument("Laplace scale must be positive");
    }
};

/// Maximum-likelihood scale: the mean absolute coordinate.
inline LaplaceModel estimate_gamma(std::span<const double> g) {
    check_finite(g);
    double sum = 0.0;
    for (double v : g) sum += std::abs(v);
    double gamma = sum / static_cast<double>(g.size());
    if (gamma == 0.0) throw NumericalError("degenerate Laplace model: all coordinates are zero");
    return LaplaceModel(gamma);
}

inline double laplace_pdf(double g, const LaplaceModel& model) {
    return std::exp(-std::abs(g) / model.scale) / (2.0 * model.scale);
}

inline double laplace_cdf(double g, const LaplaceModel& model) {
    double t = g / model.scale;
    return g < 0.0 ? 0.5 * std::exp(t) : 1.0 - 0.5 * std::exp(-t);
}

/// Inverse-CDF sampling from the given stream.
inline double laplace_sample(const LaplaceModel& model, CounterRng& rng) {
    double t = rng.uniform() - 0.5;
    double m = std::max(1.0 - 2.0 * std::abs(t), std::numeric_limits<double>::min());
    return t < 0.0 ? model.scale * std::log(m) : -model.scale * std::log(m);
}

inline GradientVector laplace_sample(const LaplaceModel& model, CounterRng& rng, std::size_t d) {
    GradientVector out(d);
    for (auto& v : out) v = laplace_sample(model, rng);
    return out;
}

/// Truncation threshold minimizing the truncated-quantization error of the
/// optimal non-uniform quantizer: alpha = 3*ln(1 + sqrt(6)*s/9) * gamma.
inline double optimal_alpha_tnq(int levels, const LaplaceModel& model) {
    if (levels < 1) throw InvalidArgument("level count must be >= 1");
    return 3.0 * std::log1p(std::sqrt(6.0) * levels / 9.0) * model.scale;
}

/// Optimal point density C * exp(-|g| / (3 gamma)) on [-alpha, alpha]. The
/// coefficient comes from the budget constraint (integral over the range
/// equals the level count), which pins C = s / (6 gamma (1 - e^{-alpha/3gamma})).
/// An analytic cumulative is attached for fast grid placement.
inline DensityFunction optimal_density_tnq(int levels, const LaplaceModel& model, double alpha) {
    if (levels < 1) throw InvalidArgument("level count must be >= 1");
    if (!(alpha > 0.0)) throw InvalidArgument("threshold must be positive");
    const double g3 = 3.0 * model.scale;
    const double coeff = levels / (2.0 * g3 * -std::expm1(-alpha / g3));
    DensityFunction density;
    density.lambda = [coeff, g3](double g) { return coeff * std::exp(-std::abs(g) / g3); };
    density.cumulative = [coeff, g3, alpha](double x) {
        double half = coeff * g3 * -std::expm1(-alpha / g3);
        return x < 0.0 ? coeff * g3 * (std::exp(x / g3) - std::exp(-alpha / g3))
                       : half + coeff * g3 * -std::expm1(-x / g3);
    };
    // Budget check in u = g/alpha coordinates so it stays well-conditioned
    // for gamma-hat near machine scale (see build_grid).
    double total =
        integrate([&](double u) { return alpha * density.lambda(alpha * u); }, -1.0, 1.0);
    if (std::abs(total - levels) > 1e-6 * levels)
        throw NumericalError("optimal_density_tnq: budget constraint violated: " +
                             std::to_string(total));
    return density;
}

/// Root of v * e^v = s^2 with residual and its magnitude.
struct RootSolution {
    double value;
    double residual;
};

/// Newton solve of v e^v = s^2 with a bisection safeguard on [0, 2 ln(s^2)+2].
inline RootSolution solve_v(int levels) {
    if (levels < 1) throw InvalidArgument("level count must be >= 1");
    const double s2 = static_cast<double>(levels) * levels;
    auto f = [s2](double v) { return v * std::exp(v) - s2; };
    auto df = [](double v) { return (1.0 + v) * std::exp(v); };
    double hi = 2.0 * std::log(s2 + 1.0) + 2.0;
    double guess = std::log(s2) - std::log(std::log(s2) + 1.0) + 1.0;
    double v = newton_bisect(f, df, 0.0, hi, 1e-12 * s2, guess);
    return RootSolution{v, f(v)};
}

/// Optimal threshold for truncated uniform quantization: alpha = v(s) gamma.
inline double optimal_alpha_tuq(int levels, const LaplaceModel& model) {
    return solve_v(levels).value * model.scale;
}

}  // namespace tnq
