#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "tnq/error.hpp"
#include "tnq/laplace.hpp"
#include "tnq/numeric.hpp"
#include "tnq/quantizer.hpp"

namespace tnq {

/// Compression error split into its two sources.
struct ErrorBreakdown {
    double variance_term = 0.0;  // stochastic quantization variance
    double bias_term = 0.0;      // truncation bias
    double total() const { return variance_term + bias_term; }
};

/// Parameters of the distributed-SGD convergence bound.
struct ConvergenceParams {
    int clients = 1;        // N
    int batch = 1;          // B
    int dim = 1;            // d
    double grad_variance = 0.0;  // sigma^2
    double smoothness = 1.0;     // nu
    double lr = 0.1;             // eta, must satisfy eta <= 1/nu
    int rounds = 1;              // T
    double init_gap = 0.0;       // F(theta_0) - F(theta*)
};

/// Quantization error of truncated non-uniform quantization for an arbitrary
/// coordinate pdf: (d/4N) int p/lambda^2 over [-alpha, alpha] plus
/// (2d/N) int (g-alpha)^2 p over the upper tail, both by quadrature.
inline ErrorBreakdown error_tnq_general(const std::function<double(double)>& pdf,
                                        const DensityFunction& density, double alpha,
                                        int levels, int dim, int clients) {
    if (!(alpha > 0.0)) throw InvalidArgument("threshold must be positive");
    double budget = integrate(density.lambda, -alpha, alpha);
    if (std::abs(budget - levels) > 1e-6 * levels)
        throw NumericalError("density is not normalized to the level count");
    ErrorBreakdown out;
    auto integrand = [&](double g) {
        double lam = density.lambda(g);
        return pdf(g) / (lam * lam);
    };
    out.variance_term = dim / (4.0 * clients) * integrate(integrand, -alpha, alpha);
    auto tail = [&](double g) { return (g - alpha) * (g - alpha) * pdf(g); };
    out.bias_term =
        2.0 * dim / clients * integrate(tail, alpha, std::numeric_limits<double>::infinity());
    return out;
}

/// Cube-root companding density p^{1/3} s / int p^{1/3}, the variational
/// optimum of the quantization variance under the budget constraint.
inline DensityFunction optimal_density_general(const std::function<double(double)>& pdf,
                                               double alpha, int levels) {
    if (!(alpha > 0.0)) throw InvalidArgument("threshold must be positive");
    for (int i = 0; i <= 32; ++i) {
        double x = -alpha + 2.0 * alpha * i / 32.0;
        if (!(pdf(x) > 0.0))
            throw InvalidArgument("pdf must be positive on [-alpha, alpha]");
    }
    double norm = integrate([&](double g) { return std::cbrt(pdf(g)); }, -alpha, alpha);
    DensityFunction density;
    density.lambda = [pdf, levels, norm](double g) { return std::cbrt(pdf(g)) * levels / norm; };
    return density;
}

/// Closed form of the TNQ error under the Laplace model:
/// 27 d g^2 / (N s^2) (1 - e^{-a/3g})^3 + 2 d g^2 / N e^{-a/g}.
inline ErrorBreakdown error_tnq_laplace_breakdown(double alpha, int levels, double gamma,
                                                  int dim, int clients) {
    double base = dim * gamma * gamma / clients;
    double u = -std::expm1(-alpha / (3.0 * gamma));
    ErrorBreakdown out;
    out.variance_term = 27.0 * base / (static_cast<double>(levels) * levels) * u * u * u;
    out.bias_term = 2.0 * base * std::exp(-alpha / gamma);
    return out;
}

inline double error_tnq_laplace(double alpha, int levels, double gamma, int dim, int clients) {
    return error_tnq_laplace_breakdown(alpha, levels, gamma, dim, clients).total();
}

/// TNQ error at the closed-form optimal threshold: 27 d g^2 / (N (s + 3 sqrt6/2)^2).
inline double theorem1_bound(int levels, double gamma, int dim, int clients) {
    if (levels < 1) throw InvalidArgument("level count must be >= 1");
    double denom = levels + 1.5 * std::sqrt(6.0);
    return 27.0 * dim * gamma * gamma / (clients * denom * denom);
}

/// Non-uniform quantization without truncation: 27 d g^2 / (N s^2).
inline double error_nq(int levels, double gamma, int dim, int clients) {
    return 27.0 * dim * gamma * gamma / (clients * static_cast<double>(levels) * levels);
}

/// Truncated uniform quantization at threshold alpha:
/// d a^2 / (N s^2) + 2 d g^2 / N e^{-a/g}.
inline ErrorBreakdown error_tuq(double alpha, int levels, double gamma, int dim, int clients) {
    ErrorBreakdown out;
    out.variance_term = dim * alpha * alpha / (clients * static_cast<double>(levels) * levels);
    out.bias_term = 2.0 * dim * gamma * gamma / clients * std::exp(-alpha / gamma);
    return out;
}

/// TUQ at its optimal threshold v(s) gamma: d g^2 (v^2 + 2v) / (N s^2),
/// obtained by substituting v e^v = s^2 into the alpha form.
inline double error_tuq_optimal(int levels, double gamma, int dim, int clients) {
    double v = solve_v(levels).value;
    return dim * gamma * gamma * (v * v + 2.0 * v) /
           (clients * static_cast<double>(levels) * levels);
}

/// Uniform quantization without truncation: 4 d g^2 (ln 2d)^2 / (N s^2).
inline double error_uq(int levels, double gamma, int dim, int clients) {
    double l = std::log(2.0 * dim);
    return 4.0 * dim * gamma * gamma * l * l / (clients * static_cast<double>(levels) * levels);
}

/// Bound on E[||g||_inf^2] for d iid Laplace coordinates: 4 g^2 (ln 2d)^2.
inline double linf_bound(double gamma, int dim) {
    double l = std::log(2.0 * dim);
    return 4.0 * gamma * gamma * l * l;
}

/// Full convergence bound: 2 (F0 - F*) / (T eta) + sigma^2 / (N B) + E_TQ.
inline double convergence_bound(const ConvergenceParams& p, double quant_error) {
    if (!(p.lr > 0.0) || p.lr > 1.0 / p.smoothness + 1e-15)
        throw InvalidArgument("learning rate must satisfy 0 < eta <= 1/nu");
    if (p.clients < 1 || p.batch < 1 || p.rounds < 1 || p.init_gap < 0.0 ||
        p.grad_variance < 0.0)
        throw InvalidArgument("invalid convergence parameters");
    return 2.0 * p.init_gap / (p.rounds * p.lr) +
           p.grad_variance / (static_cast<double>(p.clients) * p.batch) + quant_error;
}

/// General TNQ error as a function of alpha alone, with the density already
/// optimized out: (d / 4 N s^2) [int p^{1/3}]^3 + tail bias.
inline double error_tnq_alpha_profile(const std::function<double(double)>& pdf, double alpha,
                                      int levels, int dim, int clients) {
    double cube = integrate([&](double g) { return std::cbrt(pdf(g)); }, -alpha, alpha);
    double variance = dim * cube * cube * cube /
                      (4.0 * clients * static_cast<double>(levels) * levels);
    auto tail = [&](double g) { return (g - alpha) * (g - alpha) * pdf(g); };
    double bias =
        2.0 * dim / clients * integrate(tail, alpha, std::numeric_limits<double>::infinity());
    return variance + bias;
}

struct AlphaSearchResult {
    double alpha;
    double error;
    bool warning;  // minimum sat on the search boundary; treat with suspicion
};

/// Numerical threshold optimization by golden-section search over
/// [lo, hi], re-deriving the optimal density at every candidate alpha.
inline AlphaSearchResult argmin_alpha_numeric(const std::function<double(double)>& pdf,
                                              int levels, double lo, double hi) {
    if (!(lo > 0.0) || !(hi > lo)) throw InvalidArgument("invalid search interval");
    auto objective = [&](double a) { return error_tnq_alpha_profile(pdf, a, levels, 1, 1); };
    MinimizeResult m = golden_section_min(objective, lo, hi, 1e-6);
    return AlphaSearchResult{m.argmin, m.value, m.warning};
}

}  // namespace tnq
