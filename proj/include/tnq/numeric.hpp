#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "tnq/error.hpp"

namespace tnq {

inline constexpr double kQuadAbsTol = 1e-10;

/// Adaptive Gauss-Kronrod integration of f over [a, b]. Either bound may be
/// infinite. Intervals straddling zero are split there first: the integrands
/// in this library frequently have a |g| kink at the origin.
template <class F>
double integrate(F&& f, double a, double b, double abs_tol = kQuadAbsTol) {
    using quad = boost::math::quadrature::gauss_kronrod<double, 15>;
    if (a == b) return 0.0;
    if (a < 0.0 && b > 0.0)
        return integrate(f, a, 0.0, abs_tol * 0.5) + integrate(f, 0.0, b, abs_tol * 0.5);
    double err = 0.0;
    double value = quad::integrate(f, a, b, 14, 1e-12, &err);
    if (!std::isfinite(value) || err > std::max(abs_tol, 1e-8 * std::abs(value)))
        throw NumericalError("quadrature did not converge: estimate " + std::to_string(value) +
                             ", error " + std::to_string(err) + " on [" + std::to_string(a) +
                             ", " + std::to_string(b) + "]");
    return value;
}

/// Safeguarded Newton root solve of f on the bracket [lo, hi]. f(lo) and
/// f(hi) must have opposite signs (or one of them be a root). Falls back to
/// bisection whenever the Newton step leaves the bracket. Converges when
/// |f| <= f_tol or the bracket collapses.
template <class F, class DF>
double newton_bisect(F&& f, DF&& df, double lo, double hi, double f_tol,
                     double x0 = std::numeric_limits<double>::quiet_NaN(),
                     int max_iter = 100) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0))
        throw NumericalError("newton_bisect: root not bracketed");
    double x = (x0 > lo && x0 < hi) ? x0 : 0.5 * (lo + hi);
    for (int i = 0; i < max_iter; ++i) {
        double fx = f(x);
        if (std::abs(fx) <= f_tol) return x;
        if ((fx > 0.0) == (fhi > 0.0)) {
            hi = x;
            fhi = fx;
        } else {
            lo = x;
            flo = fx;
        }
        double d = df(x);
        double step = d != 0.0 ? x - fx / d : std::numeric_limits<double>::infinity();
        x = (step > lo && step < hi) ? step : 0.5 * (lo + hi);
        if (hi - lo <= std::abs(x) * 1e-15 + 1e-300) return x;
    }
    throw NumericalError("newton_bisect: no convergence after " + std::to_string(max_iter) +
                         " iterations");
}

struct MinimizeResult {
    double argmin = 0.0;
    double value = 0.0;
    bool warning = false;  // set when unimodality looked doubtful (edge minimum)
};

/// Golden-section minimization on [lo, hi] after a coarse scan locates the
/// basin. Tolerance is on the argument.
template <class F>
MinimizeResult golden_section_min(F&& f, double lo, double hi, double x_tol = 1e-6,
                                  int scan_points = 64) {
    MinimizeResult res;
    int best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= scan_points; ++i) {
        double x = lo + (hi - lo) * i / scan_points;
        double v = f(x);
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    res.warning = (best == 0 || best == scan_points);
    double a = lo + (hi - lo) * std::max(best - 1, 0) / scan_points;
    double b = lo + (hi - lo) * std::min(best + 1, scan_points) / scan_points;
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > x_tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    res.argmin = 0.5 * (a + b);
    res.value = f(res.argmin);
    return res;
}

}  // namespace tnq
