#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "tnq/error.hpp"

namespace tnq {

/// Dense symmetric matrix helpers sized for the synthetic tasks (d up to a
/// few hundred). Matrices are row-major flat vectors.

/// X^T X / 1 for row-major X (n x d).
inline std::vector<double> gram_matrix(const std::vector<double>& x, std::size_t n,
                                       std::size_t d) {
    std::vector<double> g(d * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x.data() + i * d;
        for (std::size_t a = 0; a < d; ++a) {
            double ra = row[a];
            if (ra == 0.0) continue;
            for (std::size_t b = a; b < d; ++b) g[a * d + b] += ra * row[b];
        }
    }
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < a; ++b) g[a * d + b] = g[b * d + a];
    return g;
}

/// Solve A x = b for symmetric positive definite A via Cholesky.
inline std::vector<double> cholesky_solve(std::vector<double> a, std::vector<double> b) {
    std::size_t d = b.size();
    if (a.size() != d * d) throw InvalidArgument("cholesky_solve: shape mismatch");
    // In-place lower-triangular factor.
    for (std::size_t j = 0; j < d; ++j) {
        double diag = a[j * d + j];
        for (std::size_t k = 0; k < j; ++k) diag -= a[j * d + k] * a[j * d + k];
        if (!(diag > 0.0)) throw NumericalError("cholesky_solve: matrix not positive definite");
        diag = std::sqrt(diag);
        a[j * d + j] = diag;
        for (std::size_t i = j + 1; i < d; ++i) {
            double v = a[i * d + j];
            for (std::size_t k = 0; k < j; ++k) v -= a[i * d + k] * a[j * d + k];
            a[i * d + j] = v / diag;
        }
    }
    // Forward then backward substitution.
    for (std::size_t i = 0; i < d; ++i) {
        double v = b[i];
        for (std::size_t k = 0; k < i; ++k) v -= a[i * d + k] * b[k];
        b[i] = v / a[i * d + i];
    }
    for (std::size_t ii = d; ii-- > 0;) {
        double v = b[ii];
        for (std::size_t k = ii + 1; k < d; ++k) v -= a[k * d + ii] * b[k];
        b[ii] = v / a[ii * d + ii];
    }
    return b;
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration. Deterministic start vector; enough accuracy for a smoothness
/// constant (the caller only needs eta <= 1/nu to hold, so round up a hair).
inline double power_lambda_max(const std::vector<double>& a, std::size_t d, int iters = 300) {
    if (a.size() != d * d) throw InvalidArgument("power_lambda_max: shape mismatch");
    std::vector<double> v(d), w(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = 1.0 + 0.001 * static_cast<double>(i % 7);
    double lambda = 0.0;
    for (int it = 0; it < iters; ++it) {
        double norm = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += a[i * d + j] * v[j];
            w[i] = s;
            norm += s * s;
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        lambda = norm;
        for (std::size_t i = 0; i < d; ++i) v[i] = w[i] / norm;
    }
    return lambda;
}

}  // namespace tnq
