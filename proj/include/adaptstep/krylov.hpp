#pragma once

// Matrix-free restarted GMRES.
//
// The solver only touches the operator through LinearMap::apply, so the same
// routine serves the linear stage equations and the inner solves of the
// Newton iteration. Every Arnoldi step is one operator application and is
// counted in SolveReport::iterations; the residual recomputed at the start of
// each restart cycle is counted separately in residual_evaluations.

#include <adaptstep/linalg.hpp>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace adaptstep {

struct LinearMap {
    std::size_t dim = 0;
    // out = A * in; in and out never alias.
    std::function<void(std::span<const double> in, std::span<double> out)> apply;
};

struct SolveReport {
    Vector solution;
    std::size_t iterations = 0;
    std::size_t residual_evaluations = 0;
    double residual_norm = 0.0;
    bool converged = false;
    // Least-squares residual estimate after every Arnoldi step.
    std::vector<double> history;
};

class NumericalBreakdown : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GmresOptions {
    double tol_abs = 1e-8;
    std::size_t restart = 20;
    // 0 selects 10 * dim.
    std::size_t max_iters = 0;
};

namespace detail {

inline void givens(double a, double b, double& c, double& s)
{
    if (b == 0.0) {
        c = 1.0;
        s = 0.0;
    } else if (std::abs(b) > std::abs(a)) {
        const double t = a / b;
        s = 1.0 / std::sqrt(1.0 + t * t);
        c = s * t;
    } else {
        const double t = b / a;
        c = 1.0 / std::sqrt(1.0 + t * t);
        s = c * t;
    }
}

} // namespace detail

/// Solves op(x) = rhs starting from x0 until ||op(x) - rhs||_2 <= tol_abs.
///
/// Non-convergence within max_iters is reported through converged=false.
/// A NaN or Inf produced by the operator raises NumericalBreakdown.
inline SolveReport gmres_solve(const LinearMap& op, std::span<const double> rhs,
                               std::span<const double> x0, double tol_abs,
                               std::size_t restart_len = 20, std::size_t max_iters = 0)
{
    const std::size_t n = op.dim;
    if (n == 0 || !op.apply) throw std::invalid_argument("gmres_solve: empty operator");
    if (rhs.size() != n || x0.size() != n)
        throw std::invalid_argument("gmres_solve: dimension mismatch");
    if (!(tol_abs > 0.0)) throw std::invalid_argument("gmres_solve: tol_abs must be positive");
    if (restart_len == 0) throw std::invalid_argument("gmres_solve: restart length must be positive");
    if (max_iters == 0) max_iters = 10 * n;

    const std::size_t m = restart_len;
    SolveReport rep;
    rep.solution.assign(x0.begin(), x0.end());
    Vector& x = rep.solution;

    std::vector<Vector> basis(m + 1, Vector(n));
    // Column-major Hessenberg, (m+1) x m.
    std::vector<double> hess((m + 1) * m, 0.0);
    auto H = [&](std::size_t i, std::size_t j) -> double& { return hess[j * (m + 1) + i]; };
    std::vector<double> cs(m), sn(m), g(m + 1), y(m);
    Vector r(n), w(n);

    for (;;) {
        op.apply(x, r);
        ++rep.residual_evaluations;
        for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - r[i];
        const double beta = norm2(r);
        if (!std::isfinite(beta)) throw NumericalBreakdown("gmres_solve: non-finite residual");
        rep.residual_norm = beta;
        if (beta <= tol_abs) {
            rep.converged = true;
            return rep;
        }
        if (rep.iterations >= max_iters) return rep;

        for (std::size_t i = 0; i < n; ++i) basis[0][i] = r[i] / beta;
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = beta;

        std::size_t k = 0; // columns built in this cycle
        bool done = false;
        while (k < m && rep.iterations < max_iters && !done) {
            const std::size_t j = k;
            op.apply(basis[j], w);
            ++rep.iterations;
            if (!all_finite(w)) throw NumericalBreakdown("gmres_solve: operator produced NaN/Inf");

            const double wnorm0 = norm2(w);
            for (std::size_t i = 0; i <= j; ++i) {
                const double h = dot(w, basis[i]);
                H(i, j) = h;
                axpy(-h, basis[i], w);
            }
            double hn = norm2(w);
            // One round of reorthogonalization when cancellation was severe.
            if (hn < 0.5 * wnorm0) {
                for (std::size_t i = 0; i <= j; ++i) {
                    const double h = dot(w, basis[i]);
                    H(i, j) += h;
                    axpy(-h, basis[i], w);
                }
                hn = norm2(w);
            }
            H(j + 1, j) = hn;

            for (std::size_t i = 0; i < j; ++i) {
                const double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
                H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
                H(i, j) = t;
            }
            detail::givens(H(j, j), H(j + 1, j), cs[j], sn[j]);
            H(j, j) = cs[j] * H(j, j) + sn[j] * H(j + 1, j);
            H(j + 1, j) = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];

            const double est = std::abs(g[j + 1]);
            if (!std::isfinite(est)) throw NumericalBreakdown("gmres_solve: non-finite Arnoldi data");
            rep.history.push_back(est);
            ++k;

            const bool happy = hn <= 1e-14 * wnorm0;
            if (est <= tol_abs || happy) {
                done = true;
            } else {
                for (std::size_t i = 0; i < n; ++i) basis[j + 1][i] = w[i] / hn;
            }
        }

        // Back substitution on the rotated upper-triangular block.
        for (std::size_t ii = k; ii-- > 0;) {
            double s = g[ii];
            for (std::size_t jj = ii + 1; jj < k; ++jj) s -= H(ii, jj) * y[jj];
            if (H(ii, ii) == 0.0) throw NumericalBreakdown("gmres_solve: singular Hessenberg block");
            y[ii] = s / H(ii, ii);
        }
        for (std::size_t jj = 0; jj < k; ++jj) axpy(y[jj], basis[jj], x);
    }
}

inline SolveReport gmres_solve(const LinearMap& op, std::span<const double> rhs,
                               std::span<const double> x0, const GmresOptions& opts)
{
    return gmres_solve(op, rhs, x0, opts.tol_abs, opts.restart, opts.max_iters);
}

} // namespace adaptstep
