#pragma once

// Single-step advancement of the implicit Runge-Kutta schemes.
//
// Implicit stage i solves for its derivative k_i in
//     G(k) = k - f(t + c_i tau, base_i + tau*gamma_i * k) = 0,
// base_i = y + tau * sum_{j<i} a_ij k_j, by a simplified Newton iteration
// whose linear systems (I - tau*gamma_i J) delta = -G are handed to GMRES.
// J is frozen at base_i. The iteration starts from the stage value y, i.e.
// k = (y - base_i) / (tau*gamma_i).

#include <adaptstep/krylov.hpp>
#include <adaptstep/linalg.hpp>
#include <adaptstep/problems.hpp>
#include <adaptstep/schemes.hpp>

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace adaptstep {

enum class JacobianMode {
    Analytic,         // RhsFunction::jvp; falls back to differences when absent
    FiniteDifference, // forward difference on RhsFunction::eval
};

struct StepOptions {
    double lin_tol = 1e-5;
    std::size_t restart = 20;
    std::size_t gmres_max_iters = 0; // 0 -> 10 * dim
    std::size_t max_newton = 25;
    JacobianMode jacobian = JacobianMode::Analytic;
};

struct StepOutcome {
    Vector y_new;
    double err_est = 0.0;
    std::size_t krylov_iters = 0;
    std::size_t newton_iters = 0;
    std::size_t linear_solves = 0;
};

/// Newton or GMRES failure inside a step. Carries the Krylov work already
/// spent so the caller can charge it.
class StepFailure : public std::runtime_error {
public:
    StepFailure(const std::string& what, std::size_t spent) : std::runtime_error(what), krylov_iters(spent) {}
    std::size_t krylov_iters;
};

namespace detail {

class StageSolver {
public:
    StageSolver(const RhsFunction& rhs, const StepOptions& opts)
        : rhs_(rhs), opts_(opts), n_(rhs.state_dim), f_lin_(n_), g_(n_), tmp_(n_), work_(n_)
    {
        use_fd_ = opts.jacobian == JacobianMode::FiniteDifference || !rhs.jvp;
    }

    // Returns k; accumulates counters into out.
    Vector solve(double t_stage, std::span<const double> y, std::span<const double> base, double shift,
                 StepOutcome& out)
    {
        rhs_.eval(t_stage, base, f_lin_);
        if (!all_finite(f_lin_)) throw StepFailure("non-finite right-hand side", out.krylov_iters);

        const double base_inf = norm_inf(base);
        LinearMap op;
        op.dim = n_;
        op.apply = [&, t_stage, shift, base_inf](std::span<const double> v, std::span<double> r) {
            if (use_fd_) {
                const double vn = norm_inf(v);
                if (vn == 0.0) {
                    std::fill(r.begin(), r.end(), 0.0);
                } else {
                    const double eps = std::sqrt(std::numeric_limits<double>::epsilon()) * (1.0 + base_inf) / vn;
                    for (std::size_t i = 0; i < n_; ++i) work_[i] = base[i] + eps * v[i];
                    rhs_.eval(t_stage, work_, r);
                    for (std::size_t i = 0; i < n_; ++i) r[i] = (r[i] - f_lin_[i]) / eps;
                }
            } else {
                rhs_.jvp(t_stage, base, v, r);
            }
            for (std::size_t i = 0; i < n_; ++i) r[i] = v[i] - shift * r[i];
        };

        // Targets never go below what roundoff in G = f - k can resolve;
        // otherwise tight tolerances on stiff stages stall at the noise floor.
        constexpr double floor_factor = 64.0 * std::numeric_limits<double>::epsilon();
        Vector k(n_);
        for (std::size_t i = 0; i < n_; ++i) k[i] = (y[i] - base[i]) / shift;
        const Vector zero(n_, 0.0);
        for (std::size_t it = 0; it < opts_.max_newton; ++it) {
            for (std::size_t i = 0; i < n_; ++i) tmp_[i] = base[i] + shift * k[i];
            rhs_.eval(t_stage, tmp_, work_);
            for (std::size_t i = 0; i < n_; ++i) g_[i] = work_[i] - k[i];
            if (!all_finite(g_)) throw StepFailure("non-finite Newton residual", out.krylov_iters);
            const double tol = std::max(opts_.lin_tol, floor_factor * (norm2(work_) + norm2(k)));
            if (norm2(g_) <= tol) return k;

            SolveReport rep;
            try {
                rep = gmres_solve(op, g_, zero, tol, opts_.restart, opts_.gmres_max_iters);
            } catch (const NumericalBreakdown& e) {
                throw StepFailure(e.what(), out.krylov_iters);
            }
            out.krylov_iters += rep.iterations;
            ++out.linear_solves;
            ++out.newton_iters;
            if (!rep.converged) throw StepFailure("GMRES did not converge", out.krylov_iters);
            axpy(1.0, rep.solution, k);
            // k is only resolved to the precision of the stage value base + shift k
            const double k_floor = floor_factor * (norm_inf(k) + norm_inf(tmp_) / shift);
            if (norm_inf(rep.solution) <= std::max(opts_.lin_tol, k_floor)) return k;
        }
        throw StepFailure("Newton iteration did not converge", out.krylov_iters);
    }

private:
    const RhsFunction& rhs_;
    const StepOptions& opts_;
    std::size_t n_;
    bool use_fd_ = false;
    Vector f_lin_, g_, tmp_, work_;
};

} // namespace detail

/// Advances y by one step of size tau. lin_tol in opts is both the absolute
/// GMRES target and the Newton update tolerance, raised to the roundoff level
/// of the stage when it lies below it.
inline StepOutcome step(const SchemeSpec& scheme, const RhsFunction& rhs, double t,
                        std::span<const double> y, double tau, const StepOptions& opts)
{
    if (!(tau > 0.0)) throw std::invalid_argument("step: tau must be positive");
    if (y.size() != rhs.state_dim) throw std::invalid_argument("step: state dimension mismatch");

    const std::size_t n = rhs.state_dim;
    const std::size_t s = scheme.stages;
    StepOutcome out;
    std::vector<Vector> k(s, Vector(n));
    detail::StageSolver solver(rhs, opts);
    Vector base(n);

    for (std::size_t i = 0; i < s; ++i) {
        base.assign(y.begin(), y.end());
        for (std::size_t j = 0; j < i; ++j) {
            const double a = scheme.coeff(i, j);
            if (a != 0.0) axpy(tau * a, k[j], base);
        }
        const double t_stage = t + scheme.c[i] * tau;
        const double diag = scheme.coeff(i, i);
        if (diag == 0.0) {
            rhs.eval(t_stage, base, k[i]);
            continue;
        }
        k[i] = solver.solve(t_stage, y, base, tau * diag, out);
    }

    out.y_new.assign(y.begin(), y.end());
    Vector diff(n, 0.0);
    for (std::size_t j = 0; j < s; ++j) {
        axpy(tau * scheme.b[j], k[j], out.y_new);
        const double e = scheme.b[j] - scheme.b_hat[j];
        if (e != 0.0) axpy(tau * e, k[j], diff);
    }
    out.err_est = norm_inf(diff);
    if (!all_finite(out.y_new) || !std::isfinite(out.err_est))
        throw StepFailure("non-finite step result", out.krylov_iters);
    return out;
}

/// Integrates with a constant step from t0 over `steps` steps.
inline Vector integrate_fixed(const SchemeSpec& scheme, const RhsFunction& rhs, std::span<const double> y0,
                              double t0, double t_final, std::size_t steps, const StepOptions& opts)
{
    Vector y(y0.begin(), y0.end());
    const double tau = (t_final - t0) / static_cast<double>(steps);
    for (std::size_t m = 0; m < steps; ++m) {
        y = step(scheme, rhs, t0 + static_cast<double>(m) * tau, y, tau, opts).y_new;
    }
    return y;
}

struct ConvergenceStudy {
    double order = 0.0;
    std::vector<double> errors;
};

/// Least-squares slope of log(max-norm global error) against log(tau) for
/// fixed-step runs. Every tau must divide t_final. Without a reference, a run
/// with a quarter of the smallest step serves as one.
inline ConvergenceStudy convergence_order(const SchemeSpec& scheme, const RhsFunction& rhs,
                                          std::span<const double> y0, double t_final,
                                          const std::vector<double>& tau_list,
                                          std::optional<Vector> reference = std::nullopt,
                                          StepOptions opts = StepOptions{.lin_tol = 1e-13})
{
    if (tau_list.size() < 2) throw std::invalid_argument("convergence_order: need at least two step sizes");
    auto steps_for = [&](double tau) {
        const double q = t_final / tau;
        const double r = std::round(q);
        if (r < 1.0 || std::abs(q - r) > 1e-8 * q)
            throw std::invalid_argument("convergence_order: tau must divide t_final");
        return static_cast<std::size_t>(r);
    };
    if (!reference) {
        double smallest = tau_list.front();
        for (double tau : tau_list) smallest = std::min(smallest, tau);
        reference = integrate_fixed(scheme, rhs, y0, 0.0, t_final, 4 * steps_for(smallest), opts);
    }

    ConvergenceStudy study;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (double tau : tau_list) {
        const Vector y = integrate_fixed(scheme, rhs, y0, 0.0, t_final, steps_for(tau), opts);
        const double err = max_abs_diff(y, *reference);
        study.errors.push_back(err);
        const double lx = std::log(tau), ly = std::log(err);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double m = static_cast<double>(tau_list.size());
    study.order = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return study;
}

} // namespace adaptstep
