#pragma once

// Method-of-lines benchmark problems on periodic grids.
//
// All 1D problems live on [0,1) with nodes x_i = i/n, i = 0..n-1. The 2D
// Brusselator uses an n x n grid on [0,1)^2 and stores u followed by v, each
// in row-major order with x varying fastest.
//
// Second derivatives use the centered 3-point (1D) or 5-point (2D) stencil.
// A transport term c * du/dx is upwinded on the sign of c at each node:
// c > 0 moves information leftwards, so the forward difference is used;
// c <= 0 uses the backward difference.

#include <adaptstep/linalg.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace adaptstep {

enum class ProblemKind { DiffAdv, BurgersReaction, PorousMedium, ViscousBurgers, AllenCahn, Brusselator2D };

inline std::string_view to_string(ProblemKind k)
{
    switch (k) {
    case ProblemKind::DiffAdv: return "diffadv";
    case ProblemKind::BurgersReaction: return "burgers-reaction";
    case ProblemKind::PorousMedium: return "porous";
    case ProblemKind::ViscousBurgers: return "viscous-burgers";
    case ProblemKind::AllenCahn: return "allen-cahn";
    case ProblemKind::Brusselator2D: return "brusselator2d";
    }
    return "?";
}

inline std::optional<ProblemKind> problem_from_name(std::string_view s)
{
    for (auto k : {ProblemKind::DiffAdv, ProblemKind::BurgersReaction, ProblemKind::PorousMedium,
                   ProblemKind::ViscousBurgers, ProblemKind::AllenCahn, ProblemKind::Brusselator2D})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

struct Grid {
    std::size_t n = 100;
    int dims = 1;

    double h() const { return 1.0 / static_cast<double>(n); }
    std::size_t nodes() const { return dims == 1 ? n : n * n; }
};

// Per-kind constants. Defaults are the benchmark values.
struct ProblemConstants {
    // diffusion-advection Gaussian width
    double sigma0 = 1.4e-3;
    // Burgers + reaction initial perturbation
    double eps1 = 1e-2, eps2 = 1e-2;
    double omega1 = 2.0 * std::numbers::pi, omega2 = 8.0 * std::numbers::pi;
    double phi = 0.3;
    // porous medium
    double m = 2.0;
    double x1 = 0.25, x2 = 0.6;
    // viscous Burgers tail Gaussian
    double x0 = 0.9, sigma = 0.02;
    // Allen-Cahn amplitude
    double amp = 0.1;
    // Brusselator
    double bruss_alpha = 0.1;
    double source_strength = 5.0;
    double source_x = 0.3, source_y = 0.6, source_radius = 0.1;
    double source_on = 1.1;
};

struct ProblemSpec {
    ProblemKind kind = ProblemKind::DiffAdv;
    double eta = 0.0;
    Grid grid;
    double t_final = 0.2;
    ProblemConstants extra;

    std::size_t state_dim() const
    {
        return kind == ProblemKind::Brusselator2D ? 2 * grid.n * grid.n : grid.n;
    }
};

inline double default_t_final(ProblemKind k)
{
    switch (k) {
    case ProblemKind::DiffAdv: return 0.2;
    case ProblemKind::BurgersReaction: return 0.05;
    case ProblemKind::PorousMedium: return 1e-3;
    case ProblemKind::ViscousBurgers: return 1e-2;
    case ProblemKind::AllenCahn: return 2e-2;
    case ProblemKind::Brusselator2D: return 11.5;
    }
    return 1.0;
}

inline ProblemSpec make_problem(ProblemKind kind, std::size_t n, double eta,
                                std::optional<double> t_final = std::nullopt)
{
    ProblemSpec s;
    s.kind = kind;
    s.eta = eta;
    s.grid.n = n;
    s.grid.dims = kind == ProblemKind::Brusselator2D ? 2 : 1;
    s.t_final = t_final.value_or(default_t_final(kind));
    return s;
}

inline void validate(const ProblemSpec& s)
{
    if (s.grid.n == 0) throw std::invalid_argument("grid size must be positive");
    if (!(s.t_final > 0.0) || !std::isfinite(s.t_final))
        throw std::invalid_argument("t_final must be positive");
    if (!std::isfinite(s.eta)) throw std::invalid_argument("eta must be finite");
    if ((s.kind == ProblemKind::Brusselator2D) != (s.grid.dims == 2))
        throw std::invalid_argument("grid dimension does not match problem kind");
}

struct RhsFunction {
    std::size_t state_dim = 0;
    std::function<void(double t, std::span<const double> y, std::span<double> out)> eval;
    // Jacobian of eval at y applied to v. Upwind branches are frozen at y.
    std::function<void(double t, std::span<const double> y, std::span<const double> v, std::span<double> out)> jvp;

    Vector operator()(double t, std::span<const double> y) const
    {
        Vector out(state_dim);
        eval(t, y, out);
        return out;
    }
};

namespace stencil {

inline void second_difference(std::span<const double> u, double inv_h2, std::span<double> out)
{
    const std::size_t n = u.size();
    if (n == 1) {
        out[0] = 0.0;
        return;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double l = u[i == 0 ? n - 1 : i - 1];
        const double r = u[i + 1 == n ? 0 : i + 1];
        out[i] = (l - 2.0 * u[i] + r) * inv_h2;
    }
}

// One-sided difference of u at node i, upwinded for transport speed c.
inline double upwind_difference(std::span<const double> u, std::size_t i, double c, double inv_h)
{
    const std::size_t n = u.size();
    if (c > 0.0) return (u[i + 1 == n ? 0 : i + 1] - u[i]) * inv_h;
    return (u[i] - u[i == 0 ? n - 1 : i - 1]) * inv_h;
}

inline void laplacian_2d(std::span<const double> w, std::size_t n, double inv_h2, std::span<double> out)
{
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t jm = j == 0 ? n - 1 : j - 1;
        const std::size_t jp = j + 1 == n ? 0 : j + 1;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t im = i == 0 ? n - 1 : i - 1;
            const std::size_t ip = i + 1 == n ? 0 : i + 1;
            out[j * n + i] = (w[j * n + im] + w[j * n + ip] + w[jm * n + i] + w[jp * n + i]
                              - 4.0 * w[j * n + i]) * inv_h2;
        }
    }
}

} // namespace stencil

inline double burgers_reaction_g(double u) { return 10.0 * (u - 2.0) * std::sqrt(std::abs(u - 1.0)); }

inline double burgers_reaction_dg(double u)
{
    const double d = std::max(std::abs(u - 1.0), 1e-12);
    const double sgn = u >= 1.0 ? 1.0 : -1.0;
    return 10.0 * std::sqrt(d) + 5.0 * (u - 2.0) * sgn / std::sqrt(d);
}

// Heaviside with H(0) = 1/2.
inline double heaviside(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? 0.0 : 0.5); }

inline double brusselator_source(const ProblemConstants& c, double t, double x, double y)
{
    if (t < c.source_on) return 0.0;
    const double dx = x - c.source_x, dy = y - c.source_y;
    return dx * dx + dy * dy <= c.source_radius * c.source_radius ? c.source_strength : 0.0;
}

inline RhsFunction make_rhs(const ProblemSpec& spec)
{
    validate(spec);
    RhsFunction f;
    f.state_dim = spec.state_dim();
    const std::size_t n = spec.grid.n;
    const double h = spec.grid.h();
    const double inv_h = 1.0 / h, inv_h2 = 1.0 / (h * h);
    const double eta = spec.eta;
    const ProblemConstants c = spec.extra;

    switch (spec.kind) {
    case ProblemKind::DiffAdv: {
        auto apply = [=](std::span<const double> u, std::span<double> out) {
            stencil::second_difference(u, inv_h2, out);
            if (eta != 0.0)
                for (std::size_t i = 0; i < n; ++i) out[i] += eta * stencil::upwind_difference(u, i, eta, inv_h);
        };
        f.eval = [=](double, std::span<const double> y, std::span<double> out) { apply(y, out); };
        f.jvp = [=](double, std::span<const double>, std::span<const double> v, std::span<double> out) {
            apply(v, out);
        };
        break;
    }
    case ProblemKind::BurgersReaction: {
        f.eval = [=](double, std::span<const double> u, std::span<double> out) {
            for (std::size_t i = 0; i < n; ++i) {
                const double speed = eta * u[i];
                out[i] = speed * stencil::upwind_difference(u, i, speed, inv_h) + burgers_reaction_g(u[i]);
            }
        };
        f.jvp = [=](double, std::span<const double> u, std::span<const double> v, std::span<double> out) {
            for (std::size_t i = 0; i < n; ++i) {
                const double speed = eta * u[i];
                out[i] = eta * v[i] * stencil::upwind_difference(u, i, speed, inv_h)
                         + speed * stencil::upwind_difference(v, i, speed, inv_h)
                         + burgers_reaction_dg(u[i]) * v[i];
            }
        };
        break;
    }
    case ProblemKind::PorousMedium: {
        const double m = c.m;
        f.eval = [=](double, std::span<const double> u, std::span<double> out) {
            Vector um(n);
            for (std::size_t i = 0; i < n; ++i) um[i] = std::pow(u[i], m);
            stencil::second_difference(um, inv_h2, out);
            if (eta != 0.0)
                for (std::size_t i = 0; i < n; ++i) out[i] += eta * stencil::upwind_difference(u, i, eta, inv_h);
        };
        f.jvp = [=](double, std::span<const double> u, std::span<const double> v, std::span<double> out) {
            Vector w(n);
            for (std::size_t i = 0; i < n; ++i) w[i] = m * std::pow(u[i], m - 1.0) * v[i];
            stencil::second_difference(w, inv_h2, out);
            if (eta != 0.0)
                for (std::size_t i = 0; i < n; ++i) out[i] += eta * stencil::upwind_difference(v, i, eta, inv_h);
        };
        break;
    }
    case ProblemKind::ViscousBurgers: {
        f.eval = [=](double, std::span<const double> u, std::span<double> out) {
            stencil::second_difference(u, inv_h2, out);
            for (std::size_t i = 0; i < n; ++i) {
                const double speed = -eta * u[i];
                out[i] += speed * stencil::upwind_difference(u, i, speed, inv_h);
            }
        };
        f.jvp = [=](double, std::span<const double> u, std::span<const double> v, std::span<double> out) {
            stencil::second_difference(v, inv_h2, out);
            for (std::size_t i = 0; i < n; ++i) {
                const double speed = -eta * u[i];
                out[i] += -eta * v[i] * stencil::upwind_difference(u, i, speed, inv_h)
                          + speed * stencil::upwind_difference(v, i, speed, inv_h);
            }
        };
        break;
    }
    case ProblemKind::AllenCahn: {
        f.eval = [=](double, std::span<const double> u, std::span<double> out) {
            stencil::second_difference(u, inv_h2, out);
            for (std::size_t i = 0; i < n; ++i) out[i] += eta * u[i] * (1.0 - u[i] * u[i]);
        };
        f.jvp = [=](double, std::span<const double> u, std::span<const double> v, std::span<double> out) {
            stencil::second_difference(v, inv_h2, out);
            for (std::size_t i = 0; i < n; ++i) out[i] += eta * (1.0 - 3.0 * u[i] * u[i]) * v[i];
        };
        break;
    }
    case ProblemKind::Brusselator2D: {
        const std::size_t nn = n * n;
        const double alpha = c.bruss_alpha;
        f.eval = [=](double t, std::span<const double> y, std::span<double> out) {
            auto u = y.subspan(0, nn), v = y.subspan(nn, nn);
            auto fu = out.subspan(0, nn), fv = out.subspan(nn, nn);
            stencil::laplacian_2d(u, n, inv_h2, fu);
            stencil::laplacian_2d(v, n, inv_h2, fv);
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t i = 0; i < n; ++i) {
                    const std::size_t k = j * n + i;
                    const double uu = u[k], vv = v[k];
                    const double u2v = uu * uu * vv;
                    fu[k] = alpha * fu[k] + 1.0 + u2v - 4.4 * uu
                            + brusselator_source(c, t, static_cast<double>(i) * h, static_cast<double>(j) * h);
                    fv[k] = alpha * fv[k] + 3.4 * uu - u2v;
                }
        };
        f.jvp = [=](double, std::span<const double> y, std::span<const double> dy, std::span<double> out) {
            auto u = y.subspan(0, nn), v = y.subspan(nn, nn);
            auto du = dy.subspan(0, nn), dv = dy.subspan(nn, nn);
            auto fu = out.subspan(0, nn), fv = out.subspan(nn, nn);
            stencil::laplacian_2d(du, n, inv_h2, fu);
            stencil::laplacian_2d(dv, n, inv_h2, fv);
            for (std::size_t k = 0; k < nn; ++k) {
                const double uv2 = 2.0 * u[k] * v[k], u2 = u[k] * u[k];
                fu[k] = alpha * fu[k] + (uv2 - 4.4) * du[k] + u2 * dv[k];
                fv[k] = alpha * fv[k] + (3.4 - uv2) * du[k] - u2 * dv[k];
            }
        };
        break;
    }
    }
    return f;
}

/// Initial value of the benchmark at x (1D kinds only).
inline double initial_value_1d(const ProblemSpec& spec, double x)
{
    const ProblemConstants& c = spec.extra;
    switch (spec.kind) {
    case ProblemKind::DiffAdv: {
        const double d = x - 0.5;
        return std::exp(-d * d / (2.0 * c.sigma0 * c.sigma0));
    }
    case ProblemKind::BurgersReaction:
        return 2.0 + c.eps1 * std::sin(c.omega1 * x) + c.eps2 * std::sin(c.omega2 * x + c.phi);
    case ProblemKind::PorousMedium:
        return 1.0 + heaviside(c.x1 - x) + heaviside(x - c.x2);
    case ProblemKind::ViscousBurgers: {
        const double z = 2.0 * x - 1.0;
        const double bump = std::abs(z) < 1.0 ? std::numbers::e * std::exp(-1.0 / (1.0 - z * z)) : 0.0;
        const double d = x - c.x0;
        return 1.0 + bump + 0.5 * std::exp(-d * d / (2.0 * c.sigma * c.sigma));
    }
    case ProblemKind::AllenCahn:
        return c.amp * (1.0 + std::cos(c.omega1 * x));
    case ProblemKind::Brusselator2D:
        break;
    }
    throw std::invalid_argument("initial_value_1d: not a 1D problem");
}

inline Vector initial_condition(const ProblemSpec& spec)
{
    validate(spec);
    const std::size_t n = spec.grid.n;
    const double h = spec.grid.h();
    Vector y(spec.state_dim());
    if (spec.kind == ProblemKind::Brusselator2D) {
        const std::size_t nn = n * n;
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i) {
                const double x = static_cast<double>(i) * h, yy = static_cast<double>(j) * h;
                y[j * n + i] = 22.0 * yy * std::pow(1.0 - yy, 1.5);
                y[nn + j * n + i] = 27.0 * x * std::pow(1.0 - x, 1.5);
            }
        return y;
    }
    for (std::size_t i = 0; i < n; ++i) y[i] = initial_value_1d(spec, static_cast<double>(i) * h);
    return y;
}

/// Explicit Euler stability bound min(1/(2n^2), 1/(|eta| n)).
inline double cfl_limit(std::size_t n, double eta)
{
    const double nd = static_cast<double>(n);
    const double diffusion = 1.0 / (2.0 * nd * nd);
    if (eta == 0.0) return diffusion;
    return std::min(diffusion, 1.0 / (std::abs(eta) * nd));
}

/// Defined for the linear diffusion-advection problem only.
inline std::optional<double> cfl_limit(const ProblemSpec& spec)
{
    if (spec.kind != ProblemKind::DiffAdv) return std::nullopt;
    return cfl_limit(spec.grid.n, spec.eta);
}

/// Continuum solution of the diffusion-advection problem on the real line,
/// folded onto [0,1) by the nearest periodic image of the centre.
inline Vector analytic_solution_diffadv(const ProblemSpec& spec, double t)
{
    if (spec.kind != ProblemKind::DiffAdv) throw std::invalid_argument("analytic solution needs diffadv");
    const double s0 = spec.extra.sigma0;
    const double sig = std::sqrt(s0 * s0 + 2.0 * t);
    double centre = 0.5 - spec.eta * t;
    centre -= std::floor(centre);
    const std::size_t n = spec.grid.n;
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double d = static_cast<double>(i) * spec.grid.h() - centre;
        d -= std::round(d);
        y[i] = s0 / sig * std::exp(-d * d / (2.0 * sig * sig));
    }
    return y;
}

/// Eigenvalue of the discrete diffusion-advection operator for the Fourier
/// mode exp(i * 2 pi k j / n).
inline std::complex<double> diffadv_symbol(std::size_t n, double eta, std::size_t k)
{
    const double h = 1.0 / static_cast<double>(n);
    const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    const std::complex<double> I(0.0, 1.0);
    std::complex<double> lam = (2.0 * std::cos(w) - 2.0) / (h * h);
    if (eta > 0.0) lam += eta * (std::exp(I * w) - 1.0) / h;
    if (eta < 0.0) lam += eta * (1.0 - std::exp(-I * w)) / h;
    return lam;
}

/// Exact solution of the semi-discrete (spatially discretized, continuous in
/// time) diffusion-advection system: exp(t A) y0 via the discrete Fourier
/// basis that diagonalizes the circulant operator A.
inline Vector semidiscrete_solution_diffadv(std::size_t n, double eta, std::span<const double> y0, double t)
{
    std::vector<std::complex<double>> roots(n);
    for (std::size_t m = 0; m < n; ++m) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n);
        roots[m] = {std::cos(a), std::sin(a)};
    }
    std::vector<std::complex<double>> coef(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += y0[j] * std::conj(roots[(j * k) % n]);
        coef[k] = s * std::exp(diffadv_symbol(n, eta, k) * t);
    }
    Vector y(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::complex<double> s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += coef[k] * roots[(j * k) % n];
        y[j] = s.real() / static_cast<double>(n);
    }
    return y;
}

} // namespace adaptstep
