#pragma once

// Step-size controllers.
//
// The traditional controller is the classic P controller
//     tau_new = safety * tau * (tol / err)^(1/p).
// The cost-aware controller treats the step size as the variable of a
// one-dimensional descent on log(cost per unit time). With
//     Delta = (log c_k - log c_{k-1}) / (log tau_k - log tau_{k-1}),
//     s     = exp(-alpha * tanh(beta * Delta)),
// the proposal is tau_k * lambda for s in [1, lambda), tau_k * delta for s in
// [delta, 1) and tau_k * s otherwise; the step actually taken is the minimum
// of the proposal and the P-controller bound.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace adaptstep {

enum class ControllerVariant { Traditional, CostAware };

struct ControllerParams {
    double alpha = 0.65241444;
    double beta = 0.26862269;
    double lambda = 1.37412002;
    double delta = 0.64446017;
    double safety = 0.9;
    double exponent_order = 2.0; // p in (tol/err)^(1/p)
    ControllerVariant variant = ControllerVariant::CostAware;
    double max_growth = 5.0;
    double err_floor = 1e-30;
};

inline ControllerParams nonpenalized_params()
{
    return ControllerParams{};
}

inline ControllerParams penalized_params()
{
    ControllerParams p;
    p.alpha = 1.19735982;
    p.beta = 0.44611854;
    p.lambda = 1.38440318;
    p.delta = 0.73715227;
    return p;
}

inline ControllerParams traditional_params()
{
    ControllerParams p;
    p.variant = ControllerVariant::Traditional;
    return p;
}

/// Presets: "traditional", "nonpenalized", "penalized".
inline std::optional<ControllerParams> controller_preset(std::string_view name)
{
    if (name == "traditional") return traditional_params();
    if (name == "nonpenalized") return nonpenalized_params();
    if (name == "penalized") return penalized_params();
    return std::nullopt;
}

/// Empty string when valid, otherwise the first violated constraint.
inline std::string check_params(const ControllerParams& p)
{
    if (!(p.safety > 0.0 && p.safety <= 1.0)) return "safety must lie in (0,1]";
    if (!(p.exponent_order > 0.0)) return "exponent order must be positive";
    if (p.variant == ControllerVariant::Traditional) return {};
    if (!(p.alpha > 0.0 && p.beta > 0.0 && p.lambda > 0.0 && p.delta > 0.0))
        return "alpha, beta, lambda, delta must be positive";
    if (!(p.lambda >= 1.05)) return "lambda must be at least 1.05";
    if (!(p.delta <= 0.95)) return "delta must be at most 0.95";
    if (!(p.lambda <= std::exp(p.alpha))) return "lambda must not exceed exp(alpha)";
    if (!(p.delta >= std::exp(-p.alpha))) return "delta must not be below exp(-alpha)";
    return {};
}

inline void validate(const ControllerParams& p)
{
    if (auto msg = check_params(p); !msg.empty()) throw std::invalid_argument(msg);
}

/// Cost of a step as a function of its Krylov iterations. Identity by default.
using CostModel = std::function<double(std::size_t iterations)>;

inline double identity_cost(std::size_t iterations) { return static_cast<double>(iterations); }

inline CostModel affine_cost(double a, double b)
{
    return [a, b](std::size_t i) { return a + b * static_cast<double>(i); };
}

struct CostSample {
    std::size_t iterations = 1;
    double tau = 0.0;
    double cost_per_unit = 0.0;
};

inline CostSample make_cost_sample(std::size_t iterations, double tau, const CostModel& model = identity_cost)
{
    return CostSample{iterations, tau, model(iterations) / tau};
}

struct ControllerState {
    std::optional<double> prev_tau;
    std::optional<double> prev_cost;
    int bootstrap_phase = 0; // accepted samples seen since the last reset, capped at 2

    void reset()
    {
        prev_tau.reset();
        prev_cost.reset();
        bootstrap_phase = 0;
    }
};

inline double p_controller_step(double tau, double err_est, double tol, const ControllerParams& params)
{
    const double err = std::max(err_est, params.err_floor);
    const double factor = params.safety * std::pow(tol / err, 1.0 / params.exponent_order);
    return tau * std::min(factor, params.max_growth);
}

/// s(Delta) = exp(-alpha tanh(beta Delta)).
inline double cost_aware_factor_raw(double delta_slope, const ControllerParams& params)
{
    return std::exp(-params.alpha * std::tanh(params.beta * delta_slope));
}

/// Step ratio after the lambda/delta band has been applied.
inline double cost_aware_factor(double delta_slope, const ControllerParams& params)
{
    const double s = cost_aware_factor_raw(delta_slope, params);
    if (s >= 1.0 && s < params.lambda) return params.lambda;
    if (s >= params.delta && s < 1.0) return params.delta;
    return s;
}

/// Finite-difference slope of log cost against log tau; 0 when the two step
/// sizes coincide to 1e-12 in the log.
inline double cost_slope(double prev_tau, double prev_cost, double tau, double cost)
{
    const double dT = std::log(tau) - std::log(prev_tau);
    if (std::abs(dT) < 1e-12) return 0.0;
    return (std::log(cost) - std::log(prev_cost)) / dT;
}

inline double cost_aware_proposal(const ControllerState& state, const CostSample& current,
                                  const ControllerParams& params)
{
    if (!state.prev_tau || !state.prev_cost)
        throw std::logic_error("cost_aware_proposal: no previous cost sample");
    const double prev_tau = state.prev_tau.value_or(0.0);
    const double prev_cost = state.prev_cost.value_or(0.0);
    if (!(current.tau > 0.0 && current.cost_per_unit > 0.0 && prev_tau > 0.0 && prev_cost > 0.0))
        throw std::logic_error("cost_aware_proposal: step sizes and costs must be positive");
    const double slope = cost_slope(prev_tau, prev_cost, current.tau, current.cost_per_unit);
    return current.tau * cost_aware_factor(slope, params);
}

/// Step size after an accepted step. Updates the cost memory in state.
///
/// Without a previous sample (start of the run or after a reset) the cost-aware
/// controller proposes lambda * tau to create a contrast in step size.
inline double next_step_size(ControllerState& state, const CostSample& current, double err_est, double tol,
                             const ControllerParams& params)
{
    const double bound = p_controller_step(current.tau, err_est, tol, params);
    if (params.variant == ControllerVariant::Traditional) return bound;

    const double proposal = state.prev_tau ? cost_aware_proposal(state, current, params)
                                           : params.lambda * current.tau;
    state.prev_tau = current.tau;
    state.prev_cost = current.cost_per_unit;
    state.bootstrap_phase = std::min(state.bootstrap_phase + 1, 2);
    return std::min(proposal, bound);
}

/// Boundary inclusive.
inline bool accept_step(double err_est, double tol) { return err_est <= tol; }

} // namespace adaptstep
