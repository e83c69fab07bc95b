#pragma once

// Adaptive run loop, reference solutions, sweeps and CSV emission.

#include <adaptstep/controllers.hpp>
#include <adaptstep/csv.hpp>
#include <adaptstep/integrators.hpp>
#include <adaptstep/problems.hpp>
#include <adaptstep/schemes.hpp>

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace adaptstep {

/// Raised by the run loop when the integration cannot finish: the step size
/// fell to the lower clamp, the accepted-step limit was exceeded or the
/// Krylov budget ran out.
class RunFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StepRecord {
    std::size_t k = 0; // index of the step being attempted; retries share it
    double t = 0.0;
    double tau = 0.0;
    std::size_t krylov_iters = 0;
    double cost_per_unit = 0.0;
    double err_est = 0.0; // +inf for attempts that failed inside the solver
    bool accepted = false;
};

struct IntegrationOptions {
    double tol = 1e-4;
    double initial_tau = 0.0;
    std::size_t restart = 20;
    JacobianMode jacobian = JacobianMode::Analytic;
    std::size_t max_accepted_steps = 10'000'000;
    std::optional<std::size_t> krylov_budget;
    CostModel cost_model = identity_cost;
    bool keep_trace = true;
};

struct Integration {
    Vector y_final;
    std::vector<StepRecord> trace;
    std::size_t total_krylov_iters = 0;
    std::size_t n_steps = 0;
    std::size_t n_rejections = 0;
};

/// Adaptive integration of y' = f(t, y) from 0 to t_final.
inline Integration integrate(const RhsFunction& rhs, const Vector& y0, double t_final, const SchemeSpec& scheme,
                             const ControllerParams& params, const IntegrationOptions& opts)
{
    if (!(t_final > 0.0)) throw std::invalid_argument("t_final must be positive");
    if (!(opts.initial_tau > 0.0)) throw std::invalid_argument("initial step must be positive");

    StepOptions sopts;
    sopts.lin_tol = opts.tol / 10.0;
    sopts.restart = opts.restart;
    sopts.jacobian = opts.jacobian;

    const double tau_min = 1e-14 * t_final;
    Integration res;
    res.y_final = y0;
    ControllerState state;
    double t = 0.0;
    double tau = opts.initial_tau;

    auto record = [&](const StepRecord& r) {
        res.total_krylov_iters += r.krylov_iters;
        if (opts.keep_trace) res.trace.push_back(r);
    };

    while (t < t_final) {
        const double remaining = t_final - t;
        bool truncated = false;
        double tau_try = std::max(tau, tau_min);
        if (tau_try >= remaining) {
            tau_try = remaining;
            truncated = true;
        }
        if (tau < tau_min && !truncated)
            throw RunFailure("step size reached the lower clamp at t=" + csv::format_double(t));

        StepOutcome outcome;
        bool failed = false;
        std::size_t spent = 0;
        try {
            outcome = step(scheme, rhs, t, res.y_final, tau_try, sopts);
            spent = outcome.krylov_iters;
        } catch (const StepFailure& e) {
            failed = true;
            spent = e.krylov_iters;
        }
        const double cost = opts.cost_model(std::max<std::size_t>(spent, 1)) / tau_try;

        if (failed || !accept_step(outcome.err_est, opts.tol)) {
            record({res.n_steps, t, tau_try, spent, cost,
                    failed ? std::numeric_limits<double>::infinity() : outcome.err_est, false});
            ++res.n_rejections;
            tau = failed ? 0.5 * tau_try : p_controller_step(tau_try, outcome.err_est, opts.tol, params);
            state.reset();
        } else {
            record({res.n_steps, t, tau_try, spent, cost, outcome.err_est, true});
            res.y_final = std::move(outcome.y_new);
            ++res.n_steps;
            if (truncated) {
                t = t_final;
                break;
            }
            t += tau_try;
            const CostSample sample{std::max<std::size_t>(spent, 1), tau_try, cost};
            tau = next_step_size(state, sample, outcome.err_est, opts.tol, params);
        }

        if (res.n_steps > opts.max_accepted_steps) throw RunFailure("accepted-step limit exceeded");
        if (opts.krylov_budget && res.total_krylov_iters > *opts.krylov_budget)
            throw RunFailure("Krylov iteration budget exhausted");
    }
    return res;
}

// ---------------------------------------------------------------------------
// Configurations and results

struct NamedController {
    std::string name;
    ControllerParams params;
};

inline std::optional<NamedController> named_controller(std::string_view name)
{
    auto p = controller_preset(name);
    if (!p) return std::nullopt;
    return NamedController{std::string(name), *p};
}

enum class ReferenceMode {
    Off,     // no global error
    Auto,    // exact semi-discrete solution for diffadv, cached reference otherwise
    Compute, // as Auto, but build and cache missing references
};

struct RunConfig {
    ProblemSpec problem;
    SchemeName scheme = SchemeName::CN;
    NamedController controller{"traditional", traditional_params()};
    double tol = 1e-4;
    std::optional<double> exponent_order; // defaults to the scheme's estimator power
    std::size_t restart = 20;
    JacobianMode jacobian = JacobianMode::Analytic;
    ReferenceMode reference = ReferenceMode::Auto;
    std::filesystem::path cache_dir = ".adaptstep-cache";
    std::optional<std::size_t> krylov_budget;
    bool keep_trace = true;
};

inline void validate(const RunConfig& cfg)
{
    validate(cfg.problem);
    if (!(cfg.tol >= 1e-12 && cfg.tol <= 1e-1)) throw std::invalid_argument("tol must lie in [1e-12, 1e-1]");
    if (cfg.restart == 0) throw std::invalid_argument("restart length must be positive");
    validate(cfg.controller.params);
}

struct RunResult {
    std::size_t total_krylov_iters = 0;
    std::optional<double> normalized_iters;
    std::size_t n_steps = 0;
    std::size_t n_rejections = 0;
    std::optional<double> global_error;
    double wall_time_s = 0.0;
    bool ok = true;
    std::string message;
    Vector y_final;
};

/// Work normalized to explicit Euler at unit CFL number.
inline double normalized_cost(double total_iters, double cfl, double t_final)
{
    if (!(total_iters > 0.0 && cfl > 0.0 && t_final > 0.0))
        throw std::invalid_argument("normalized_cost: arguments must be positive");
    return total_iters * cfl / t_final;
}

inline double initial_step(const ProblemSpec& p)
{
    if (auto cfl = cfl_limit(p)) return *cfl;
    return p.t_final * 1e-4;
}

inline ControllerParams effective_params(const RunConfig& cfg)
{
    ControllerParams p = cfg.controller.params;
    p.exponent_order = cfg.exponent_order.value_or(make_scheme(cfg.scheme).estimator_power);
    return p;
}

// ---------------------------------------------------------------------------
// Reference solutions

inline std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string problem_key(const ProblemSpec& p)
{
    const auto& c = p.extra;
    std::vector<std::string> f{std::string(to_string(p.kind)), std::to_string(p.grid.n), csv::format_double(p.eta),
                               csv::format_double(p.t_final)};
    for (double v : {c.sigma0, c.eps1, c.eps2, c.omega1, c.omega2, c.phi, c.m, c.x1, c.x2, c.x0, c.sigma, c.amp,
                     c.bruss_alpha, c.source_strength, c.source_x, c.source_y, c.source_radius, c.source_on})
        f.push_back(csv::format_double(v));
    return csv::join(f);
}

constexpr double reference_tol = 1e-11;

inline std::string reference_key(const ProblemSpec& p)
{
    return problem_key(p) + ",sdirk54,traditional," + csv::format_double(reference_tol);
}

inline std::filesystem::path reference_path(const ProblemSpec& p, const std::filesystem::path& dir)
{
    char name[64];
    std::snprintf(name, sizeof name, "ref-%016llx.txt", static_cast<unsigned long long>(fnv1a(reference_key(p))));
    return dir / name;
}

inline std::optional<Vector> load_reference(const ProblemSpec& p, const std::filesystem::path& dir)
{
    std::ifstream in(reference_path(p, dir));
    if (!in) return std::nullopt;
    std::string key;
    std::getline(in, key);
    if (key != reference_key(p)) return std::nullopt;
    Vector y;
    y.reserve(p.state_dim());
    double v;
    while (in >> v) y.push_back(v);
    if (y.size() != p.state_dim()) return std::nullopt;
    return y;
}

/// Tight-tolerance SDIRK54 solution at t_final with the traditional controller.
inline Vector compute_reference(const ProblemSpec& p)
{
    IntegrationOptions o;
    o.tol = reference_tol;
    o.initial_tau = initial_step(p);
    o.keep_trace = false;
    ControllerParams params = traditional_params();
    params.exponent_order = sdirk54().estimator_power;
    return integrate(make_rhs(p), initial_condition(p), p.t_final, sdirk54(), params, o).y_final;
}

inline Vector ensure_reference(const ProblemSpec& p, const std::filesystem::path& dir)
{
    if (auto y = load_reference(p, dir)) return *y;
    Vector y = compute_reference(p);
    std::filesystem::create_directories(dir);
    std::ofstream out(reference_path(p, dir));
    out << reference_key(p) << '\n';
    for (double v : y) out << csv::format_double(v) << '\n';
    return y;
}

/// Reference solution on the run grid at t_final, if one is available.
inline std::optional<Vector> reference_solution(const ProblemSpec& p, ReferenceMode mode,
                                                const std::filesystem::path& dir)
{
    if (mode == ReferenceMode::Off) return std::nullopt;
    if (p.kind == ProblemKind::DiffAdv)
        return semidiscrete_solution_diffadv(p.grid.n, p.eta, initial_condition(p), p.t_final);
    if (mode == ReferenceMode::Compute) return ensure_reference(p, dir);
    return load_reference(p, dir);
}

// ---------------------------------------------------------------------------
// Single run

/// Integrates one configuration. Throws std::invalid_argument for invalid
/// configurations and RunFailure when the non-termination guard trips.
inline RunResult run(const RunConfig& cfg, std::vector<StepRecord>* trace = nullptr)
{
    validate(cfg);
    const ProblemSpec& p = cfg.problem;
    const auto start = std::chrono::steady_clock::now();

    IntegrationOptions o;
    o.tol = cfg.tol;
    o.initial_tau = initial_step(p);
    o.restart = cfg.restart;
    o.jacobian = cfg.jacobian;
    o.krylov_budget = cfg.krylov_budget;
    o.keep_trace = trace != nullptr;
    Integration integ = integrate(make_rhs(p), initial_condition(p), p.t_final, make_scheme(cfg.scheme),
                                  effective_params(cfg), o);

    RunResult r;
    r.total_krylov_iters = integ.total_krylov_iters;
    r.n_steps = integ.n_steps;
    r.n_rejections = integ.n_rejections;
    if (auto cfl = cfl_limit(p); cfl && r.total_krylov_iters > 0)
        r.normalized_iters = normalized_cost(static_cast<double>(r.total_krylov_iters), *cfl, p.t_final);
    if (auto ref = reference_solution(p, cfg.reference, cfg.cache_dir))
        r.global_error = max_abs_diff(integ.y_final, *ref);
    r.y_final = std::move(integ.y_final);
    r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (trace) *trace = std::move(integ.trace);
    return r;
}

// ---------------------------------------------------------------------------
// CSV

inline const char* results_header =
    "problem,scheme,controller,n,eta,tol,total_iters,normalized_iters,n_steps,n_rejections,global_error,"
    "wall_time_s,status";

inline const char* trace_header = "k,t,tau,iters,cost_per_unit,err_est,accepted";

inline std::string results_row(const RunConfig& cfg, const RunResult& r)
{
    std::vector<std::string> f{std::string(to_string(cfg.problem.kind)),
                               std::string(to_string(cfg.scheme)),
                               cfg.controller.name,
                               std::to_string(cfg.problem.grid.n),
                               csv::format_double(cfg.problem.eta),
                               csv::format_double(cfg.tol)};
    if (r.ok) {
        f.push_back(std::to_string(r.total_krylov_iters));
        f.push_back(csv::format_optional(r.normalized_iters));
        f.push_back(std::to_string(r.n_steps));
        f.push_back(std::to_string(r.n_rejections));
        f.push_back(csv::format_optional(r.global_error));
        f.push_back(csv::format_double(r.wall_time_s));
        f.push_back("ok");
    } else {
        for (int i = 0; i < 5; ++i) f.emplace_back();
        f.push_back(csv::format_double(r.wall_time_s));
        f.push_back("failed");
    }
    return csv::join(f);
}

inline void write_trace(std::ostream& out, const std::vector<StepRecord>& trace)
{
    out << trace_header << '\n';
    for (const auto& s : trace)
        out << s.k << ',' << csv::format_double(s.t) << ',' << csv::format_double(s.tau) << ',' << s.krylov_iters
            << ',' << csv::format_double(s.cost_per_unit) << ',' << csv::format_double(s.err_est) << ','
            << (s.accepted ? 1 : 0) << '\n';
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
    RunConfig config;
    RunResult result;
};

/// Cartesian product in the order problems x schemes x controllers x tols.
inline std::vector<RunConfig> expand_grid(const std::vector<ProblemSpec>& problems,
                                          const std::vector<SchemeName>& schemes,
                                          const std::vector<NamedController>& controllers,
                                          const std::vector<double>& tols, const RunConfig& base = {})
{
    std::vector<RunConfig> out;
    for (const auto& p : problems)
        for (auto s : schemes)
            for (const auto& c : controllers)
                for (double tol : tols) {
                    RunConfig cfg = base;
                    cfg.problem = p;
                    cfg.scheme = s;
                    cfg.controller = c;
                    cfg.tol = tol;
                    out.push_back(cfg);
                }
    return out;
}

/// Failures become rows with ok=false instead of aborting the sweep.
inline RunResult run_guarded(const RunConfig& cfg)
{
    const auto start = std::chrono::steady_clock::now();
    try {
        return run(cfg);
    } catch (const std::exception& e) {
        RunResult r;
        r.ok = false;
        r.message = e.what();
        r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return r;
    }
}

/// Runs every configuration, optionally on several threads. on_row is called
/// from the calling thread in grid order, as soon as each prefix of the grid
/// has finished.
inline std::vector<SweepRow> sweep(const std::vector<RunConfig>& configs,
                                   const std::function<void(const SweepRow&)>& on_row = {},
                                   unsigned threads = 1)
{
    std::vector<SweepRow> rows(configs.size());
    std::vector<char> done(configs.size(), 0);
    std::mutex mu;
    std::condition_variable cv;
    std::size_t next = 0;

    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lk(mu);
                if (next >= configs.size()) return;
                i = next++;
            }
            RunResult r = run_guarded(configs[i]);
            {
                std::lock_guard lk(mu);
                rows[i] = SweepRow{configs[i], std::move(r)};
                rows[i].result.y_final.clear();
                done[i] = 1;
            }
            cv.notify_all();
        }
    };

    threads = std::max(1u, threads);
    std::vector<std::thread> pool;
    if (threads > 1)
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);

    for (std::size_t emitted = 0; emitted < configs.size(); ++emitted) {
        if (threads == 1) {
            rows[emitted] = SweepRow{configs[emitted], run_guarded(configs[emitted])};
            rows[emitted].result.y_final.clear();
        } else {
            std::unique_lock lk(mu);
            cv.wait(lk, [&] { return done[emitted] != 0; });
        }
        if (on_row) on_row(rows[emitted]);
    }
    for (auto& th : pool) th.join();
    return rows;
}

} // namespace adaptstep
