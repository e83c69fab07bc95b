#pragma once

// Fitting the cost-aware controller parameters (alpha, beta, lambda, delta)
// by differential evolution. A parameter set is scored by the Krylov work it
// needs on a grid of diffusion-advection runs with SDIRK54:
//     f1 = sum of R,   f2 = sum of Q(R, T),
// where T is the work of the traditional controller on the same run and
// Q(x, y) = x/y, multiplied by the penalty when x > y.

#include <adaptstep/controllers.hpp>
#include <adaptstep/harness.hpp>

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

namespace adaptstep {

enum class FitnessKind { F1, F2 };

inline std::optional<FitnessKind> fitness_from_name(std::string_view s)
{
    if (s == "f1") return FitnessKind::F1;
    if (s == "f2") return FitnessKind::F2;
    return std::nullopt;
}

struct GridPoint {
    std::size_t n = 0;
    double eta = 0.0;
    double tol = 0.0;

    auto key() const { return std::make_tuple(n, eta, tol); }
    friend bool operator<(const GridPoint& a, const GridPoint& b) { return a.key() < b.key(); }
};

inline std::vector<std::pair<std::size_t, double>> default_tuning_problems()
{
    return {{100, 10.0}, {300, 100.0}, {500, 0.0}, {500, 1000.0}};
}

inline std::vector<double> default_tuning_tols() { return {1e-2, 1e-3, 1e-4, 1e-5, 1e-7}; }

struct FitnessSpec {
    FitnessKind kind = FitnessKind::F1;
    double penalty = 10.0;
    std::vector<std::pair<std::size_t, double>> problems = default_tuning_problems();
    std::vector<double> tols = default_tuning_tols();
    std::map<GridPoint, double> baseline; // traditional-controller work, needed by f2
    SchemeName scheme = SchemeName::SDIRK54;
    double t_final = 0.2;
    std::optional<std::size_t> krylov_budget; // per run; exceeding it counts as a failure
    unsigned threads = 1;

    std::vector<GridPoint> points() const
    {
        std::vector<GridPoint> out;
        for (const auto& [n, eta] : problems)
            for (double tol : tols) out.push_back({n, eta, tol});
        return out;
    }

    /// Contribution of one failed run.
    double failure_penalty() const { return 1e6 * static_cast<double>(problems.size() * tols.size()); }
};

/// Q(x, y) = (x / y) * (1 if x <= y else penalty).
inline double q_penalty(double x, double y, double penalty)
{
    const double r = x / y;
    return r <= 1.0 ? r : r * penalty;
}

inline RunConfig tuning_config(const GridPoint& g, const ControllerParams& params, const std::string& name,
                               const FitnessSpec& spec)
{
    RunConfig cfg;
    cfg.problem = make_problem(ProblemKind::DiffAdv, g.n, g.eta, spec.t_final);
    cfg.scheme = spec.scheme;
    cfg.controller = NamedController{name, params};
    cfg.tol = g.tol;
    cfg.reference = ReferenceMode::Off;
    cfg.krylov_budget = spec.krylov_budget;
    return cfg;
}

/// Total Krylov iterations per grid point, nullopt for failed runs.
inline std::vector<std::optional<double>> grid_costs(const ControllerParams& params, const std::string& name,
                                                     const FitnessSpec& spec)
{
    std::vector<RunConfig> configs;
    for (const auto& g : spec.points()) configs.push_back(tuning_config(g, params, name, spec));
    std::vector<std::optional<double>> out;
    for (const auto& row : sweep(configs, {}, spec.threads)) {
        if (row.result.ok) out.push_back(static_cast<double>(row.result.total_krylov_iters));
        else out.push_back(std::nullopt);
    }
    return out;
}

/// Fills spec.baseline with the traditional controller's work. Throws if a
/// baseline run fails, since f2 has no yardstick for that point.
inline void compute_baseline(FitnessSpec& spec)
{
    const auto pts = spec.points();
    const auto costs = grid_costs(traditional_params(), "traditional", spec);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!costs[i] || *costs[i] <= 0.0)
            throw std::runtime_error("baseline run failed for n=" + std::to_string(pts[i].n));
        spec.baseline[pts[i]] = *costs[i];
    }
}

/// Parameters outside the admissible set score as if every run had failed.
inline double fitness(const ControllerParams& gamma, const FitnessSpec& spec)
{
    const auto pts = spec.points();
    if (!check_params(gamma).empty()) return spec.failure_penalty() * static_cast<double>(pts.size());
    if (spec.kind == FitnessKind::F2)
        for (const auto& g : pts)
            if (!spec.baseline.count(g)) throw std::invalid_argument("fitness: f2 needs a baseline for every point");

    ControllerParams p = gamma;
    p.variant = ControllerVariant::CostAware;
    const auto costs = grid_costs(p, "custom", spec);
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!costs[i]) {
            total += spec.failure_penalty();
        } else if (spec.kind == FitnessKind::F1) {
            total += *costs[i];
        } else {
            total += q_penalty(*costs[i], spec.baseline.at(pts[i]), spec.penalty);
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// Differential evolution

using ParamVector = std::array<double, 4>; // alpha, beta, lambda, delta

inline ControllerParams to_params(const ParamVector& x)
{
    ControllerParams p;
    p.alpha = x[0];
    p.beta = x[1];
    p.lambda = x[2];
    p.delta = x[3];
    return p;
}

struct Bounds {
    double lo = 0.0;
    double hi = 0.0;
};

struct DESettings {
    std::size_t population = 24;
    std::size_t generations = 60;
    double F = 0.8;
    double CR = 0.9;
    std::array<Bounds, 4> bounds{{{1e-6, 3.0}, {1e-6, 2.0}, {1.05, 3.0}, {0.3, 0.95}}};
    std::uint64_t seed = 1;
};

inline void validate(const DESettings& s)
{
    if (s.population == 0 || s.generations == 0) throw std::invalid_argument("population and generations must be positive");
    if (!(s.F > 0.0 && s.F <= 2.0)) throw std::invalid_argument("F must lie in (0,2]");
    if (!(s.CR >= 0.0 && s.CR <= 1.0)) throw std::invalid_argument("CR must lie in [0,1]");
    for (const auto& b : s.bounds)
        if (!(b.lo <= b.hi)) throw std::invalid_argument("empty parameter bounds");
    const auto& b = s.bounds;
    if (!(b[0].lo > 0.0 && b[1].lo > 0.0 && b[2].lo >= 1.05 && b[3].lo > 0.0 && b[3].hi <= 0.95))
        throw std::invalid_argument("bounds must keep alpha, beta > 0, lambda >= 1.05, delta in (0, 0.95]");
}

struct GenerationRecord {
    std::size_t gen = 0; // 0 is the initial population
    double best_f = 0.0;
    ParamVector best{};
};

struct DEResult {
    ParamVector best{};
    double best_f = 0.0;
    std::vector<GenerationRecord> history;
    std::size_t evaluations = 0;
};

using Objective = std::function<double(const ParamVector&)>;

/// rand/1/bin with clamping to the box. The trial replaces its target when it
/// is no worse. With fewer than four members the donors are drawn with
/// replacement from the whole population.
inline DEResult differential_evolution(const Objective& objective, const DESettings& s,
                                       const std::function<void(const GenerationRecord&)>& on_generation = {})
{
    validate(s);
    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t np = s.population;
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    auto clamp = [&](ParamVector& x) {
        for (std::size_t d = 0; d < 4; ++d) x[d] = std::clamp(x[d], s.bounds[d].lo, s.bounds[d].hi);
    };

    DEResult res;
    std::vector<ParamVector> pop(np);
    std::vector<double> fit(np);
    for (auto& x : pop)
        for (std::size_t d = 0; d < 4; ++d) x[d] = s.bounds[d].lo + unit(rng) * (s.bounds[d].hi - s.bounds[d].lo);
    for (std::size_t i = 0; i < np; ++i) {
        fit[i] = objective(pop[i]);
        ++res.evaluations;
    }

    auto record = [&](std::size_t gen) {
        const auto it = std::min_element(fit.begin(), fit.end());
        const std::size_t b = static_cast<std::size_t>(it - fit.begin());
        if (gen == 0 || fit[b] < res.best_f) {
            res.best_f = fit[b];
            res.best = pop[b];
        }
        res.history.push_back({gen, res.best_f, res.best});
        if (on_generation) on_generation(res.history.back());
    };
    record(0);

    for (std::size_t gen = 1; gen <= s.generations; ++gen) {
        for (std::size_t i = 0; i < np; ++i) {
            std::size_t r[3];
            if (np >= 4) {
                for (std::size_t m = 0; m < 3; ++m) {
                    do {
                        r[m] = pick(np);
                    } while (r[m] == i || (m > 0 && r[m] == r[0]) || (m > 1 && r[m] == r[1]));
                }
            } else {
                for (auto& v : r) v = pick(np);
            }
            ParamVector trial = pop[i];
            const std::size_t j_rand = pick(4);
            for (std::size_t d = 0; d < 4; ++d)
                if (d == j_rand || unit(rng) < s.CR) trial[d] = pop[r[0]][d] + s.F * (pop[r[1]][d] - pop[r[2]][d]);
            clamp(trial);
            const double f = objective(trial);
            ++res.evaluations;
            if (f <= fit[i]) {
                pop[i] = trial;
                fit[i] = f;
            }
        }
        record(gen);
    }
    return res;
}

inline DEResult tune(const FitnessSpec& spec, const DESettings& s,
                     const std::function<void(const GenerationRecord&)>& on_generation = {})
{
    return differential_evolution([&](const ParamVector& x) { return fitness(to_params(x), spec); }, s,
                                  on_generation);
}

} // namespace adaptstep
