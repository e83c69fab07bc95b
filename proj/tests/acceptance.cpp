// Acceptance checks. With no argument every criterion runs; otherwise only the
// numbered one. Prints one PASS/FAIL line per criterion, exits 1 on any FAIL.

#include <adaptstep/adaptstep.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

using namespace adaptstep;

namespace {

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail << " [" << what << "]";
        }
    }
};

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

double mean(const Vector& y)
{
    double s = 0;
    for (double v : y) s += v;
    return s / static_cast<double>(y.size());
}

// 1 ------------------------------------------------------------------------

Verdict gmres_oracle()
{
    Verdict v;
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<std::size_t> dim(2, 50);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst_err = 0, worst_ratio = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = dim(rng);
        const auto N = static_cast<Eigen::Index>(n);
        Eigen::MatrixXd A(N, N);
        for (Eigen::Index i = 0; i < N; ++i)
            for (Eigen::Index j = 0; j < N; ++j) A(i, j) = u(rng) / std::sqrt(double(n));
        A += 3.0 * Eigen::MatrixXd::Identity(N, N);
        Eigen::VectorXd b(N);
        for (Eigen::Index i = 0; i < N; ++i) b[i] = u(rng);
        const Eigen::VectorXd x = A.partialPivLu().solve(b);

        LinearMap op{n, [&A](std::span<const double> in, std::span<double> out) {
                         Eigen::Map<const Eigen::VectorXd> xi(in.data(), static_cast<Eigen::Index>(in.size()));
                         Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size())) = A * xi;
                     }};
        const double tol = 1e-11;
        auto rep = gmres_solve(op, std::span<const double>(b.data(), n), Vector(n, 0.0), tol);
        v.require(rep.converged, "trial " + std::to_string(trial) + " did not converge");
        if (!rep.converged) continue;
        Eigen::Map<const Eigen::VectorXd> xs(rep.solution.data(), N);
        worst_err = std::max(worst_err, (xs - x).cwiseAbs().maxCoeff());
        worst_ratio = std::max(worst_ratio, (A * xs - b).norm() / tol);
    }
    v.require(worst_err <= 1e-8, "max error " + fmt(worst_err));
    // recursive residual vs true residual: allow roundoff in the recomputation
    v.require(worst_ratio <= 1.0 + 1e-6, "residual/tol " + fmt(worst_ratio));
    v.detail << " max error " << fmt(worst_err) << ", max residual/tol " << fmt(worst_ratio);
    return v;
}

// 2 ------------------------------------------------------------------------

Verdict orders()
{
    Verdict v;
    const std::size_t n = 128;
    const auto rhs = make_rhs(make_problem(ProblemKind::DiffAdv, n, 0.0));
    // smooth data: the lowest Fourier mode (the default Gaussian excites
    // stiff modes that Crank-Nicolson barely damps at these step sizes)
    Vector y0(n);
    for (std::size_t i = 0; i < n; ++i) y0[i] = std::sin(2 * std::numbers::pi * double(i) / double(n));
    const double T = 0.05;
    const Vector exact = semidiscrete_solution_diffadv(n, 0.0, y0, T);
    const std::vector<double> taus{T / 10, T / 20, T / 40, T / 80};
    const double cn = convergence_order(crank_nicolson(), rhs, y0, T, taus, exact).order;
    const double s23 = convergence_order(sdirk23(), rhs, y0, T, taus, exact).order;
    const double s54 = convergence_order(sdirk54(), rhs, y0, T, {T / 5, T / 10, T / 20, T / 40}, exact).order;
    v.require(std::abs(cn - 2.0) <= 0.2, "CN");
    v.require(std::abs(s23 - 3.0) <= 0.2, "SDIRK23");
    v.require(std::abs(s54 - 4.0) <= 0.3, "SDIRK54");
    v.detail << " CN " << fmt(cn) << ", SDIRK23 " << fmt(s23) << ", SDIRK54 " << fmt(s54);
    return v;
}

// 3 ------------------------------------------------------------------------

Verdict stability()
{
    Verdict v;
    RhsFunction f;
    f.state_dim = 1;
    const double lam = -1e6;
    f.eval = [lam](double, std::span<const double> y, std::span<double> out) { out[0] = lam * y[0]; };
    f.jvp = [lam](double, std::span<const double>, std::span<const double> d, std::span<double> out) {
        out[0] = lam * d[0];
    };
    StepOptions o;
    o.lin_tol = 1e-14;
    const double r54 = std::abs(step(sdirk54(), f, 0.0, Vector{1.0}, 1.0, o).y_new[0]);
    const double rcn = std::abs(step(crank_nicolson(), f, 0.0, Vector{1.0}, 1.0, o).y_new[0]);
    v.require(r54 < 1e-3, "SDIRK54 damping");
    v.require(std::abs(rcn - 1.0) < 1e-5, "CN magnitude");
    v.detail << " |R54| " << fmt(r54) << ", |Rcn| " << fmt(rcn);
    return v;
}

// 5, 6 ---------------------------------------------------------------------

const std::vector<double>& c5_tols()
{
    static const std::vector<double> t{1e-2, 1e-3, 1e-4, 1e-6, 1e-8};
    return t;
}

struct GridResults {
    std::map<std::pair<std::string, double>, RunResult> r;
};

const GridResults& c5_grid()
{
    static const GridResults g = [] {
        GridResults out;
        std::vector<NamedController> ctrls;
        for (const char* n : {"traditional", "nonpenalized", "penalized"}) ctrls.push_back(*named_controller(n));
        const auto cfgs =
            expand_grid({make_problem(ProblemKind::DiffAdv, 500, 0.0)}, {SchemeName::CN}, ctrls, c5_tols());
        for (const auto& row : sweep(cfgs)) out.r[{row.config.controller.name, row.config.tol}] = row.result;
        return out;
    }();
    return g;
}

Verdict reversed_c()
{
    Verdict v;
    const auto& g = c5_grid();
    for (const auto& [k, r] : g.r) v.require(r.ok, k.first + " failed at tol " + fmt(k.second));
    if (!v.pass) return v;
    auto cost = [&](const char* c, double tol) { return *g.r.at({c, tol}).normalized_iters; };

    const bool a = cost("traditional", 1e-2) > cost("traditional", 1e-4);
    v.require(a, "(a) traditional not reversed");

    // tolerances sorted tight -> loose; cost may not grow as tol loosens
    bool b = true;
    const auto& tols = c5_tols();
    for (std::size_t i = 0; i + 1 < tols.size(); ++i)
        b = b && cost("nonpenalized", tols[i]) <= 1.05 * cost("nonpenalized", tols[i + 1]);
    v.require(b, "(b) nonpenalized not monotone");

    bool c = true;
    for (double tol : tols) c = c && cost("nonpenalized", tol) <= cost("traditional", tol);
    const double gain = cost("traditional", 1e-2) / cost("nonpenalized", 1e-2);
    c = c && gain >= 1.3;
    v.require(c, "(c) nonpenalized not cheaper everywhere or gain < 1.3");

    v.detail << " cost trad/nonpen/pen:";
    for (double tol : tols)
        v.detail << " " << fmt(tol) << "=" << fmt(cost("traditional", tol)) << "/" << fmt(cost("nonpenalized", tol))
                 << "/" << fmt(cost("penalized", tol));
    v.detail << "; gain@1e-2 " << fmt(gain);
    return v;
}

Verdict accuracy()
{
    Verdict v;
    const auto& g = c5_grid();
    double worst = 0;
    for (double tol : c5_tols()) {
        const auto& t = g.r.at({"traditional", tol});
        for (const char* c : {"nonpenalized", "penalized"}) {
            const auto& p = g.r.at({c, tol});
            if (!t.ok || !p.ok || !t.global_error || !p.global_error) {
                v.require(false, std::string(c) + " missing at tol " + fmt(tol));
                continue;
            }
            const double ratio = *p.global_error / *t.global_error;
            worst = std::max(worst, ratio);
            v.require(ratio <= 2.0, std::string(c) + " error ratio " + fmt(ratio) + " at tol " + fmt(tol));
        }
    }
    v.detail << " worst error ratio " << fmt(worst);
    return v;
}

// 4 ------------------------------------------------------------------------

Verdict controller_algebra()
{
    Verdict v;
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> ua(0.05, 3.0), ub(0.01, 2.0), ud(-100.0, 100.0), u01(0.0, 1.0);
    std::size_t checked = 0, band_bad = 0, sym_bad = 0;
    while (checked < 100000) {
        ControllerParams p;
        p.variant = ControllerVariant::CostAware;
        p.alpha = ua(rng);
        p.beta = ub(rng);
        const double lmax = std::exp(p.alpha), dmin = std::exp(-p.alpha);
        if (lmax < 1.05 || dmin > 0.95) continue;
        p.lambda = 1.05 + u01(rng) * (lmax - 1.05);
        p.delta = dmin + u01(rng) * (0.95 - dmin);
        const double d = ud(rng);
        const double f = cost_aware_factor(d, p);
        const bool low = f >= dmin * (1 - 1e-14) && f <= p.delta;
        const bool high = f >= p.lambda && f <= lmax * (1 + 1e-14);
        if (!(low || high)) ++band_bad;
        if (std::abs(cost_aware_factor_raw(d, p) * cost_aware_factor_raw(-d, p) - 1.0) > 1e-12) ++sym_bad;
        ++checked;
    }
    v.require(band_bad == 0, std::to_string(band_bad) + " band violations");
    v.require(sym_bad == 0, std::to_string(sym_bad) + " symmetry violations");

    // min-dominance on recorded traces
    std::size_t steps = 0, dom_bad = 0;
    for (auto scheme : {SchemeName::CN, SchemeName::SDIRK23, SchemeName::SDIRK54})
        for (const char* c : {"nonpenalized", "penalized"})
            for (double tol : {1e-2, 1e-4, 1e-6}) {
                RunConfig cfg;
                cfg.problem = make_problem(ProblemKind::DiffAdv, 100, 10.0);
                cfg.scheme = scheme;
                cfg.controller = *named_controller(c);
                cfg.tol = tol;
                cfg.reference = ReferenceMode::Off;
                std::vector<StepRecord> tr;
                run(cfg, &tr);
                const auto params = effective_params(cfg);
                for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
                    if (!tr[i].accepted) continue;
                    ++steps;
                    if (tr[i + 1].tau > p_controller_step(tr[i].tau, tr[i].err_est, tol, params) * (1 + 1e-12))
                        ++dom_bad;
                }
            }
    v.require(dom_bad == 0, std::to_string(dom_bad) + " steps exceed the accuracy bound");
    v.detail << " " << checked << " random checks, " << steps << " trace steps";
    return v;
}

// 7 ------------------------------------------------------------------------

Verdict conservation()
{
    Verdict v;
    struct Case {
        ProblemKind kind;
        SchemeName scheme;
        double eta;
    };
    for (auto [kind, scheme, eta] : {Case{ProblemKind::DiffAdv, SchemeName::CN, 10.0},
                                     Case{ProblemKind::PorousMedium, SchemeName::SDIRK23, 1.0}}) {
        RunConfig cfg;
        cfg.problem = make_problem(kind, 200, eta);
        cfg.scheme = scheme;
        cfg.tol = 1e-6;
        cfg.reference = ReferenceMode::Off;
        auto r = run_guarded(cfg);
        v.require(r.ok, std::string(to_string(kind)) + " failed: " + r.message);
        if (!r.ok) continue;
        const double m0 = mean(initial_condition(cfg.problem));
        const double drift = std::abs(mean(r.y_final) - m0) / std::abs(m0);
        v.require(drift <= 1e-6, std::string(to_string(kind)) + " drift " + fmt(drift));
        v.detail << " " << to_string(kind) << " drift " << fmt(drift);
    }
    return v;
}

// 8 ------------------------------------------------------------------------

Verdict nonlinear_smoke()
{
    Verdict v;
    std::map<std::string, std::size_t> iters;
    for (const char* c : {"traditional", "nonpenalized", "penalized"}) {
        RunConfig cfg;
        cfg.problem = make_problem(ProblemKind::BurgersReaction, 300, 500.0);
        cfg.scheme = SchemeName::SDIRK54;
        cfg.controller = *named_controller(c);
        cfg.tol = 1e-4;
        cfg.reference = ReferenceMode::Off;
        auto r = run_guarded(cfg);
        v.require(r.ok, std::string(c) + " failed: " + r.message);
        iters[c] = r.total_krylov_iters;
    }
    if (!v.pass) return v;
    for (const char* c : {"nonpenalized", "penalized"})
        v.require(iters[c] <= iters["traditional"], std::string(c) + " more expensive");
    v.detail << " iterations trad/nonpen/pen " << iters["traditional"] << "/" << iters["nonpenalized"] << "/"
             << iters["penalized"];
    return v;
}

// 9 ------------------------------------------------------------------------

Verdict tuner_sanity()
{
    Verdict v;
    const ParamVector target{0.9, 0.4, 1.6, 0.55};
    DESettings s;
    s.population = 20;
    s.generations = 150;
    s.seed = 11;
    auto res = differential_evolution(
        [&](const ParamVector& x) {
            double q = 0;
            for (std::size_t d = 0; d < 4; ++d) q += (x[d] - target[d]) * (x[d] - target[d]);
            return q;
        },
        s);
    double worst = 0;
    for (std::size_t d = 0; d < 4; ++d) worst = std::max(worst, std::abs(res.best[d] - target[d]));
    v.require(worst <= 1e-3, "surrogate error " + fmt(worst));

    FitnessSpec spec;
    spec.kind = FitnessKind::F2;
    spec.problems = {{100, 10.0}};
    spec.tols = {1e-2, 1e-4};
    compute_baseline(spec);
    DESettings mini;
    mini.population = 6;
    mini.generations = 5;
    mini.seed = 3;
    auto tuned = tune(spec, mini);
    bool monotone = tuned.history.size() == 6;
    for (std::size_t i = 1; i < tuned.history.size(); ++i)
        monotone = monotone && tuned.history[i].best_f <= tuned.history[i - 1].best_f;
    v.require(monotone, "mini-tune best fitness not monotone");
    v.detail << " surrogate max coord error " << fmt(worst) << ", mini-tune best f2 " << fmt(tuned.best_f);
    return v;
}

} // namespace

int main(int argc, char** argv)
{
    const std::map<int, std::pair<const char*, Verdict (*)()>> criteria{
        {1, {"GMRES vs dense LU", gmres_oracle}},
        {2, {"convergence orders", orders}},
        {3, {"stability", stability}},
        {4, {"controller algebra", controller_algebra}},
        {5, {"reversed-C straightening", reversed_c}},
        {6, {"accuracy dominance", accuracy}},
        {7, {"conservation", conservation}},
        {8, {"Burgers-reaction smoke", nonlinear_smoke}},
        {9, {"tuner sanity", tuner_sanity}},
    };
    std::vector<int> which;
    if (argc > 1) {
        const int c = std::atoi(argv[1]);
        if (!criteria.count(c)) {
            std::fprintf(stderr, "unknown criterion %s\n", argv[1]);
            return 2;
        }
        which.push_back(c);
    } else {
        for (const auto& [c, _] : criteria) which.push_back(c);
    }
    bool all = true;
    for (int c : which) {
        const auto& [name, fn] = criteria.at(c);
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail << " exception: " << e.what();
        }
        std::printf("%s criterion %d: %s:%s\n", v.pass ? "PASS" : "FAIL", c, name, v.detail.str().c_str());
        std::fflush(stdout);
        all = all && v.pass;
    }
    return all ? 0 : 1;
}
