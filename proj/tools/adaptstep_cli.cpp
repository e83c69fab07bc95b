// adaptstep command-line driver: run, sweep, tune, reference.

#include <adaptstep/adaptstep.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

using namespace adaptstep;

namespace {

constexpr int exit_invalid = 2;
constexpr int exit_failure = 3;

struct InvalidConfig : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Flags read from a JSON object are inserted right after the subcommand, so
// anything given on the command line wins.
std::vector<std::string> expand_config(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<long>(i));
            break;
        }
    }
    if (path.empty()) return args;

    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot open config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidConfig(std::string("config file: ") + e.what());
    }
    if (!j.is_object()) throw InvalidConfig("config file must hold a JSON object");

    auto scalar = [](const nlohmann::json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_number_integer()) return std::to_string(v.get<long long>());
        if (v.is_number()) return csv::format_double(v.get<double>());
        throw InvalidConfig("config values must be strings, numbers, booleans or arrays");
    };
    std::vector<std::string> extra;
    for (const auto& [key, value] : j.items()) {
        const std::string flag = "--" + key;
        if (value.is_boolean()) {
            if (value.get<bool>()) extra.push_back(flag);
        } else if (value.is_array()) {
            std::vector<std::string> parts;
            for (const auto& v : value) parts.push_back(scalar(v));
            extra.push_back(flag);
            extra.push_back(csv::join(parts));
        } else {
            extra.push_back(flag);
            extra.push_back(scalar(value));
        }
    }
    const std::size_t at = args.empty() ? 0 : 1;
    args.insert(args.begin() + static_cast<long>(at), extra.begin(), extra.end());
    return args;
}

template <class T, class F>
std::vector<T> parse_list(const std::string& s, F&& conv, const char* what)
{
    std::vector<T> out;
    if (s.empty()) return out;
    for (const auto& item : csv::split(s)) {
        try {
            out.push_back(conv(item));
        } catch (const std::exception&) {
            throw InvalidConfig(std::string("bad ") + what + ": '" + item + "'");
        }
    }
    return out;
}

ProblemKind parse_problem(const std::string& s)
{
    if (auto k = problem_from_name(s)) return *k;
    throw InvalidConfig("unknown problem '" + s + "'");
}

SchemeName parse_scheme(const std::string& s)
{
    if (auto k = scheme_from_name(s)) return *k;
    throw InvalidConfig("unknown scheme '" + s + "'");
}

NamedController parse_controller(const std::string& s)
{
    if (auto c = named_controller(s)) return *c;
    throw InvalidConfig("unknown controller '" + s + "'");
}

ReferenceMode parse_reference(const std::string& s)
{
    if (s == "auto") return ReferenceMode::Auto;
    if (s == "compute") return ReferenceMode::Compute;
    if (s == "off") return ReferenceMode::Off;
    throw InvalidConfig("--reference must be auto, compute or off");
}

JacobianMode parse_jacobian(const std::string& s)
{
    if (s == "analytic") return JacobianMode::Analytic;
    if (s == "fd") return JacobianMode::FiniteDifference;
    throw InvalidConfig("--jacobian must be analytic or fd");
}

std::optional<ControllerParams> parse_params(const std::string& s)
{
    if (s.empty()) return std::nullopt;
    auto v = parse_list<double>(s, [](const std::string& x) { return std::stod(x); }, "--params value");
    if (v.size() != 4) throw InvalidConfig("--params takes alpha,beta,lambda,delta");
    ControllerParams p;
    p.alpha = v[0];
    p.beta = v[1];
    p.lambda = v[2];
    p.delta = v[3];
    if (auto msg = check_params(p); !msg.empty()) throw InvalidConfig("--params: " + msg);
    return p;
}

double to_double(const std::string& s) { return std::stod(s); }
std::size_t to_size(const std::string& s) { return static_cast<std::size_t>(std::stoull(s)); }

std::ostream* open_out(const std::string& path, std::ofstream& file)
{
    if (path.empty() || path == "-") return &std::cout;
    file.open(path);
    if (!file) throw InvalidConfig("cannot write " + path);
    return &file;
}

struct Common {
    std::string reference = "auto";
    std::string cache_dir = ".adaptstep-cache";
    std::string jacobian = "analytic";
    std::size_t restart = 20;
    std::size_t budget = 0;
};

void add_common(CLI::App* app, Common& c)
{
    app->add_option("--reference", c.reference, "auto|compute|off")->capture_default_str();
    app->add_option("--cache-dir", c.cache_dir, "reference cache directory")->capture_default_str();
    app->add_option("--jacobian", c.jacobian, "analytic|fd")->capture_default_str();
    app->add_option("--restart", c.restart, "GMRES restart length")->capture_default_str();
    app->add_option("--budget", c.budget, "Krylov iteration budget per run (0: none)");
}

void apply_common(RunConfig& cfg, const Common& c)
{
    cfg.reference = parse_reference(c.reference);
    cfg.cache_dir = c.cache_dir;
    cfg.jacobian = parse_jacobian(c.jacobian);
    cfg.restart = c.restart;
    if (c.budget > 0) cfg.krylov_budget = c.budget;
}

} // namespace

int main(int argc, char** argv)
{
    std::vector<std::string> args;
    try {
        args = expand_config(argc, argv);
    } catch (const InvalidConfig& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_invalid;
    }

    CLI::App app{"Adaptive step size control for Newton-Krylov implicit Runge-Kutta integrators"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.add_option("--config", "JSON file with flag values (command line wins)");

    // run
    auto* run_cmd = app.add_subcommand("run", "integrate a single configuration");
    std::string problem = "diffadv", scheme = "cn", controller = "traditional", params, out, trace;
    std::size_t n = 500;
    double eta = 0.0, tol = 1e-4, t_final = 0.0;
    Common common;
    run_cmd->add_option("--problem", problem, "problem name")->capture_default_str();
    run_cmd->add_option("--scheme", scheme, "cn|sdirk23|sdirk54")->capture_default_str();
    run_cmd->add_option("--controller", controller, "traditional|nonpenalized|penalized")->capture_default_str();
    run_cmd->add_option("--n", n, "grid points per dimension")->capture_default_str();
    run_cmd->add_option("--eta", eta, "advection speed / Peclet number")->capture_default_str();
    run_cmd->add_option("--tol", tol, "tolerance")->capture_default_str();
    run_cmd->add_option("--t-final", t_final, "final time (default: per problem)");
    run_cmd->add_option("--params", params, "override alpha,beta,lambda,delta");
    run_cmd->add_option("--out", out, "results CSV (default stdout)");
    run_cmd->add_option("--trace", trace, "per-step trace CSV");
    add_common(run_cmd, common);

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Cartesian product of configurations to CSV");
    std::string s_problems = "diffadv", s_schemes = "cn", s_controllers = "traditional,nonpenalized,penalized";
    std::string s_n = "500", s_eta = "0", s_grid, s_tols = "1e-2,1e-3,1e-4,1e-6,1e-8", s_out;
    double s_t_final = 0.0;
    unsigned s_threads = 1;
    Common s_common;
    sweep_cmd->add_option("--problem", s_problems, "comma list")->capture_default_str();
    sweep_cmd->add_option("--scheme", s_schemes, "comma list")->capture_default_str();
    sweep_cmd->add_option("--controller", s_controllers, "comma list")->capture_default_str();
    sweep_cmd->add_option("--n", s_n, "comma list")->capture_default_str();
    sweep_cmd->add_option("--eta", s_eta, "comma list")->capture_default_str();
    sweep_cmd->add_option("--grid", s_grid, "n:eta pairs, replaces --n/--eta (e.g. 100:10,500:0)");
    sweep_cmd->add_option("--tol", s_tols, "comma list")->capture_default_str();
    sweep_cmd->add_option("--t-final", s_t_final, "final time (default: per problem)");
    sweep_cmd->add_option("--threads", s_threads, "parallel runs")->capture_default_str();
    sweep_cmd->add_option("--out", s_out, "results CSV (default stdout)");
    add_common(sweep_cmd, s_common);

    // tune
    auto* tune_cmd = app.add_subcommand("tune", "fit controller parameters by differential evolution");
    std::string fitness_name = "f1", t_grid, t_tols, t_out;
    FitnessSpec fspec;
    DESettings de;
    std::size_t t_budget = 0;
    tune_cmd->add_option("--fitness", fitness_name, "f1|f2")->capture_default_str();
    tune_cmd->add_option("--penalty", fspec.penalty, "penalty factor of f2")->capture_default_str();
    tune_cmd->add_option("--seed", de.seed, "random seed")->capture_default_str();
    tune_cmd->add_option("--pop", de.population, "population size")->capture_default_str();
    tune_cmd->add_option("--gens", de.generations, "generations")->capture_default_str();
    tune_cmd->add_option("--F", de.F, "mutation factor")->capture_default_str();
    tune_cmd->add_option("--CR", de.CR, "crossover rate")->capture_default_str();
    tune_cmd->add_option("--grid", t_grid, "n:eta pairs (default: 100:10,300:100,500:0,500:1000)");
    tune_cmd->add_option("--tol", t_tols, "comma list (default: 1e-2,1e-3,1e-4,1e-5,1e-7)");
    tune_cmd->add_option("--budget", t_budget, "Krylov iteration budget per run (0: none)");
    tune_cmd->add_option("--threads", fspec.threads, "parallel runs per fitness evaluation")->capture_default_str();
    tune_cmd->add_option("--out", t_out, "history CSV (default stdout)");

    // reference
    auto* ref_cmd = app.add_subcommand("reference", "build and cache a reference solution");
    std::string r_problem = "burgers-reaction", r_cache = ".adaptstep-cache";
    std::size_t r_n = 300;
    double r_eta = 0.0, r_t_final = 0.0;
    ref_cmd->add_option("--problem", r_problem, "problem name")->capture_default_str();
    ref_cmd->add_option("--n", r_n, "grid points per dimension")->capture_default_str();
    ref_cmd->add_option("--eta", r_eta, "advection speed / Peclet number")->capture_default_str();
    ref_cmd->add_option("--t-final", r_t_final, "final time (default: per problem)");
    ref_cmd->add_option("--cache-dir", r_cache, "reference cache directory")->capture_default_str();

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_invalid;
    }

    auto t_final_opt = [](double v) { return v > 0.0 ? std::optional<double>(v) : std::nullopt; };

    try {
        if (*run_cmd) {
            RunConfig cfg;
            cfg.problem = make_problem(parse_problem(problem), n, eta, t_final_opt(t_final));
            cfg.scheme = parse_scheme(scheme);
            cfg.controller = parse_controller(controller);
            if (auto p = parse_params(params)) cfg.controller = NamedController{"custom", *p};
            cfg.tol = tol;
            apply_common(cfg, common);
            try {
                validate(cfg);
            } catch (const std::invalid_argument& e) {
                throw InvalidConfig(e.what());
            }

            std::vector<StepRecord> steps;
            RunResult r;
            int code = 0;
            try {
                r = run(cfg, trace.empty() ? nullptr : &steps);
            } catch (const RunFailure& e) {
                r.ok = false;
                r.message = e.what();
                code = exit_failure;
            } catch (const StepFailure& e) {
                r.ok = false;
                r.message = e.what();
                code = exit_failure;
            }
            std::ofstream file;
            std::ostream* os = open_out(out, file);
            *os << results_header << '\n' << results_row(cfg, r) << '\n';
            if (!trace.empty() && r.ok) {
                std::ofstream tf(trace);
                if (!tf) throw InvalidConfig("cannot write " + trace);
                write_trace(tf, steps);
            }
            if (!r.ok) std::cerr << "run failed: " << r.message << '\n';
            return code;
        }

        if (*sweep_cmd) {
            auto kinds = parse_list<ProblemKind>(s_problems, parse_problem, "problem");
            auto schemes = parse_list<SchemeName>(s_schemes, parse_scheme, "scheme");
            auto ctrls = parse_list<NamedController>(s_controllers, parse_controller, "controller");
            auto tols = parse_list<double>(s_tols, to_double, "tolerance");
            std::vector<std::pair<std::size_t, double>> pairs;
            if (!s_grid.empty()) {
                for (const auto& item : csv::split(s_grid)) {
                    auto nv = csv::split(item, ':');
                    if (nv.size() != 2) throw InvalidConfig("--grid entries must look like n:eta");
                    try {
                        pairs.emplace_back(to_size(nv[0]), to_double(nv[1]));
                    } catch (const std::exception&) {
                        throw InvalidConfig("bad --grid entry '" + item + "'");
                    }
                }
            } else {
                for (auto nn : parse_list<std::size_t>(s_n, to_size, "n"))
                    for (auto ee : parse_list<double>(s_eta, to_double, "eta")) pairs.emplace_back(nn, ee);
            }
            std::vector<ProblemSpec> problems;
            for (auto k : kinds)
                for (const auto& [nn, ee] : pairs) problems.push_back(make_problem(k, nn, ee, t_final_opt(s_t_final)));

            RunConfig base;
            apply_common(base, s_common);
            auto configs = expand_grid(problems, schemes, ctrls, tols, base);
            for (const auto& c : configs) {
                try {
                    validate(c);
                } catch (const std::invalid_argument& e) {
                    throw InvalidConfig(e.what());
                }
            }
            std::ofstream file;
            std::ostream* os = open_out(s_out, file);
            *os << results_header << '\n' << std::flush;
            std::size_t failed = 0;
            sweep(configs,
                  [&](const SweepRow& row) {
                      *os << results_row(row.config, row.result) << '\n' << std::flush;
                      if (!row.result.ok) {
                          ++failed;
                          std::cerr << "failed: " << to_string(row.config.problem.kind) << " n=" << row.config.problem.grid.n
                                    << " tol=" << row.config.tol << ": " << row.result.message << '\n';
                      }
                  },
                  s_threads);
            return 0;
        }

        if (*tune_cmd) {
            auto kind = fitness_from_name(fitness_name);
            if (!kind) throw InvalidConfig("--fitness must be f1 or f2");
            fspec.kind = *kind;
            if (!(fspec.penalty > 0.0)) throw InvalidConfig("--penalty must be positive");
            if (!t_grid.empty()) {
                fspec.problems.clear();
                for (const auto& item : csv::split(t_grid)) {
                    auto nv = csv::split(item, ':');
                    if (nv.size() != 2) throw InvalidConfig("--grid entries must look like n:eta");
                    fspec.problems.emplace_back(to_size(nv[0]), to_double(nv[1]));
                }
            }
            if (!t_tols.empty()) fspec.tols = parse_list<double>(t_tols, to_double, "tolerance");
            if (t_budget > 0) fspec.krylov_budget = t_budget;
            try {
                validate(de);
            } catch (const std::invalid_argument& e) {
                throw InvalidConfig(e.what());
            }
            if (fspec.kind == FitnessKind::F2) compute_baseline(fspec);

            std::ofstream file;
            std::ostream* os = open_out(t_out, file);
            *os << "gen,best_f,alpha,beta,lambda,delta\n" << std::flush;
            auto res = tune(fspec, de, [&](const GenerationRecord& g) {
                *os << g.gen << ',' << csv::format_double(g.best_f);
                for (double v : g.best) *os << ',' << csv::format_double(v);
                *os << '\n' << std::flush;
            });
            std::cerr << "best f=" << csv::format_double(res.best_f) << " params=" << csv::format_double(res.best[0])
                      << ',' << csv::format_double(res.best[1]) << ',' << csv::format_double(res.best[2]) << ','
                      << csv::format_double(res.best[3]) << '\n';
            return 0;
        }

        if (*ref_cmd) {
            ProblemSpec p = make_problem(parse_problem(r_problem), r_n, r_eta, t_final_opt(r_t_final));
            try {
                validate(p);
            } catch (const std::invalid_argument& e) {
                throw InvalidConfig(e.what());
            }
            if (p.kind == ProblemKind::DiffAdv) {
                std::cout << "diffadv uses the exact semi-discrete solution; nothing to cache\n";
                return 0;
            }
            ensure_reference(p, r_cache);
            std::cout << reference_path(p, r_cache).string() << '\n';
            return 0;
        }
    } catch (const InvalidConfig& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_invalid;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_invalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_failure;
    }
    return 0;
}
