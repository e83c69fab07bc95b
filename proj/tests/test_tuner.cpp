#include <adaptstep/tuner.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace adaptstep;

namespace {

FitnessSpec tiny_spec(FitnessKind kind)
{
    FitnessSpec s;
    s.kind = kind;
    s.problems = {{40, 5.0}};
    s.tols = {1e-2, 1e-3};
    s.scheme = SchemeName::SDIRK23;
    s.t_final = 0.02;
    return s;
}

double surrogate(const ParamVector& x)
{
    const ParamVector target{0.7, 0.3, 1.4, 0.6};
    double s = 0;
    for (std::size_t d = 0; d < 4; ++d) s += (x[d] - target[d]) * (x[d] - target[d]);
    return s;
}

} // namespace

TEST(Tuner, PenaltyFunction)
{
    EXPECT_DOUBLE_EQ(q_penalty(1, 2, 10), 0.5);
    EXPECT_DOUBLE_EQ(q_penalty(2, 1, 10), 20.0);
    EXPECT_DOUBLE_EQ(q_penalty(3, 3, 10), 1.0);
    EXPECT_DOUBLE_EQ(q_penalty(2, 1, 1), 2.0);
}

TEST(Tuner, FitnessNames)
{
    EXPECT_EQ(fitness_from_name("f1"), FitnessKind::F1);
    EXPECT_EQ(fitness_from_name("f2"), FitnessKind::F2);
    EXPECT_FALSE(fitness_from_name("f3"));
}

TEST(Tuner, DefaultGrid)
{
    FitnessSpec s;
    EXPECT_EQ(s.points().size(), 20u);
    EXPECT_EQ(s.scheme, SchemeName::SDIRK54);
}

TEST(Tuner, F1IsTotalWork)
{
    auto spec = tiny_spec(FitnessKind::F1);
    auto gamma = nonpenalized_params();
    double expected = 0;
    for (const auto& g : spec.points()) {
        ControllerParams p = gamma;
        p.variant = ControllerVariant::CostAware;
        expected += static_cast<double>(run(tuning_config(g, p, "custom", spec)).total_krylov_iters);
    }
    EXPECT_EQ(fitness(gamma, spec), expected);
    EXPECT_EQ(fitness(gamma, spec), fitness(gamma, spec));
}

TEST(Tuner, F2UsesBaseline)
{
    auto spec = tiny_spec(FitnessKind::F2);
    EXPECT_THROW(fitness(nonpenalized_params(), spec), std::invalid_argument);
    compute_baseline(spec);
    ASSERT_EQ(spec.baseline.size(), 2u);
    const auto costs = grid_costs(nonpenalized_params(), "custom", spec);
    double expected = 0;
    const auto pts = spec.points();
    for (std::size_t i = 0; i < pts.size(); ++i) expected += q_penalty(*costs[i], spec.baseline.at(pts[i]), 10.0);
    EXPECT_DOUBLE_EQ(fitness(nonpenalized_params(), spec), expected);

    // measured against itself every point scores one
    FitnessSpec self = spec;
    for (std::size_t i = 0; i < pts.size(); ++i) self.baseline[pts[i]] = *costs[i];
    EXPECT_DOUBLE_EQ(fitness(nonpenalized_params(), self), 2.0);
}

TEST(Tuner, InfeasibleAndFailedRuns)
{
    auto spec = tiny_spec(FitnessKind::F1);
    auto bad = nonpenalized_params();
    bad.lambda = 1.0;
    EXPECT_EQ(fitness(bad, spec), spec.failure_penalty() * 2);

    spec.krylov_budget = 1;
    EXPECT_EQ(fitness(nonpenalized_params(), spec), 2 * spec.failure_penalty());
}

TEST(DifferentialEvolution, RecoversSurrogateMinimum)
{
    DESettings s;
    s.population = 20;
    s.generations = 150;
    s.seed = 7;
    auto res = differential_evolution(surrogate, s);
    const ParamVector target{0.7, 0.3, 1.4, 0.6};
    for (std::size_t d = 0; d < 4; ++d) EXPECT_NEAR(res.best[d], target[d], 1e-3);
    EXPECT_EQ(res.evaluations, 20u * 151u);
}

TEST(DifferentialEvolution, HistoryIsMonotoneAndReproducible)
{
    DESettings s;
    s.population = 8;
    s.generations = 30;
    s.seed = 42;
    std::size_t calls = 0;
    auto a = differential_evolution(surrogate, s, [&](const GenerationRecord&) { ++calls; });
    auto b = differential_evolution(surrogate, s);
    ASSERT_EQ(a.history.size(), 31u);
    EXPECT_EQ(calls, 31u);
    EXPECT_EQ(a.history.front().gen, 0u);
    for (std::size_t i = 1; i < a.history.size(); ++i) {
        EXPECT_LE(a.history[i].best_f, a.history[i - 1].best_f);
        EXPECT_EQ(a.history[i].best_f, b.history[i].best_f);
        EXPECT_EQ(a.history[i].best, b.history[i].best);
    }
    EXPECT_EQ(a.best_f, surrogate(a.best));
}

TEST(DifferentialEvolution, StaysInsideBounds)
{
    DESettings s;
    s.population = 10;
    s.generations = 20;
    s.F = 1.9;
    bool inside = true;
    auto wrapped = [&](const ParamVector& x) {
        for (std::size_t d = 0; d < 4; ++d) inside = inside && x[d] >= s.bounds[d].lo && x[d] <= s.bounds[d].hi;
        return -x[0] - x[2]; // pushes toward the upper faces
    };
    differential_evolution(wrapped, s);
    EXPECT_TRUE(inside);
}

TEST(DifferentialEvolution, TinyPopulations)
{
    for (std::size_t np : {1u, 2u, 3u}) {
        DESettings s;
        s.population = np;
        s.generations = 5;
        auto res = differential_evolution(surrogate, s);
        EXPECT_EQ(res.history.size(), 6u);
        EXPECT_TRUE(std::isfinite(res.best_f));
    }
}

TEST(DifferentialEvolution, SettingsValidation)
{
    DESettings s;
    s.population = 0;
    EXPECT_THROW(validate(s), std::invalid_argument);
    s = {};
    s.CR = 1.5;
    EXPECT_THROW(validate(s), std::invalid_argument);
    s = {};
    s.bounds[2] = {1.0, 2.0};
    EXPECT_THROW(validate(s), std::invalid_argument);
}
