#pragma once

// Butcher tableaus of the implicit Runge-Kutta schemes.
//
// Each scheme carries an embedded lower-order weight vector; the local error
// estimate is tau * sum_j (b_j - bhat_j) k_j, which scales like
// tau^estimator_power on smooth problems.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace adaptstep {

enum class SchemeName { CN, SDIRK23, SDIRK54 };

inline std::string_view to_string(SchemeName s)
{
    switch (s) {
    case SchemeName::CN: return "cn";
    case SchemeName::SDIRK23: return "sdirk23";
    case SchemeName::SDIRK54: return "sdirk54";
    }
    return "?";
}

inline std::optional<SchemeName> scheme_from_name(std::string_view s)
{
    for (auto k : {SchemeName::CN, SchemeName::SDIRK23, SchemeName::SDIRK54})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

struct SchemeSpec {
    SchemeName name = SchemeName::CN;
    std::size_t stages = 0;
    std::vector<double> a; // row-major, lower triangular (diagonal included)
    std::vector<double> b;
    std::vector<double> b_hat;
    std::vector<double> c;
    int order = 0;
    int estimator_power = 0;

    double coeff(std::size_t i, std::size_t j) const { return a[i * stages + j]; }
};

inline SchemeSpec crank_nicolson()
{
    // Trapezoidal rule written as a two-stage scheme with an explicit first
    // stage; the embedded solution is explicit Euler.
    return SchemeSpec{SchemeName::CN, 2, {0.0, 0.0, 0.5, 0.5}, {0.5, 0.5}, {1.0, 0.0}, {0.0, 1.0}, 2, 2};
}

inline SchemeSpec sdirk23()
{
    const double g = (3.0 + std::sqrt(3.0)) / 6.0;
    // Embedded first-order solution y + tau * k2.
    return SchemeSpec{SchemeName::SDIRK23, 2, {g, 0.0, 1.0 - 2.0 * g, g}, {0.5, 0.5}, {0.0, 1.0},
                      {g, 1.0 - g}, 3, 2};
}

inline SchemeSpec sdirk54()
{
    // gamma = 1/4, stiffly accurate, L-stable; third-order embedded weights.
    SchemeSpec s;
    s.name = SchemeName::SDIRK54;
    s.stages = 5;
    s.a = {
        1.0 / 4,       0.0,            0.0,          0.0,         0.0,
        1.0 / 2,       1.0 / 4,        0.0,          0.0,         0.0,
        17.0 / 50,     -1.0 / 25,      1.0 / 4,      0.0,         0.0,
        371.0 / 1360,  -137.0 / 2720,  15.0 / 544,   1.0 / 4,     0.0,
        25.0 / 24,     -49.0 / 48,     125.0 / 16,   -85.0 / 12,  1.0 / 4,
    };
    s.b = {25.0 / 24, -49.0 / 48, 125.0 / 16, -85.0 / 12, 1.0 / 4};
    s.b_hat = {59.0 / 48, -17.0 / 96, 225.0 / 32, -85.0 / 12, 0.0};
    s.c = {1.0 / 4, 3.0 / 4, 11.0 / 20, 1.0 / 2, 1.0};
    s.order = 4;
    s.estimator_power = 4;
    return s;
}

inline SchemeSpec make_scheme(SchemeName name)
{
    switch (name) {
    case SchemeName::CN: return crank_nicolson();
    case SchemeName::SDIRK23: return sdirk23();
    case SchemeName::SDIRK54: return sdirk54();
    }
    return crank_nicolson();
}

} // namespace adaptstep
