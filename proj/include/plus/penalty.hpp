#pragma once

// Quadratic spline penalty family: rho(t; lambda) = lambda^2 rho_m(t/lambda)
// where rho_m has piecewise linear derivative sum_i (u_i - v_i t) on
// [t_i, t_{i+1}). Knots t_1 = 0 < ... < t_m = gamma, side conditions
// u_1 = 1 and v_m = 0. Covers the LASSO (m=1), MCP (m=2) and SCAD (m=3).

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "plus/errors.hpp"

namespace plus {

enum class PenaltyKind { lasso, mcp, scad, custom };

inline const char* penalty_kind_name(PenaltyKind k) {
    switch (k) {
        case PenaltyKind::lasso: return "lasso";
        case PenaltyKind::mcp: return "mcp";
        case PenaltyKind::scad: return "scad";
        default: return "custom";
    }
}

struct PenaltySpec {
    PenaltyKind kind = PenaltyKind::custom;
    std::vector<double> knots;       // t_1..t_m, t_1 = 0
    std::vector<double> intercepts;  // u_1..u_m
    std::vector<double> slopes;      // v_1..v_m

    std::size_t segments() const { return knots.size(); }
    double gamma() const { return knots.back(); }

    // Extensions of (u, v, t) to signed indicator values: u(i) = u_{|i|},
    // v(i) = v_{|i|}; t(i) = t_i for i > 0, -t_{|i|+1} for i <= 0, with
    // t_{m+1} = +infinity.
    double u_at(int i) const { return intercepts[static_cast<std::size_t>(std::abs(i)) - 1]; }
    double v_at(int i) const { return slopes[static_cast<std::size_t>(std::abs(i)) - 1]; }
    double knot_at(int i) const {
        const int m = static_cast<int>(segments());
        if (i > 0) return i <= m ? knots[static_cast<std::size_t>(i) - 1]
                                 : std::numeric_limits<double>::infinity();
        const int a = -i;  // t(i) = -t_{|i|+1}
        return a + 1 <= m ? -knots[static_cast<std::size_t>(a)]
                          : -std::numeric_limits<double>::infinity();
    }
};

inline void validate(const PenaltySpec& spec) {
    const std::size_t m = spec.segments();
    if (m == 0 || spec.intercepts.size() != m || spec.slopes.size() != m)
        throw InvalidPenaltyError("penalty spec arrays must have a common positive length");
    if (spec.knots[0] != 0.0) throw InvalidPenaltyError("first knot must be 0");
    for (std::size_t i = 0; i + 1 < m; ++i)
        if (!(spec.knots[i] < spec.knots[i + 1]))
            throw InvalidPenaltyError("knots must be strictly increasing");
    if (m > 1 && !(spec.knots.back() > 0.0))
        throw InvalidPenaltyError("threshold factor gamma must be positive");
    if (std::abs(spec.intercepts[0] - 1.0) > 1e-12)
        throw InvalidPenaltyError("u_1 must equal 1");
    if (std::abs(spec.slopes[m - 1]) > 1e-12)
        throw InvalidPenaltyError("v_m must equal 0");
    for (std::size_t i = 0; i + 1 < m; ++i) {
        const double t_next = spec.knots[i + 1];
        const double left = spec.intercepts[i] - spec.slopes[i] * t_next;
        const double right = spec.intercepts[i + 1] - spec.slopes[i + 1] * t_next;
        if (std::abs(left - right) > 1e-12 * (1.0 + std::abs(left)))
            throw InvalidPenaltyError("spline derivative is discontinuous at knot "
                                      + std::to_string(i + 2));
        if (left < -1e-12) throw InvalidPenaltyError("spline derivative becomes negative");
    }
}

inline PenaltySpec make_lasso() {
    PenaltySpec s;
    s.kind = PenaltyKind::lasso;
    s.knots = {0.0};
    s.intercepts = {1.0};
    s.slopes = {0.0};
    validate(s);
    return s;
}

inline PenaltySpec make_mcp(double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw BadGammaError("mcp requires gamma > 0");
    PenaltySpec s;
    s.kind = PenaltyKind::mcp;
    s.knots = {0.0, gamma};
    s.intercepts = {1.0, 0.0};
    s.slopes = {1.0 / gamma, 0.0};
    validate(s);
    return s;
}

inline PenaltySpec make_scad(double gamma) {
    if (!(gamma > 2.0) || !std::isfinite(gamma)) throw BadGammaError("scad requires gamma > 2");
    PenaltySpec s;
    s.kind = PenaltyKind::scad;
    s.knots = {0.0, 1.0, gamma};
    s.intercepts = {1.0, gamma / (gamma - 1.0), 0.0};
    s.slopes = {0.0, 1.0 / (gamma - 1.0), 0.0};
    validate(s);
    return s;
}

// Maximum concavity kappa(rho_m) = max_i v_i.
inline double concavity(const PenaltySpec& spec) {
    double m = 0.0;
    for (double v : spec.slopes) m = std::max(m, v);
    return m;
}

// Index of the spline segment containing t >= 0; an exact interior knot
// resolves to the left segment.
inline std::size_t segment_index(const PenaltySpec& spec, double t) {
    std::size_t i = spec.segments() - 1;
    while (i > 0 && t <= spec.knots[i]) --i;
    return i;
}

// lambda * rho_m_dot(t / lambda); equals lambda at t = 0+ and 0 beyond
// gamma * lambda for penalties with a flat tail.
inline double rho_dot(const PenaltySpec& spec, double t, double lambda) {
    if (t < 0.0) throw DomainError("rho_dot requires t >= 0");
    if (!(lambda > 0.0)) throw DomainError("rho_dot requires lambda > 0");
    const double ts = t / lambda;
    const std::size_t i = segment_index(spec, ts);
    const double d = spec.intercepts[i] - spec.slopes[i] * ts;
    return lambda * std::max(d, 0.0);
}

// Piecewise-constant second derivative: -v_i on segment i (left-continuous
// at knots), scale free in lambda.
inline double rho_ddot(const PenaltySpec& spec, double t, double lambda) {
    if (!(t > 0.0)) throw DomainError("rho_ddot requires t > 0");
    if (!(lambda > 0.0)) throw DomainError("rho_ddot requires lambda > 0");
    return -spec.slopes[segment_index(spec, t / lambda)];
}

// lambda^2 rho_m(t/lambda), by exact piecewise integration of rho_m_dot.
inline double rho(const PenaltySpec& spec, double t, double lambda) {
    if (t < 0.0) throw DomainError("rho requires t >= 0");
    if (!(lambda > 0.0)) throw DomainError("rho requires lambda > 0");
    const double ts = t / lambda;
    double acc = 0.0;
    for (std::size_t i = 0; i < spec.segments(); ++i) {
        const double lo = spec.knots[i];
        if (ts <= lo) break;
        const double hi = (i + 1 < spec.segments()) ? std::min(ts, spec.knots[i + 1]) : ts;
        const double u = spec.intercepts[i];
        const double v = spec.slopes[i];
        acc += u * (hi - lo) - 0.5 * v * (hi * hi - lo * lo);
    }
    return lambda * lambda * acc;
}

// ------------------------------------------------------------------
// Univariate threshold rules (orthonormal-design oracles).

enum class ThresholdKind { soft, hard, firm };

inline double threshold(ThresholdKind kind, double z, double lambda, double gamma = 0.0) {
    if (!(lambda > 0.0)) throw DomainError("threshold requires lambda > 0");
    const double a = std::abs(z);
    const double sgn = z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0);
    switch (kind) {
        case ThresholdKind::soft:
            return sgn * std::max(a - lambda, 0.0);
        case ThresholdKind::hard:
            return a > lambda ? z : 0.0;
        case ThresholdKind::firm: {
            if (!(gamma > 1.0)) throw BadGammaError("firm threshold requires gamma > 1");
            const double shrunk = gamma * std::max(a - lambda, 0.0) / (gamma - 1.0);
            return sgn * std::min(a, shrunk);
        }
    }
    return 0.0;
}

} // namespace plus
