#pragma once

// Estimator extraction from a computed path: beta_hat(lambda) by the
// first-reach rule (the solution when lambda is first reached along the
// path) or the sparsest-solution rule, the support-restricted least
// squares oracle, and per-coordinate adaptive rescaling.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "plus/errors.hpp"
#include "plus/linalg.hpp"
#include "plus/path.hpp"

namespace plus {

enum class EstimatorRule { first_reach, sparsest };

namespace detail {

// beta at the in-segment point where lambda^(x) = lambda; endpoints a -> b.
inline Vector segment_crossing(const SolutionPath& path, const TurningPoint& a,
                               const TurningPoint& b, double lambda) {
    const double tau = 1.0 / lambda;
    Vector bv = a.dense_b(path.p);
    const Vector s = b.dense_slope(path.p);
    for (std::size_t j = 0; j < path.p; ++j) bv[j] = (bv[j] + (tau - a.tau) * s[j]) * lambda;
    return bv;
}

inline Vector ray_crossing(const SolutionPath& path, double lambda) {
    const TurningPoint& last = path.points.back();
    const double tau = 1.0 / lambda;
    Vector bv = last.dense_b(path.p);
    const Vector s = path.ray->dense_slope(path.p);
    for (std::size_t j = 0; j < path.p; ++j) bv[j] = (bv[j] + (tau - last.tau) * s[j]) * lambda;
    return bv;
}

inline std::size_t count_nonzero(const Vector& v) {
    std::size_t c = 0;
    for (double x : v)
        if (x != 0.0) ++c;
    return c;
}

} // namespace detail

inline Vector beta_at_lambda(const SolutionPath& path, double lambda,
                             EstimatorRule rule = EstimatorRule::first_reach) {
    if (!(lambda > 0.0)) throw DomainError("beta_at_lambda requires lambda > 0");
    if (path.points.empty()) return Vector(path.p, 0.0);  // zero-gradient path

    if (rule == EstimatorRule::first_reach) {
        if (lambda >= path.lambda0()) return Vector(path.p, 0.0);
        for (std::size_t k = 1; k < path.points.size(); ++k) {
            const TurningPoint& a = path.points[k - 1];
            const TurningPoint& b = path.points[k];
            // lambda^(x) = 1/tau^(x) is monotone within the segment
            if (b.lambda() == lambda) return b.beta(path.p);
            if (b.lambda() < lambda)
                return detail::segment_crossing(path, a, b, lambda);
        }
        if (path.ray) return detail::ray_crossing(path, lambda);
        throw LambdaNotReachedError("lambda = " + std::to_string(lambda)
                                    + " not reached by the truncated path");
    }

    // sparsest rule: scan every lambda-crossing, pick fewest nonzeros,
    // ties resolved by the smallest path coordinate x
    std::optional<Vector> best;
    std::size_t best_nnz = std::numeric_limits<std::size_t>::max();
    if (lambda >= path.lambda0()) {
        best = Vector(path.p, 0.0);
        best_nnz = 0;
    }
    for (std::size_t k = 1; k < path.points.size() && best_nnz > 0; ++k) {
        const TurningPoint& a = path.points[k - 1];
        const TurningPoint& b = path.points[k];
        const double lo = std::min(a.lambda(), b.lambda());
        const double hi = std::max(a.lambda(), b.lambda());
        if (lambda < lo || lambda > hi) continue;
        Vector beta = b.lambda() == lambda ? b.beta(path.p)
                                           : detail::segment_crossing(path, a, b, lambda);
        const std::size_t nnz = detail::count_nonzero(beta);
        if (nnz < best_nnz) {
            best_nnz = nnz;
            best = std::move(beta);
        }
    }
    if (path.ray && best_nnz > 0 && lambda < path.points.back().lambda()) {
        Vector beta = detail::ray_crossing(path, lambda);
        const std::size_t nnz = detail::count_nonzero(beta);
        if (nnz < best_nnz) {
            best_nnz = nnz;
            best = std::move(beta);
        }
    }
    if (!best) {
        if (path.termination == Termination::perfect_fit) return path.beta_final();
        throw LambdaNotReachedError("lambda = " + std::to_string(lambda)
                                    + " not reached by the truncated path");
    }
    return *best;
}

// Least squares restricted to a support set B (zeros elsewhere).
inline Vector oracle_lse(const RegressionData& data, const std::vector<std::size_t>& support) {
    Vector beta(data.p(), 0.0);
    if (support.empty()) return beta;
    GramView gram(data);
    Matrix sigma_b = gram.submatrix(support);
    const Vector zt = crossprod_scaled(data.x, data.y);
    Vector rhs(support.size());
    for (std::size_t i = 0; i < support.size(); ++i) rhs[i] = zt[support[i]];
    Vector sol;
    try {
        sol = solve_dense(std::move(sigma_b), std::move(rhs));
    } catch (const SingularMatrixError& e) {
        throw SingularSubGramError("singular sub-Gram on the requested support (condition "
                                   + std::to_string(e.condition_estimate) + ")");
    }
    for (std::size_t i = 0; i < support.size(); ++i) beta[support[i]] = sol[i];
    return beta;
}

// Scale change realizing per-coordinate penalties lambda^2 rho_m(|beta_j| r_j / lambda):
// substitute c_j = beta_j r_j, so the working design column is x_j / r_j and a
// fitted coefficient maps back by division. The rescaled design is no longer
// column-standardized; fit it with PathOptions::allow_unstandardized.
struct AdaptiveRescale {
    RegressionData data;
    Vector weights;

    Vector apply_back(const Vector& fitted) const {
        Vector beta(fitted.size());
        for (std::size_t j = 0; j < fitted.size(); ++j) beta[j] = fitted[j] / weights[j];
        return beta;
    }
};

inline AdaptiveRescale adaptive_rescale(const RegressionData& data, const Vector& weights) {
    if (weights.size() != data.p()) throw DimensionError("adaptive_rescale: weight length");
    for (double r : weights)
        if (!(r > 0.0) || !std::isfinite(r))
            throw DomainError("adaptive_rescale requires finite positive weights");
    Matrix x = data.x;
    for (std::size_t i = 0; i < data.n(); ++i)
        for (std::size_t j = 0; j < data.p(); ++j) x(i, j) /= weights[j];
    AdaptiveRescale out{make_data(std::move(x), data.y), weights};
    return out;
}

} // namespace plus
