#pragma once

// SURE-based risk machinery: Q(beta; lambda), degrees of freedom
// df_hat = trace(Q^{-1} Sigma_A), the Cp-type risk estimate, unbiased MSE
// contrasts, and the noise-level estimator sigma_hat with its penalty
// level selection rule.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "plus/errors.hpp"
#include "plus/estimator.hpp"
#include "plus/linalg.hpp"
#include "plus/path.hpp"
#include "plus/penalty.hpp"

namespace plus {

struct RiskReport {
    double lambda = 0.0;
    double df_hat = 0.0;
    double cp_hat = 0.0;
    double sigma2_at_lambda = 0.0;
    std::size_t active_count = 0;
    double sigma2_used = 0.0;
};

inline std::vector<std::size_t> support_of(const Vector& beta) {
    std::vector<std::size_t> s;
    for (std::size_t j = 0; j < beta.size(); ++j)
        if (beta[j] != 0.0) s.push_back(j);
    return s;
}

// Q(beta; lambda) = Sigma_A + diag(rho_ddot(|beta_j|; lambda)) over the
// active set; on a path segment this coincides with Q(eta).
inline Matrix q_matrix(const Vector& beta, double lambda, const GramView& gram,
                       const PenaltySpec& spec) {
    const auto act = support_of(beta);
    if (act.empty()) throw EmptyActiveSetError("q_matrix: no active coordinates");
    Matrix q = gram.submatrix(act);
    for (std::size_t i = 0; i < act.size(); ++i)
        q(i, i) += rho_ddot(spec, std::abs(beta[act[i]]), lambda);
    return q;
}

inline double df_hat(const Vector& beta, double lambda, const GramView& gram,
                     const PenaltySpec& spec) {
    const auto act = support_of(beta);
    if (act.empty()) return 0.0;  // trace over the empty set
    bool curvature_free = true;
    for (std::size_t j : act)
        if (rho_ddot(spec, std::abs(beta[j]), lambda) != 0.0) {
            curvature_free = false;
            break;
        }
    // LASSO, or every active coefficient past gamma*lambda: Q = Sigma_A and
    // the trace is the active count, exactly.
    if (curvature_free) return static_cast<double>(act.size());

    Matrix sigma_a = gram.submatrix(act);
    Matrix q = sigma_a;
    for (std::size_t i = 0; i < act.size(); ++i)
        q(i, i) += rho_ddot(spec, std::abs(beta[act[i]]), lambda);
    Matrix inv_times = solve_dense_multi(std::move(q), std::move(sigma_a));
    double tr = 0.0;
    for (std::size_t i = 0; i < act.size(); ++i) tr += inv_times(i, i);
    return tr;
}

// Cp-type estimate: ||mu_tilde - mu_hat||^2 + sigma2 (2 df_hat - rank(X)).
inline double cp_hat(const RegressionData& data, const Vector& beta, double lambda,
                     double sigma2, const PenaltySpec& spec) {
    GramView gram(data);
    const double df = df_hat(beta, lambda, gram, spec);
    const auto proj = project_onto_columns(data.x, data.y);
    double gap2 = 0.0;
    for (std::size_t i = 0; i < data.n(); ++i) {
        double fit = 0.0;
        for (std::size_t j = 0; j < data.p(); ++j)
            if (beta[j] != 0.0) fit += data.x(i, j) * beta[j];
        const double d = proj.projected[i] - fit;
        gap2 += d * d;
    }
    return gap2 + sigma2 * (2.0 * df - static_cast<double>(proj.rank));
}

// Unbiased estimate of E|a'(beta_hat - beta)|^2 for full rank designs:
// |a'(beta_hat - beta_tilde)|^2 + (2 sigma2/n)(Pa)'Q^{-1}(Pa) - (sigma2/n) a'Sigma^{-1}a.
inline double mse_contrast(const Vector& a, const RegressionData& data, const Vector& beta,
                           double lambda, double sigma2, const PenaltySpec& spec) {
    if (a.size() != data.p()) throw DimensionError("mse_contrast: contrast length");
    GramView gram(data);
    const Matrix& sigma = gram.full();
    const Vector zt = crossprod_scaled(data.x, data.y);
    Vector beta_tilde, sigma_inv_a;
    try {
        beta_tilde = solve_dense(sigma, zt);
        sigma_inv_a = solve_dense(sigma, a);
    } catch (const SingularMatrixError&) {
        throw RankDeficientDesignError("mse_contrast requires rank(X) = p");
    }
    double lin = 0.0;
    for (std::size_t j = 0; j < data.p(); ++j) lin += a[j] * (beta[j] - beta_tilde[j]);
    double quad = 0.0;
    const auto act = support_of(beta);
    if (!act.empty()) {
        Matrix q = q_matrix(beta, lambda, gram, spec);
        Vector pa(act.size());
        for (std::size_t i = 0; i < act.size(); ++i) pa[i] = a[act[i]];
        const Vector qinv_pa = solve_dense(std::move(q), pa);
        for (std::size_t i = 0; i < act.size(); ++i) quad += pa[i] * qinv_pa[i];
    }
    const double n = static_cast<double>(data.n());
    return lin * lin + (2.0 * sigma2 / n) * quad - (sigma2 / n) * dot(a, sigma_inv_a);
}

inline double sigma2_at_lambda(const RegressionData& data, const SolutionPath& path,
                               double lambda, const PenaltySpec& spec) {
    const Vector beta = beta_at_lambda(path, lambda, EstimatorRule::first_reach);
    GramView gram(data);
    const double df = df_hat(beta, lambda, gram, spec);
    const double denom = static_cast<double>(data.n()) - df;
    if (denom < 1.0)
        throw DegenerateDoFError("n - df_hat(lambda) < 1 at lambda = " + std::to_string(lambda));
    double rss = 0.0;
    for (std::size_t i = 0; i < data.n(); ++i) {
        double fit = 0.0;
        for (std::size_t j = 0; j < data.p(); ++j)
            if (beta[j] != 0.0) fit += data.x(i, j) * beta[j];
        const double r = data.y[i] - fit;
        rss += r * r;
    }
    return rss / denom;
}

struct SigmaHatResult {
    double sigma = 0.0;
    double lambda_hat = 0.0;
    bool no_crossing = false;  // condition never held above lambda_star
};

inline double default_lambda_star(std::size_t n, std::size_t p) {
    return std::sqrt(std::log(static_cast<double>(p)) / (8.0 * static_cast<double>(n)));
}

// sigma_hat = sigma_hat(lambda_hat), where lambda_hat is the boundary of
// the qualifying region {sigma2(lambda) <= n lambda^2 / (r0 log p)} reached
// by scanning lambda downward from lambda^(0): the lower end of the topmost
// run of qualifying grid points, sharpened by bisection. With a single
// crossing this is exactly min{lambda >= lambda_star : condition holds};
// when heavy overfitting near lambda_star opens a second spurious
// qualifying interval, the downward scan keeps the statistically
// meaningful crossing. Grid: turning-point lambdas plus a log-spaced
// refinement on [lambda_star, lambda^(0)].
inline SigmaHatResult sigma_hat(const RegressionData& data, const SolutionPath& path,
                                const PenaltySpec& spec, double r0 = 1.0,
                                double lambda_star = -1.0) {
    const double n = static_cast<double>(data.n());
    const double logp = std::log(static_cast<double>(data.p()));
    if (lambda_star <= 0.0) lambda_star = default_lambda_star(data.n(), data.p());
    const double lam0 = path.lambda0();

    const auto condition_holds = [&](double lam) {
        try {
            return sigma2_at_lambda(data, path, lam, spec) <= n * lam * lam / (r0 * logp);
        } catch (const Error&) {
            return false;  // degenerate dof / unreachable lambda: not qualifying
        }
    };

    std::vector<double> grid;
    grid.push_back(lambda_star);
    for (const auto& pt : path.points) {
        const double lam = pt.lambda();
        if (lam > lambda_star && lam < lam0) grid.push_back(lam);
    }
    for (int i = 0; i <= 64; ++i) {
        const double lam = lambda_star * std::pow(lam0 / lambda_star, i / 64.0);
        if (lam > lambda_star && lam < lam0) grid.push_back(lam);
    }
    grid.push_back(lam0);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    // topmost qualifying grid point, then the bottom of its run
    std::size_t top = grid.size();
    for (std::size_t i = grid.size(); i-- > 0;)
        if (condition_holds(grid[i])) {
            top = i;
            break;
        }

    SigmaHatResult out;
    if (top == grid.size()) {
        out.no_crossing = true;
        out.lambda_hat = lambda_star;
        out.sigma = std::sqrt(sigma2_at_lambda(data, path, lambda_star, spec));
        return out;
    }
    std::size_t bottom = top;
    while (bottom > 0 && condition_holds(grid[bottom - 1])) --bottom;

    double hi = grid[bottom];
    if (bottom > 0) {
        double lo = grid[bottom - 1];
        while (hi - lo > 1e-6) {
            const double mid = 0.5 * (lo + hi);
            if (condition_holds(mid))
                hi = mid;
            else
                lo = mid;
        }
    }
    out.lambda_hat = hi;
    out.sigma = std::sqrt(sigma2_at_lambda(data, path, hi, spec));
    return out;
}

// Margin of the sparse convexity check c_min(Sigma) - kappa(rho); callers
// treating Theorem-7 style preconditions should warn when nonpositive.
inline double sparse_convexity_margin(const GramView& gram, const PenaltySpec& spec) {
    const auto [cmin, cmax] = eig_extremes(gram.full());
    (void)cmax;
    return cmin - concavity(spec);
}

inline RiskReport risk_report(const RegressionData& data, const SolutionPath& path,
                              double lambda, const PenaltySpec& spec, double sigma2) {
    RiskReport rep;
    rep.lambda = lambda;
    rep.sigma2_used = sigma2;
    const Vector beta = beta_at_lambda(path, lambda, EstimatorRule::first_reach);
    rep.active_count = support_of(beta).size();
    GramView gram(data);
    rep.df_hat = df_hat(beta, lambda, gram, spec);
    rep.cp_hat = cp_hat(data, beta, lambda, sigma2, spec);
    const double denom = static_cast<double>(data.n()) - rep.df_hat;
    if (denom >= 1.0) {
        rep.sigma2_at_lambda = sigma2_at_lambda(data, path, lambda, spec);
    } else {
        rep.sigma2_at_lambda = std::numeric_limits<double>::quiet_NaN();
    }
    return rep;
}

} // namespace plus
