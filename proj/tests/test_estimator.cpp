#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "plus/estimator.hpp"
#include "plus/path.hpp"
#include "plus/penalty.hpp"
#include "plus/rng.hpp"

using namespace plus;

namespace {

RegressionData orthonormal_design(const Vector& z) {
    const std::size_t p = z.size();
    Matrix x(p, p);
    for (std::size_t i = 0; i < p; ++i) x(i, i) = std::sqrt(static_cast<double>(p));
    Vector y(p);
    for (std::size_t i = 0; i < p; ++i) y[i] = z[i] * std::sqrt(static_cast<double>(p));
    auto d = make_data(std::move(x), std::move(y));
    d.standardized = true;
    return d;
}

RegressionData random_instance(CounterRng& rng, std::size_t n, std::size_t p) {
    Matrix x(n, p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) x(i, j) = rng.next_normal();
    Vector y(n);
    for (auto& v : y) v = rng.next_normal();
    auto d = make_data(std::move(x), std::move(y));
    return standardize_columns(d);
}

} // namespace

TEST_CASE("beta_at_lambda basics") {
    Vector z{1.5, -0.4, 0.9};
    auto d = orthonormal_design(z);
    auto path = compute_path(d, make_mcp(2.0));

    // above lambda^(0) the origin is the estimator
    auto b0 = beta_at_lambda(path, 2.0);
    CHECK(norm_inf(b0) == 0.0);

    // firm-threshold value at lambda = 1: z = 1.5 -> 1.0
    auto b1 = beta_at_lambda(path, 1.0);
    CHECK(b1[0] == Catch::Approx(1.0).margin(1e-10));

    // exactly at a turning point the stored point is returned
    REQUIRE(path.points.size() >= 2);
    const double lam_tp = path.points[1].lambda();
    auto btp = beta_at_lambda(path, lam_tp);
    const auto exact = path.points[1].beta(path.p);
    for (std::size_t j = 0; j < path.p; ++j) CHECK(btp[j] == exact[j]);

    CHECK_THROWS_AS(beta_at_lambda(path, 0.0), DomainError);
}

TEST_CASE("beta_at_lambda is deterministic bitwise") {
    CounterRng rng(10);
    auto d = random_instance(rng, 20, 8);
    auto path = compute_path(d, make_mcp(1.7));
    for (double lam : {0.9, 0.5, 0.21, 0.07}) {
        auto a = beta_at_lambda(path, lam);
        auto b = beta_at_lambda(path, lam);
        for (std::size_t j = 0; j < path.p; ++j) CHECK(a[j] == b[j]);
    }
}

TEST_CASE("first-reach and sparsest coincide on LASSO paths") {
    CounterRng rng(20);
    for (int rep = 0; rep < 10; ++rep) {
        auto d = random_instance(rng, 16, 6);
        auto path = compute_path(d, make_lasso());
        REQUIRE(path.termination == Termination::perfect_fit);
        for (int li = 0; li < 12; ++li) {
            const double lam = path.lambda0() * (0.02 + 0.08 * li);
            auto fr = beta_at_lambda(path, lam, EstimatorRule::first_reach);
            auto sp = beta_at_lambda(path, lam, EstimatorRule::sparsest);
            for (std::size_t j = 0; j < path.p; ++j)
                CHECK(fr[j] == Catch::Approx(sp[j]).margin(1e-12));
        }
    }
}

TEST_CASE("sparsest rule picks the zero estimator above lambda0 on a folded path") {
    // univariate MCP with gamma < 1: the path folds and lambda^(x) exceeds
    // lambda^(0) inside the first segment; the sparsest solution there is 0
    Matrix x(1, 1);
    x(0, 0) = 1.0;
    auto d = make_data(std::move(x), Vector{1.0});
    d.standardized = true;
    auto path = compute_path(d, make_mcp(0.5));
    auto sp = beta_at_lambda(path, 1.5, EstimatorRule::sparsest);
    CHECK(sp[0] == 0.0);
    // while below lambda0 the nonzero branch is the only one
    auto sp2 = beta_at_lambda(path, 0.75, EstimatorRule::sparsest);
    CHECK(sp2[0] == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("oracle_lse: empty, full, and exact-interpolation supports") {
    CounterRng rng(30);
    auto d = random_instance(rng, 20, 5);

    auto b_empty = oracle_lse(d, {});
    CHECK(norm_inf(b_empty) == 0.0);

    // full support equals the ordinary LSE Sigma^{-1} z~
    auto b_full = oracle_lse(d, {0, 1, 2, 3, 4});
    GramView gram(d);
    const Vector zt = crossprod_scaled(d.x, d.y);
    Vector ls = solve_dense(gram.full(), zt);
    for (std::size_t j = 0; j < 5; ++j) CHECK(b_full[j] == Catch::Approx(ls[j]).margin(1e-10));

    // noiseless y = X beta recovers beta on a superset of the support
    Vector beta(5, 0.0);
    beta[1] = 1.25;
    beta[3] = -0.5;
    Vector y(d.n(), 0.0);
    for (std::size_t i = 0; i < d.n(); ++i)
        for (std::size_t j = 0; j < 5; ++j) y[i] += d.x(i, j) * beta[j];
    d.y = y;
    auto b_sup = oracle_lse(d, {1, 2, 3});
    CHECK(b_sup[1] == Catch::Approx(1.25).margin(1e-9));
    CHECK(b_sup[2] == Catch::Approx(0.0).margin(1e-9));
    CHECK(b_sup[3] == Catch::Approx(-0.5).margin(1e-9));

    // residual orthogonality on the support
    Vector resid = d.y;
    for (std::size_t i = 0; i < d.n(); ++i)
        for (std::size_t j = 0; j < 5; ++j) resid[i] -= d.x(i, j) * b_sup[j];
    const Vector corr = crossprod_scaled(d.x, resid);
    for (std::size_t j : {1, 2, 3}) CHECK(std::abs(corr[j]) <= 1e-10);
}

TEST_CASE("adaptive_rescale: identity weights and the univariate oracle") {
    CounterRng rng(40);
    auto d = random_instance(rng, 12, 4);

    auto id = adaptive_rescale(d, Vector(4, 1.0));
    for (std::size_t i = 0; i < d.n(); ++i)
        for (std::size_t j = 0; j < d.p(); ++j) CHECK(id.data.x(i, j) == d.x(i, j));
    Vector c{1.0, -2.0, 0.5, 0.0};
    auto back = id.apply_back(c);
    for (std::size_t j = 0; j < 4; ++j) CHECK(back[j] == c[j]);

    CHECK_THROWS_AS(adaptive_rescale(d, Vector(4, 0.0)), DomainError);
    CHECK_THROWS_AS(adaptive_rescale(d, Vector(3, 1.0)), DimensionError);

    // orthonormal p = 1 with weight r: the back-transformed estimator at
    // penalty level lambda minimizes (z - beta)^2/2 + lambda^2 rho2(|beta| r / lambda);
    // oracle by grid search + golden refinement
    const double z = 1.3, r = 2.0, gamma = 8.0, lam = 0.6;
    Matrix x1(1, 1);
    x1(0, 0) = 1.0;
    auto base = make_data(std::move(x1), Vector{z});
    base.standardized = true;
    auto scaled = adaptive_rescale(base, Vector{r});
    const auto spec = make_mcp(gamma);
    PathOptions opts;
    opts.allow_unstandardized = true;
    auto path = compute_path(scaled.data, spec, opts);
    REQUIRE(path.termination == Termination::perfect_fit);
    const auto fitted = beta_at_lambda(path, lam);
    const double beta_hat = scaled.apply_back(fitted)[0];

    const auto objective = [&](double beta) {
        return 0.5 * (z - beta) * (z - beta) + rho(spec, std::abs(beta) * r, lam);
    };
    double best_b = 0.0, best_f = objective(0.0);
    for (int i = -4000; i <= 4000; ++i) {
        const double bb = i * 1e-3;
        const double f = objective(bb);
        if (f < best_f) {
            best_f = f;
            best_b = bb;
        }
    }
    for (double step = 1e-3; step > 1e-12; step *= 0.5) {
        for (double cand : {best_b - step, best_b + step})
            if (objective(cand) < best_f) {
                best_f = objective(cand);
                best_b = cand;
            }
    }
    CHECK(beta_hat == Catch::Approx(best_b).margin(1e-6));
}
