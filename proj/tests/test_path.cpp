#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "plus/estimator.hpp"
#include "plus/path.hpp"
#include "plus/penalty.hpp"
#include "plus/rng.hpp"

using namespace plus;

namespace {

// design with Sigma = [[1, .25], [.25, 1]] under ||x_j||^2 = n = 2 and a
// response realizing a requested z~ = X'y/n
RegressionData fig_design(double z1, double z2) {
    const double r2 = std::sqrt(2.0);
    Matrix x(2, 2);
    x(0, 0) = r2;
    x(0, 1) = 0.25 * r2;
    x(1, 0) = 0.0;
    x(1, 1) = std::sqrt(2.0 - 0.125);
    Vector y(2);
    y[0] = 2.0 * z1 / r2;
    y[1] = (2.0 * z2 - 0.25 * r2 * y[0]) / std::sqrt(2.0 - 0.125);
    auto d = make_data(std::move(x), std::move(y));
    d.standardized = true;
    return d;
}

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

RegressionData random_instance(CounterRng& rng, std::size_t n, std::size_t p, double sigma) {
    Matrix x(n, p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) x(i, j) = rng.next_normal();
    Vector y(n);
    const std::size_t d0 = 1 + rng.next_index(std::max<std::size_t>(1, p / 4));
    Vector beta(p, 0.0);
    for (std::size_t t = 0; t < d0; ++t) beta[rng.next_index(p)] = 2.0 * (rng.next_unit() - 0.5);
    for (std::size_t i = 0; i < n; ++i) {
        double fit = 0.0;
        for (std::size_t j = 0; j < p; ++j) fit += x(i, j) * beta[j];
        y[i] = fit + sigma * rng.next_normal();
    }
    auto d = make_data(std::move(x), std::move(y));
    return standardize_columns(d);
}

} // namespace

TEST_CASE("initialization: tau0 = 1/max|z~| and the zero-gradient edge case") {
    auto d1 = fig_design(1.0, -0.883);
    auto p1 = compute_path(d1, make_mcp(2.0));
    REQUIRE_FALSE(p1.points.empty());
    CHECK(p1.points[0].tau == Catch::Approx(1.0).epsilon(1e-12));

    auto d2 = fig_design(-2.0, 1.0);
    auto p2 = compute_path(d2, make_lasso());
    CHECK(p2.points[0].tau == Catch::Approx(0.5).epsilon(1e-12));

    // y = 0: immediate perfect fit with beta = 0
    auto d3 = fig_design(0.0, 0.0);
    auto p3 = compute_path(d3, make_mcp(2.0));
    CHECK(p3.termination == Termination::perfect_fit);
    CHECK(p3.points.empty());
    CHECK(norm_inf(p3.beta_final()) == 0.0);
}

TEST_CASE("univariate MCP gamma = 2: closed-form first segment and firm threshold") {
    Matrix x(1, 1);
    x(0, 0) = 1.0;
    Vector y{1.0};
    auto d = make_data(std::move(x), std::move(y));
    d.standardized = true;
    GramView gram(d);
    const auto spec = make_mcp(2.0);

    // slope on eta = (1): Q = 1 - 1/2, s = 2 z~
    Vector s = segment_slope({1}, {1.0}, gram, spec);
    CHECK(s[0] == Catch::Approx(2.0));
    // unbiased region eta = (2): Q = 1
    Vector s2 = segment_slope({2}, {1.0}, gram, spec);
    CHECK(s2[0] == Catch::Approx(1.0));

    auto path = compute_path(d, spec);
    REQUIRE(path.points.size() == 2);
    CHECK(path.points[1].tau == Catch::Approx(2.0).epsilon(1e-12));  // Delta = (2-0)/2 = 1
    CHECK(path.points[1].b_active[0] == Catch::Approx(2.0).epsilon(1e-12));
    CHECK(path.termination == Termination::perfect_fit);
    // beta(lambda = 1/2) = 1 matches the firm threshold
    auto b = beta_at_lambda(path, 0.5);
    CHECK(b[0] == Catch::Approx(threshold(ThresholdKind::firm, 1.0, 0.5, 2.0)).margin(1e-12));
}

TEST_CASE("worked two-column instance with gamma = 1/2: exact indicator sequence") {
    auto d = fig_design(1.0, -0.883);
    auto path = compute_path(d, make_mcp(0.5));
    CHECK(path.termination == Termination::perfect_fit);
    const auto seq = path.eta_sequence();
    const std::vector<Indicator> expected = {
        {0, 0}, {1, 0}, {2, 0}, {2, -1}, {2, -2}};
    REQUIRE(seq.size() == expected.size());
    for (std::size_t i = 0; i < seq.size(); ++i) CHECK(seq[i] == expected[i]);

    // the detached loop of the solution graph is not traversed: every
    // indicator above is distinct and there are exactly k* = 3 finite steps
    CHECK(path.k_star() == 3);
    // final estimator is the full least squares fit
    GramView gram(d);
    Matrix sig = gram.submatrix({0, 1});
    Vector ls = solve_dense(sig, path.z_tilde);
    auto bf = path.beta_final();
    CHECK(bf[0] == Catch::Approx(ls[0]).margin(1e-10));
    CHECK(bf[1] == Catch::Approx(ls[1]).margin(1e-10));
}

TEST_CASE("first activation follows the gradient sign; knot moves step eta by one") {
    auto d = fig_design(1.0, -0.883);
    auto path = compute_path(d, make_mcp(0.5));
    const auto seq = path.eta_sequence();
    CHECK(seq[1][0] == 1);  // z~_1 > 0 activates with eta = +1
    // upward knot crossing increments: (1,0) -> (2,0)
    CHECK(seq[2][0] - seq[1][0] == 1);
    // gradient boundary at -1 activates with eta = -1
    CHECK(seq[3][1] == -1);
}

TEST_CASE("segment_sign branch examples") {
    auto d = fig_design(1.0, -0.883);
    GramView gram(d);
    const Vector zt = crossprod_scaled(d.x, d.y);

    // convex case: first step from eta = 0 has xi = +1 (tau increases)
    const auto lasso = make_lasso();
    Vector s_l = segment_slope({1, 0}, zt, gram, lasso);
    CHECK(segment_sign({1, 0}, {0, 0}, s_l, zt, gram, 0) == +1);

    // knot-crossing case: eta_j 1 -> 2 with s_j > 0 gives xi = +1
    const auto spec = make_mcp(0.5);
    Vector s2 = segment_slope({2, 0}, zt, gram, spec);
    REQUIRE(s2[0] > 0.0);
    CHECK(segment_sign({2, 0}, {1, 0}, s2, zt, gram, 0) == +1);
}

TEST_CASE("hitting time branches on the worked instance") {
    auto d = fig_design(1.0, -0.883);
    GramView gram(d);
    const auto spec = make_mcp(0.5);
    const Vector zt = crossprod_scaled(d.x, d.y);

    // first segment: eta = (1,0), slope = -z~_1, xi = -1 (concave fold)
    Indicator eta{1, 0};
    Vector s = segment_slope(eta, zt, gram, spec);
    CHECK(s[0] == Catch::Approx(-1.0).epsilon(1e-12));
    const int xi = segment_sign(eta, {0, 0}, s, zt, gram, 0);
    CHECK(xi == -1);

    Vector w(2, 0.0);
    for (std::size_t l : active_set(eta)) {
        const Vector& chi = gram.column(l);
        for (std::size_t j = 0; j < 2; ++j) w[j] += s[l] * chi[j];
    }
    Vector b{0.0, 0.0};
    Vector g{1.0, -0.883};  // tau0 z~
    auto hits = hitting_times(spec, eta, b, g, zt, s, w, xi, 1e-9 * 2.0);
    REQUIRE_FALSE(hits.candidates.empty());
    // knot t2 = gamma = 0.5 is hit first: Delta = 0.5; the inactive
    // gradient boundary candidate is farther (about 2.97)
    CHECK(hits.candidates.front().index == 0);
    CHECK(hits.candidates.front().delta == Catch::Approx(0.5).epsilon(1e-12));
    CHECK(hits.candidates.front().branch == HitBranch::knot_up);
    CHECK(hits.all_deltas[1] == Catch::Approx(1.883 / 0.633).epsilon(1e-3));
}

TEST_CASE("orthonormal design: MC+ equals firm, LASSO equals soft, gamma<=1 equals hard") {
    CounterRng rng(77);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t p = 6;
        Vector z(p);
        for (auto& v : z) v = 3.0 * (rng.next_unit() - 0.5);
        auto d = orthonormal_design(z);

        auto mc = compute_path(d, make_mcp(2.0));
        auto la = compute_path(d, make_lasso());
        auto hd = compute_path(d, make_mcp(0.5));
        REQUIRE(mc.termination == Termination::perfect_fit);
        REQUIRE(la.termination == Termination::perfect_fit);
        REQUIRE(hd.termination == Termination::perfect_fit);

        for (int li = 1; li <= 8; ++li) {
            const double lam = 0.05 + 0.35 * li;
            const auto bm = beta_at_lambda(mc, lam);
            const auto bl = beta_at_lambda(la, lam);
            const auto bh = beta_at_lambda(hd, lam);
            for (std::size_t j = 0; j < p; ++j) {
                CHECK(bm[j]
                      == Catch::Approx(threshold(ThresholdKind::firm, z[j], lam, 2.0))
                             .margin(1e-10));
                CHECK(bl[j]
                      == Catch::Approx(threshold(ThresholdKind::soft, z[j], lam)).margin(1e-10));
                CHECK(bh[j]
                      == Catch::Approx(threshold(ThresholdKind::hard, z[j], lam)).margin(1e-10));
            }
        }
    }
}

TEST_CASE("interpolate: endpoints, midpoints, and the frozen tail") {
    auto d = fig_design(1.0, -0.883);
    auto path = compute_path(d, make_mcp(2.0));
    REQUIRE(path.points.size() >= 2);

    auto at0 = interpolate(path, 0.0);
    CHECK(at0.lambda == Catch::Approx(1.0 / path.points[0].tau));
    CHECK(norm_inf(at0.beta) == 0.0);

    auto at1 = interpolate(path, 1.0);
    const auto exact = path.points[1].beta(path.p);
    for (std::size_t j = 0; j < path.p; ++j) CHECK(at1.beta[j] == Catch::Approx(exact[j]));

    auto mid = interpolate(path, 0.5);
    const double tau_mid = 0.5 * (path.points[0].tau + path.points[1].tau);
    CHECK(mid.lambda == Catch::Approx(1.0 / tau_mid));

    CHECK_THROWS_AS(interpolate(path, -0.1), DomainError);

    // far beyond the end the estimator freezes at the final fit
    auto far = interpolate(path, 1e6);
    const auto bf = path.beta_final();
    for (std::size_t j = 0; j < path.p; ++j) CHECK(far.beta[j] == Catch::Approx(bf[j]).margin(1e-9));
}

TEST_CASE("verify_kkt: origin passes, interpolated points pass, perturbations fail") {
    auto d = fig_design(1.0, -0.883);
    const auto spec = make_mcp(2.0);
    auto path = compute_path(d, spec);

    Vector zero(2, 0.0);
    CHECK(verify_kkt(d, 1.5, zero, spec).pass);  // lambda >= max |z~|

    for (double x = 0.25; x < static_cast<double>(path.points.size()); x += 0.25) {
        auto pt = interpolate(path, x);
        if (pt.lambda <= 0.0) continue;
        auto rep = verify_kkt(d, pt.lambda, pt.beta, spec, 1e-8);
        INFO("x = " << x << " max violation " << rep.max_violation);
        CHECK(rep.pass);
    }

    auto pt = interpolate(path, 1.5);
    auto beta = pt.beta;
    REQUIRE(pt.lambda > 0.0);
    bool bumped = false;
    for (auto& v : beta)
        if (v != 0.0) {
            v += 1e-3;
            bumped = true;
            break;
        }
    REQUIRE(bumped);
    CHECK_FALSE(verify_kkt(d, pt.lambda, beta, spec, 1e-8).pass);
}

TEST_CASE("random instances: KKT along the whole path, one-at-a-time steps, continuity") {
    CounterRng rng(2024);
    int checked = 0;
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t n = 8 + rng.next_index(20);
        const std::size_t p = 4 + rng.next_index(12);
        auto d = random_instance(rng, n, p, 0.5);
        const int which = rep % 3;
        const PenaltySpec spec = which == 0   ? make_lasso()
                                 : which == 1 ? make_mcp(1.4 + 2.0 * rng.next_unit())
                                              : make_scad(2.4 + 2.0 * rng.next_unit());
        auto path = compute_path(d, spec);
        if (path.termination == Termination::stalled) continue;  // counted, not asserted here
        ++checked;

        // one-at-a-time: consecutive indicators differ in exactly one
        // coordinate, by exactly one step
        const auto seq = path.eta_sequence();
        for (std::size_t k = 1; k < seq.size(); ++k) {
            int diffs = 0;
            for (std::size_t j = 0; j < path.p; ++j)
                if (seq[k][j] != seq[k - 1][j]) {
                    ++diffs;
                    CHECK(std::abs(seq[k][j] - seq[k - 1][j]) == 1);
                }
            CHECK(diffs == 1);
        }

        // exact continuity of the b-update off the hit coordinate
        for (std::size_t k = 1; k < path.points.size(); ++k) {
            const auto& a = path.points[k - 1];
            const auto& b = path.points[k];
            const Vector ba = a.dense_b(path.p);
            const Vector bb = b.dense_b(path.p);
            const Vector s = b.dense_slope(path.p);
            const double dtau = b.tau - a.tau;
            for (std::size_t j = 0; j < path.p; ++j) {
                const double expected = ba[j] + dtau * s[j];
                if (static_cast<int>(j) == b.hit_index) {
                    CHECK(std::abs(bb[j] - expected) <= 1e-9 * (1.0 + spec.gamma()));
                } else {
                    CHECK(bb[j] == expected);
                }
            }
        }

        // KKT at turning points and interior points
        for (std::size_t k = 0; k < path.points.size(); ++k) {
            for (double frac : {0.0, 0.37, 0.81}) {
                const double x = static_cast<double>(k) + frac;
                if (x > static_cast<double>(path.points.size() - 1) && !path.ray) break;
                auto pt = interpolate(path, x);
                if (!(pt.lambda > 0.0)) continue;
                auto repr = verify_kkt(d, pt.lambda, pt.beta, spec, 1e-8);
                INFO("rep " << rep << " x " << x << " violation " << repr.max_violation);
                CHECK(repr.pass);
            }
        }

        // LASSO paths are monotone in tau
        if (spec.kind == PenaltyKind::lasso)
            for (std::size_t k = 1; k < path.points.size(); ++k)
                CHECK(path.points[k].tau > path.points[k - 1].tau);
    }
    CHECK(checked >= 25);
}

TEST_CASE("loop avoidance: no (eta, xi) key is traversed twice") {
    CounterRng rng(555);
    for (int rep = 0; rep < 10; ++rep) {
        auto d = random_instance(rng, 12, 6, 0.3);
        auto path = compute_path(d, make_mcp(0.8));  // strongly concave
        if (path.termination == Termination::stalled) continue;
        const auto seq = path.eta_sequence();
        std::set<std::pair<std::vector<int>, int>> keys;
        for (std::size_t k = 1; k < path.points.size(); ++k) {
            auto key = std::make_pair(seq[k], path.points[k].xi);
            CHECK(keys.insert(key).second);
        }
    }
}

TEST_CASE("step cap and lambda floor terminations") {
    auto d = fig_design(1.0, -0.883);
    PathOptions opts;
    opts.k_max = 1;
    auto path = compute_path(d, make_mcp(2.0), opts);
    CHECK(path.termination == Termination::step_cap);
    CHECK(path.points.size() == 2);

    PathOptions floor_opts;
    floor_opts.lambda_floor = 0.95;  // crossed at the first turning point
    auto p2 = compute_path(d, make_lasso(), floor_opts);
    CHECK(p2.termination == Termination::step_cap);
    CHECK_THROWS_AS(beta_at_lambda(p2, 1e-3), LambdaNotReachedError);
}

TEST_CASE("unstandardized input needs the explicit flag") {
    Matrix x(2, 2);
    x(0, 0) = 3.0;
    x(1, 1) = 1.0;
    auto d = make_data(std::move(x), Vector{1.0, 1.0});
    CHECK_THROWS_AS(compute_path(d, make_lasso()), DomainError);
    PathOptions opts;
    opts.allow_unstandardized = true;
    CHECK_NOTHROW(compute_path(d, make_lasso(), opts));
}
