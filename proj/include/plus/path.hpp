#pragma once

// The PLUS path tracer. Works in rescaled coordinates z = z~/lambda,
// b = beta/lambda, tau = 1/lambda: the solution set of the estimating
// equation is a union of p-parallelepipeds S(eta) indexed by integer
// indicators eta in {-m..m}^p, and the main branch is traced one line
// segment per step. Each step solves Q(eta) s = z~ on the active set,
// orients the segment, and takes the minimal exit time over knot and
// gradient-boundary candidates. beta_hat = b / tau at any path point.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "plus/errors.hpp"
#include "plus/linalg.hpp"
#include "plus/penalty.hpp"

namespace plus {

using Indicator = std::vector<int>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline std::vector<std::size_t> active_set(const Indicator& eta) {
    std::vector<std::size_t> a;
    for (std::size_t j = 0; j < eta.size(); ++j)
        if (eta[j] != 0) a.push_back(j);
    return a;
}

struct TurningPoint {
    std::size_t k = 0;
    double tau = 0.0;
    int xi = +1;          // sgn(tau^(k) - tau^(k-1)) for the arriving segment
    double delta = 0.0;   // |tau^(k) - tau^(k-1)|
    int hit_index = -1;   // j^(k): boundary hit at this point, -1 at termination

    std::vector<std::size_t> active;  // ascending indices with eta_j != 0
    std::vector<int> eta_active;
    Vector b_active;
    Vector slope_active;  // s^(k) on the arriving segment; empty at k = 0

    Vector dense_b(std::size_t p) const {
        Vector b(p, 0.0);
        for (std::size_t i = 0; i < active.size(); ++i) b[active[i]] = b_active[i];
        return b;
    }
    Vector dense_slope(std::size_t p) const {
        Vector s(p, 0.0);
        for (std::size_t i = 0; i < active.size(); ++i) s[active[i]] = slope_active[i];
        return s;
    }
    Indicator dense_eta(std::size_t p) const {
        Indicator e(p, 0);
        for (std::size_t i = 0; i < active.size(); ++i) e[active[i]] = eta_active[i];
        return e;
    }
    Vector beta(std::size_t p) const {
        Vector v = dense_b(p);
        for (double& x : v) x /= tau;
        return v;
    }
    double lambda() const { return 1.0 / tau; }
};

// Unbounded terminal segment: beta_hat tends to the slope vector, a least
// squares fit on the ray's active set.
struct FinalRay {
    std::vector<std::size_t> active;
    std::vector<int> eta_active;
    Vector slope_active;

    Indicator dense_eta(std::size_t p) const {
        Indicator e(p, 0);
        for (std::size_t i = 0; i < active.size(); ++i) e[active[i]] = eta_active[i];
        return e;
    }
    Vector dense_slope(std::size_t p) const {
        Vector s(p, 0.0);
        for (std::size_t i = 0; i < active.size(); ++i) s[active[i]] = slope_active[i];
        return s;
    }
};

enum class Termination { perfect_fit, step_cap, stalled };

inline const char* termination_name(Termination t) {
    switch (t) {
        case Termination::perfect_fit: return "perfect-fit";
        case Termination::step_cap: return "step-cap";
        default: return "stalled";
    }
}

struct PathOptions {
    std::size_t k_max = 5000;
    double tol_knot_rel = 1e-9;  // knot-hit tolerance scale (times 1 + t_m)
    double tol_kkt_rel = 1e-9;   // gradient-boundary tolerance scale (times 1 + max|z~|)
    double tol_fit_rel = 1e-9;   // perfect-fit residual scale (times 1 + max|z~|)
    double lambda_floor = 0.0;   // stop once lambda^(k) <= floor; 0 runs to termination
    bool allow_unstandardized = false;
    bool loop_avoidance = true;
};

struct SolutionPath {
    std::size_t p = 0;
    Vector z_tilde;
    PenaltySpec penalty;
    std::vector<TurningPoint> points;
    std::optional<FinalRay> ray;
    Termination termination = Termination::stalled;
    std::string diagnostic;
    double tol_fit = 0.0;

    std::size_t k_star() const { return points.empty() ? 0 : points.size() - 1; }
    double lambda0() const { return points.empty() ? 0.0 : 1.0 / points.front().tau; }

    // Estimator at the end of the path (exact least squares limit on rays).
    Vector beta_final() const {
        if (ray) return ray->dense_slope(p);
        if (points.empty()) return Vector(p, 0.0);
        return points.back().beta(p);
    }
    // Indicator sequence eta^(0), eta^(1), ..., including the final ray's.
    std::vector<Indicator> eta_sequence() const {
        std::vector<Indicator> seq;
        for (const auto& pt : points) seq.push_back(pt.dense_eta(p));
        if (ray) seq.push_back(ray->dense_eta(p));
        return seq;
    }
};

// ------------------------------------------------------------------
// Step primitives, exposed for direct testing.

// Solve Q(eta) P s = P z~ with s_j = 0 off the active set (Eq. 3.12 form);
// Q(eta) = Sigma_A - diag(v(eta_j)).
inline Vector segment_slope(const Indicator& eta, const Vector& z_tilde, const GramView& gram,
                            const PenaltySpec& spec) {
    const auto act = active_set(eta);
    Vector s(eta.size(), 0.0);
    if (act.empty()) return s;
    Matrix q = gram.submatrix(act);
    for (std::size_t i = 0; i < act.size(); ++i) q(i, i) -= spec.v_at(eta[act[i]]);
    Vector rhs(act.size());
    for (std::size_t i = 0; i < act.size(); ++i) rhs[i] = z_tilde[act[i]];
    Vector sa = solve_dense(std::move(q), std::move(rhs));
    for (std::size_t i = 0; i < act.size(); ++i) s[act[i]] = sa[i];
    return s;
}

// Orientation of the new segment: the path must move into the interior of
// S(eta_new) from the side it entered through. Returns 0 when the deciding
// quantity vanishes (degenerate tie).
inline int segment_sign(const Indicator& eta_new, const Indicator& eta_old, const Vector& slope,
                        const Vector& z_tilde, const GramView& gram, std::size_t hit_index) {
    const auto sgn = [](double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); };
    if (eta_new[hit_index] != 0)
        return (eta_new[hit_index] - eta_old[hit_index]) * sgn(slope[hit_index]);
    // coordinate just deactivated: decided by the drift of its gradient
    double chi_s = 0.0;
    for (std::size_t l : active_set(eta_new)) chi_s += gram.column(l)[hit_index] * slope[l];
    return eta_old[hit_index] * sgn(chi_s - z_tilde[hit_index]);
}

enum class HitBranch { knot_up, knot_down, grad_plus, grad_minus };

struct HitCandidate {
    std::size_t index = 0;
    double delta = kInf;
    HitBranch branch = HitBranch::knot_up;
    double snapped_b = 0.0;  // exact knot value for knot branches
};

struct HittingTimes {
    std::vector<HitCandidate> candidates;  // finite candidates sorted by (delta, index)
    Vector all_deltas;                     // Delta_j for every j (+inf when no exit)
    bool ray_ok = false;                   // z~ - Sigma s vanished: perfect-fit ray
};

// Exit-time candidates from the point (tau, b) along the segment with
// indicator eta, slope s and orientation xi. `w` is Sigma * s and `g`
// holds g_j = tau z~_j - chi_j' b at the point. When the segment residual
// z~ - Sigma s vanishes to tolerance the segment lies on the least squares
// ray: gradient drifts for inactive coordinates are pure rounding noise
// and only knot candidates remain genuine.
inline HittingTimes hitting_times(const PenaltySpec& spec, const Indicator& eta, const Vector& b,
                                  const Vector& g, const Vector& z_tilde, const Vector& s,
                                  const Vector& w, int xi, double tol_fit) {
    const std::size_t p = eta.size();
    HittingTimes out;
    out.all_deltas.assign(p, kInf);

    double resid = 0.0;
    for (std::size_t j = 0; j < p; ++j) resid = std::max(resid, std::abs(z_tilde[j] - w[j]));
    out.ray_ok = resid <= tol_fit;

    for (std::size_t j = 0; j < p; ++j) {
        HitCandidate cand;
        cand.index = j;
        if (eta[j] != 0) {
            const double dir = xi * s[j];
            if (dir > 0.0) {
                const double target = spec.knot_at(eta[j] + 1);
                if (!std::isfinite(target)) continue;
                cand.delta = std::max(0.0, (target - b[j]) / dir);
                cand.branch = HitBranch::knot_up;
                cand.snapped_b = target;
            } else if (dir < 0.0) {
                const double target = spec.knot_at(eta[j]);
                if (!std::isfinite(target)) continue;
                cand.delta = std::max(0.0, (target - b[j]) / dir);
                cand.branch = HitBranch::knot_down;
                cand.snapped_b = target;
            } else {
                continue;
            }
        } else {
            if (out.ray_ok) continue;  // sub-tolerance drift: no genuine crossing
            const double drift = xi * (z_tilde[j] - w[j]);
            if (drift > 0.0) {
                cand.delta = std::max(0.0, (1.0 - g[j]) / drift);
                cand.branch = HitBranch::grad_plus;
            } else if (drift < 0.0) {
                cand.delta = std::max(0.0, (-1.0 - g[j]) / drift);
                cand.branch = HitBranch::grad_minus;
            } else {
                continue;
            }
        }
        out.all_deltas[j] = cand.delta;
        out.candidates.push_back(cand);
    }
    std::sort(out.candidates.begin(), out.candidates.end(),
              [](const HitCandidate& a, const HitCandidate& b2) {
                  return a.delta != b2.delta ? a.delta < b2.delta : a.index < b2.index;
              });
    return out;
}

// Indicator transition at the hit coordinate (Eq. 3.10 resolved by the
// branch that produced the hit).
inline Indicator transition_indicator(const Indicator& eta, std::size_t j, HitBranch branch) {
    Indicator out = eta;
    switch (branch) {
        case HitBranch::knot_up: out[j] += 1; break;
        case HitBranch::knot_down: out[j] -= 1; break;
        case HitBranch::grad_plus: out[j] = +1; break;
        case HitBranch::grad_minus: out[j] = -1; break;
    }
    return out;
}

// ------------------------------------------------------------------
// The main loop.

namespace detail {

struct SegmentKey {
    std::vector<std::int16_t> eta;
    int xi;
    bool operator<(const SegmentKey& o) const {
        if (xi != o.xi) return xi < o.xi;
        return eta < o.eta;
    }
};

inline SegmentKey make_key(const Indicator& eta, int xi) {
    SegmentKey k;
    k.eta.assign(eta.begin(), eta.end());
    k.xi = xi;
    return k;
}

} // namespace detail

inline SolutionPath compute_path(const RegressionData& data, const PenaltySpec& spec,
                                 const PathOptions& opts = {}) {
    validate(spec);
    if (!data.standardized && !opts.allow_unstandardized)
        throw DomainError("compute_path requires standardized columns "
                          "(or PathOptions::allow_unstandardized)");

    const std::size_t p = data.p();
    GramView gram(data);
    SolutionPath path;
    path.p = p;
    path.penalty = spec;
    path.z_tilde = crossprod_scaled(data.x, data.y);
    const Vector& zt = path.z_tilde;

    double z_max = 0.0;
    std::size_t j_max = 0;
    for (std::size_t j = 0; j < p; ++j)
        if (std::abs(zt[j]) > z_max) {
            z_max = std::abs(zt[j]);
            j_max = j;
        }
    const double tol_kkt = opts.tol_kkt_rel * (1.0 + z_max);
    const double tol_fit = opts.tol_fit_rel * (1.0 + z_max);
    path.tol_fit = tol_fit;

    if (z_max == 0.0) {
        // all-zero gradient: the zero fit is already optimal
        path.termination = Termination::perfect_fit;
        path.diagnostic = "zero gradient at origin";
        return path;
    }

    const double tau0 = 1.0 / z_max;

    // state at the current turning point
    Indicator eta(p, 0);
    Vector b(p, 0.0);
    Vector g(p);  // g_j = tau z~_j - chi_j' b
    for (std::size_t j = 0; j < p; ++j) g[j] = tau0 * zt[j];
    double tau = tau0;

    TurningPoint origin;
    origin.k = 0;
    origin.tau = tau0;
    origin.hit_index = static_cast<int>(j_max);
    path.points.push_back(origin);

    // initial transition candidates: every coordinate on the gradient boundary
    std::vector<HitCandidate> pending;
    for (std::size_t j = 0; j < p; ++j)
        if (std::abs(g[j]) >= 1.0 - tol_kkt) {
            HitCandidate c;
            c.index = j;
            c.delta = 0.0;
            c.branch = g[j] > 0.0 ? HitBranch::grad_plus : HitBranch::grad_minus;
            pending.push_back(c);
        }

    std::set<detail::SegmentKey> visited;
    std::size_t zero_steps = 0;

    for (std::size_t k = 1; k <= opts.k_max; ++k) {
        // pick the first workable continuation among the tied candidates
        Indicator eta_next;
        Vector s, w;
        int xi = 0;
        std::optional<HitCandidate> accepted;
        std::string skip_note;
        for (const HitCandidate& cand : pending) {
            Indicator eta_try = transition_indicator(eta, cand.index, cand.branch);
            Vector s_try;
            try {
                s_try = segment_slope(eta_try, zt, gram, spec);
            } catch (const SingularMatrixError& e) {
                skip_note = "singular Q(eta) at step " + std::to_string(k)
                            + ", condition estimate " + std::to_string(e.condition_estimate)
                            + "; consider perturbing gamma by +-1e-4";
                continue;
            }
            Vector w_try(p, 0.0);
            for (std::size_t l : active_set(eta_try)) {
                const Vector& chi = gram.column(l);
                const double sl = s_try[l];
                for (std::size_t j = 0; j < p; ++j) w_try[j] += sl * chi[j];
            }
            const int xi_try = segment_sign(eta_try, eta, s_try, zt, gram, cand.index);
            if (xi_try == 0) {
                skip_note = "zero directional derivative at step " + std::to_string(k);
                continue;
            }
            if (opts.loop_avoidance) {
                const auto key = detail::make_key(eta_try, xi_try);
                if (visited.count(key)) {
                    skip_note = "segment already covered at step " + std::to_string(k);
                    continue;
                }
                visited.insert(key);
            }
            eta_next = std::move(eta_try);
            s = std::move(s_try);
            w = std::move(w_try);
            xi = xi_try;
            accepted = cand;
            break;
        }
        if (!accepted) {
            path.termination = Termination::stalled;
            path.diagnostic = skip_note.empty()
                                  ? "no admissible continuation at step " + std::to_string(k)
                                  : skip_note;
            return path;
        }

        HittingTimes hits = hitting_times(spec, eta_next, b, g, zt, s, w, xi, tol_fit);
        if (hits.candidates.empty()) {
            if (hits.ray_ok && xi > 0) {
                // unbounded terminal segment: optimal fit reached
                FinalRay ray;
                ray.active = active_set(eta_next);
                for (std::size_t l : ray.active) {
                    ray.eta_active.push_back(eta_next[l]);
                    ray.slope_active.push_back(s[l]);
                }
                path.ray = std::move(ray);
                path.termination = Termination::perfect_fit;
                return path;
            }
            path.termination = Termination::stalled;
            path.diagnostic = "no exit from a non-terminal segment at step " + std::to_string(k);
            return path;
        }

        const HitCandidate& hit = hits.candidates.front();
        const double tau_new = tau + xi * hit.delta;
        if (!(tau_new > 0.0)) {
            path.termination = Termination::stalled;
            path.diagnostic = "nonpositive tau at step " + std::to_string(k);
            return path;
        }

        const double tol_delta = 1e-12 * (1.0 + tau);
        if (hit.delta <= tol_delta) {
            if (++zero_steps > p) {
                path.termination = Termination::stalled;
                path.diagnostic = "more than p consecutive zero-length steps at step "
                                  + std::to_string(k);
                return path;
            }
        } else {
            zero_steps = 0;
        }

        // commit the turning point (Eq. 3.19 update, hit coordinate snapped
        // to its exact boundary value)
        const double dtau = tau_new - tau;
        for (std::size_t j = 0; j < p; ++j) {
            if (s[j] != 0.0) b[j] += dtau * s[j];
            g[j] += dtau * (zt[j] - w[j]);
        }
        if (hit.branch == HitBranch::knot_up || hit.branch == HitBranch::knot_down)
            b[hit.index] = hit.snapped_b == 0.0 ? 0.0 : hit.snapped_b;  // clear -0.0
        tau = tau_new;
        if (k % 128 == 0) {
            // refresh g against incremental drift
            Vector wb(p, 0.0);
            for (std::size_t l : active_set(eta_next)) {
                const Vector& chi = gram.column(l);
                for (std::size_t j = 0; j < p; ++j) wb[j] += b[l] * chi[j];
            }
            for (std::size_t j = 0; j < p; ++j) g[j] = tau * zt[j] - wb[j];
        }

        TurningPoint pt;
        pt.k = k;
        pt.tau = tau;
        pt.xi = xi;
        pt.delta = hit.delta;
        pt.hit_index = static_cast<int>(hit.index);
        pt.active = active_set(eta_next);
        for (std::size_t l : pt.active) {
            pt.eta_active.push_back(eta_next[l]);
            pt.b_active.push_back(b[l]);
            pt.slope_active.push_back(s[l]);
        }
        path.points.push_back(std::move(pt));
        eta = std::move(eta_next);

        // explicit termination: this turning point already gives the optimal
        // fit X'(y - X beta) = 0 (||g||_inf / tau is the unrescaled norm).
        // The segment beyond it carries the constant estimator b = tau * beta.
        double g_max = 0.0;
        for (std::size_t j = 0; j < p; ++j) g_max = std::max(g_max, std::abs(g[j]));
        if (g_max <= tol_fit * tau) {
            FinalRay ray;
            const Indicator eta_ray = transition_indicator(eta, hit.index, hit.branch);
            ray.active = active_set(eta_ray);
            for (std::size_t l : ray.active) {
                ray.eta_active.push_back(eta_ray[l]);
                ray.slope_active.push_back(b[l] / tau);
            }
            path.ray = std::move(ray);
            path.termination = Termination::perfect_fit;
            return path;
        }

        if (opts.lambda_floor > 0.0 && 1.0 / tau <= opts.lambda_floor) {
            path.termination = Termination::step_cap;
            path.diagnostic = "lambda floor reached";
            return path;
        }

        // tied exits at the new point seed the next transition
        const double tie_tol = 1e-9 * (1.0 + hit.delta);
        pending.clear();
        for (const HitCandidate& c : hits.candidates)
            if (c.delta <= hit.delta + tie_tol) pending.push_back(c);
    }

    path.termination = Termination::step_cap;
    path.diagnostic = "k_max reached";
    return path;
}

// ------------------------------------------------------------------
// Interpolation (Eq. 3.8) and KKT verification.

struct PathPoint {
    double lambda = 0.0;
    Vector beta;
};

inline PathPoint interpolate(const SolutionPath& path, double x) {
    if (x < 0.0) throw DomainError("interpolate requires x >= 0");
    PathPoint out;
    out.beta.assign(path.p, 0.0);
    if (path.points.empty()) return out;  // zero-gradient path: beta = 0, lambda = 0

    const std::size_t kk = path.points.size() - 1;  // last finite turning point
    if (x <= static_cast<double>(kk)) {
        if (std::floor(x) == x) {
            const TurningPoint& pt = path.points[static_cast<std::size_t>(x)];
            out.lambda = pt.lambda();
            out.beta = pt.beta(path.p);
            return out;
        }
        const std::size_t hi = static_cast<std::size_t>(std::ceil(x));
        const TurningPoint& a = path.points[hi - 1];
        const TurningPoint& bpt = path.points[hi];
        const double th = x - static_cast<double>(hi - 1);
        const double tau = (1.0 - th) * a.tau + th * bpt.tau;
        Vector bv = a.dense_b(path.p);
        const Vector bd = bpt.dense_b(path.p);
        for (std::size_t j = 0; j < path.p; ++j)
            bv[j] = ((1.0 - th) * bv[j] + th * bd[j]) / tau;
        out.lambda = 1.0 / tau;
        out.beta = std::move(bv);
        return out;
    }

    const TurningPoint& last = path.points.back();
    if (path.ray) {
        // the ray is segment k*+1, parametrized linearly in lambda down to 0
        const double lam_k = last.lambda();
        const double lam = x >= static_cast<double>(kk) + 1.0
                               ? 0.0
                               : lam_k * (static_cast<double>(kk) + 1.0 - x);
        if (lam <= 0.0) {
            out.lambda = 0.0;
            out.beta = path.ray->dense_slope(path.p);
            return out;
        }
        const double tau = 1.0 / lam;
        Vector bv = last.dense_b(path.p);
        const Vector s = path.ray->dense_slope(path.p);
        for (std::size_t j = 0; j < path.p; ++j) bv[j] = (bv[j] + (tau - last.tau) * s[j]) * lam;
        out.lambda = lam;
        out.beta = std::move(bv);
        return out;
    }
    // truncated path: estimator frozen, lambda^(x) = (k*/x) lambda^(k*)
    out.lambda = last.lambda() * static_cast<double>(kk) / x;
    out.beta = last.beta(path.p);
    return out;
}

struct KktReport {
    double max_violation = 0.0;
    std::size_t worst_index = 0;
    bool pass = true;
};

// Largest violation of the estimating equation at (lambda, beta):
// |x_j'(y - X beta)/n - sgn(beta_j) rho_dot(|beta_j|; lambda)| on the
// active set, (|x_j'(y - X beta)/n| - lambda)_+ off it.
inline KktReport verify_kkt(const RegressionData& data, double lambda, const Vector& beta,
                            const PenaltySpec& spec, double tol = 1e-8) {
    if (!(lambda > 0.0)) throw DomainError("verify_kkt requires lambda > 0");
    Vector resid = data.y;
    for (std::size_t i = 0; i < data.n(); ++i) {
        double fit = 0.0;
        for (std::size_t j = 0; j < data.p(); ++j)
            if (beta[j] != 0.0) fit += data.x(i, j) * beta[j];
        resid[i] -= fit;
    }
    const Vector corr = crossprod_scaled(data.x, resid);
    KktReport rep;
    for (std::size_t j = 0; j < data.p(); ++j) {
        double viol;
        if (beta[j] != 0.0) {
            const double sg = beta[j] > 0.0 ? 1.0 : -1.0;
            viol = std::abs(corr[j] - sg * rho_dot(spec, std::abs(beta[j]), lambda));
        } else {
            viol = std::max(0.0, std::abs(corr[j]) - lambda);
        }
        if (viol > rep.max_violation) {
            rep.max_violation = viol;
            rep.worst_index = j;
        }
    }
    rep.pass = rep.max_violation <= tol;
    return rep;
}

// Segment index whose lambda range first covers the query (for step counts).
inline std::size_t steps_to_lambda(const SolutionPath& path, double lambda) {
    if (path.points.empty()) return 0;
    if (lambda >= path.lambda0()) return 0;
    for (std::size_t k = 1; k < path.points.size(); ++k)
        if (path.points[k].lambda() <= lambda) return k;
    return path.points.size();  // reached on the final ray
}

} // namespace plus
