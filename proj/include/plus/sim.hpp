#pragma once

// Deterministic generators for the paper-style experiments (grouped
// correlated designs, AR(1) Gaussian rows, i.i.d. Gaussian), signal
// patterns, selection/estimation metrics, and a replication runner.
// Every generator is a pure function of (config, seed); replication r
// draws from a derived stream so serial and parallel runs agree.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "plus/bounds.hpp"
#include "plus/errors.hpp"
#include "plus/estimator.hpp"
#include "plus/linalg.hpp"
#include "plus/path.hpp"
#include "plus/penalty.hpp"
#include "plus/risk.hpp"
#include "plus/rng.hpp"

namespace plus {

// ------------------------------------------------------------------
// Design generators. All emit columns with sum ~0 (grouped) and
// ||x_j||^2 = n exactly, so the data ships standardized.

namespace detail {

inline void scale_column_to_root_n(Matrix& x, std::size_t j) {
    const std::size_t n = x.rows();
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += x(i, j) * x(i, j);
    if (ss == 0.0) throw ZeroColumnError(j);
    const double scale = std::sqrt(static_cast<double>(n) / ss);
    for (std::size_t i = 0; i < n; ++i) x(i, j) *= scale;
}

inline RegressionData finish_design(Matrix x) {
    RegressionData d;
    d.col_norms.assign(x.cols(), std::sqrt(static_cast<double>(x.rows())));
    d.x = std::move(x);
    d.y.assign(d.x.rows(), 0.0);
    d.standardized = true;
    return d;
}

} // namespace detail

// Pool of pool_mult * p columns of unit-exponential minus chi^2_1 entries,
// centered and scaled to length sqrt(n); groups assembled by drawing a
// random anchor and the most |correlated| remaining columns.
inline RegressionData gen_design_grouped(std::size_t n, std::size_t p, std::size_t pool_mult,
                                         std::size_t group_size, std::uint64_t seed) {
    if (pool_mult < 1) throw ConfigError("grouped design: pool multiplier must be >= 1");
    if (group_size < 1 || p % group_size != 0)
        throw ConfigError("grouped design: group size must divide p");
    const std::size_t pool_size = pool_mult * p;
    CounterRng rng(seed);

    Matrix pool(n, pool_size);
    for (std::size_t j = 0; j < pool_size; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = rng.next_exponential();
            const double c = rng.next_chisq1();
            pool(i, j) = e - c;
            mean += pool(i, j);
        }
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) pool(i, j) -= mean;
        detail::scale_column_to_root_n(pool, j);
    }

    std::vector<std::size_t> remaining(pool_size);
    for (std::size_t j = 0; j < pool_size; ++j) remaining[j] = j;

    Matrix x(n, p);
    std::size_t filled = 0;
    const double inv_n = 1.0 / static_cast<double>(n);
    while (filled < p) {
        const std::size_t pick = rng.next_index(remaining.size());
        const std::size_t anchor = remaining[pick];
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
        for (std::size_t i = 0; i < n; ++i) x(i, filled) = pool(i, anchor);
        ++filled;

        std::vector<std::pair<double, std::size_t>> ranked;
        ranked.reserve(remaining.size());
        for (std::size_t idx : remaining) {
            double corr = 0.0;
            for (std::size_t i = 0; i < n; ++i) corr += pool(i, idx) * pool(i, anchor);
            ranked.emplace_back(-std::abs(corr * inv_n), idx);
        }
        std::sort(ranked.begin(), ranked.end());
        const std::size_t take = group_size - 1;
        std::vector<std::size_t> chosen;
        for (std::size_t t = 0; t < take; ++t) {
            const std::size_t idx = ranked[t].second;
            for (std::size_t i = 0; i < n; ++i) x(i, filled) = pool(i, idx);
            ++filled;
            chosen.push_back(idx);
        }
        for (std::size_t idx : chosen)
            remaining.erase(std::find(remaining.begin(), remaining.end(), idx));
    }
    return detail::finish_design(std::move(x));
}

// Rows i.i.d. Gaussian with AR(1) correlation rho^{|k-j|} across the
// coordinates, columns then normalized to ||x_j||^2 = n.
inline RegressionData gen_design_ar(std::size_t n, std::size_t p, double rho12,
                                    std::uint64_t seed) {
    if (!(std::abs(rho12) < 1.0)) throw ConfigError("ar design requires |rho| < 1");
    CounterRng rng(seed);
    Matrix x(n, p);
    const double innov = std::sqrt(1.0 - rho12 * rho12);
    for (std::size_t i = 0; i < n; ++i) {
        double prev = rng.next_normal();
        x(i, 0) = prev;
        for (std::size_t j = 1; j < p; ++j) {
            prev = rho12 * prev + innov * rng.next_normal();
            x(i, j) = prev;
        }
    }
    for (std::size_t j = 0; j < p; ++j) detail::scale_column_to_root_n(x, j);
    return detail::finish_design(std::move(x));
}

inline RegressionData gen_design_iid(std::size_t n, std::size_t p, std::uint64_t seed) {
    CounterRng rng(seed);
    Matrix x(n, p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) x(i, j) = rng.next_normal();
    for (std::size_t j = 0; j < p; ++j) detail::scale_column_to_root_n(x, j);
    return detail::finish_design(std::move(x));
}

// ------------------------------------------------------------------
// Signal and response.

enum class BetaPattern { pm_constant, blocks };

struct Signal {
    Vector beta;
    std::vector<std::size_t> support;
};

inline Signal gen_beta(std::size_t p, std::size_t d0, BetaPattern pattern, double beta_star,
                       std::uint64_t seed) {
    CounterRng rng(seed);
    Signal sig;
    sig.beta.assign(p, 0.0);
    if (pattern == BetaPattern::pm_constant) {
        if (d0 > p) throw ConfigError("gen_beta: d0 exceeds p");
        if (d0 == 0) return sig;
        sig.support = rng.subset(p, d0);
        std::sort(sig.support.begin(), sig.support.end());
        for (std::size_t j : sig.support)
            sig.beta[j] = rng.next_unit() < 0.5 ? -beta_star : beta_star;
        return sig;
    }
    // 5 symmetric blocks beta_* (1,2,3,4,3,2,1)' centered at distinct
    // random multiples of 25 (d0 = 35 nonzeros)
    const std::size_t block_half = 3;
    std::vector<std::size_t> centers;
    for (std::size_t c = 25; c + block_half < p; c += 25) centers.push_back(c);
    if (centers.size() < 5 || (centers.front() < block_half))
        throw ConfigError("gen_beta: blocks pattern needs room for 5 blocks at multiples of 25");
    auto pick = rng.subset(centers.size(), 5);
    static const double shape[7] = {1, 2, 3, 4, 3, 2, 1};
    for (std::size_t idx : pick) {
        const std::size_t c = centers[idx];
        for (std::size_t o = 0; o < 7; ++o) {
            const std::size_t j = c - block_half + o;
            sig.beta[j] = beta_star * shape[o];
            sig.support.push_back(j);
        }
    }
    std::sort(sig.support.begin(), sig.support.end());
    return sig;
}

inline Vector gen_response(const RegressionData& data, const Vector& beta, double sigma,
                           std::uint64_t seed) {
    if (sigma < 0.0) throw ConfigError("gen_response requires sigma >= 0");
    CounterRng rng(seed);
    Vector y(data.n(), 0.0);
    for (std::size_t i = 0; i < data.n(); ++i) {
        double fit = 0.0;
        for (std::size_t j = 0; j < data.p(); ++j)
            if (beta[j] != 0.0) fit += data.x(i, j) * beta[j];
        y[i] = fit;
    }
    if (sigma > 0.0)
        for (std::size_t i = 0; i < data.n(); ++i) y[i] += sigma * rng.next_normal();
    return y;
}

// ------------------------------------------------------------------
// Metrics.

struct Metrics {
    int cs = 0;           // I{support(beta_hat) == support(beta)}
    double se_beta = 0.0; // ||beta_hat - beta||^2
    double se_mu = 0.0;   // ||X(beta_hat - beta)||^2 / n
    std::size_t fn = 0;   // false negatives
    std::size_t fp = 0;   // false positives
    std::size_t steps = 0;
};

inline Metrics evaluate(const Vector& beta_hat, const Vector& beta, const RegressionData& data) {
    if (beta_hat.size() != beta.size() || beta.size() != data.p())
        throw DimensionError("evaluate: dimension mismatch");
    Metrics m;
    for (std::size_t j = 0; j < beta.size(); ++j) {
        const double d = beta_hat[j] - beta[j];
        m.se_beta += d * d;
        if (beta[j] != 0.0 && beta_hat[j] == 0.0) ++m.fn;
        if (beta[j] == 0.0 && beta_hat[j] != 0.0) ++m.fp;
    }
    m.cs = (m.fn == 0 && m.fp == 0) ? 1 : 0;
    double se_mu = 0.0;
    for (std::size_t i = 0; i < data.n(); ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < data.p(); ++j) {
            const double diff = beta_hat[j] - beta[j];
            if (diff != 0.0) d += data.x(i, j) * diff;
        }
        se_mu += d * d;
    }
    m.se_mu = se_mu / static_cast<double>(data.n());
    return m;
}

// ------------------------------------------------------------------
// Experiment configuration and runner.

enum class DesignKind { grouped, ar_gaussian, iid_gaussian };

struct PenaltyChoice {
    PenaltyKind kind = PenaltyKind::mcp;
    double gamma = 2.0;
    bool corr_rule = false;  // gamma = 2 / (1 - max off-diagonal |correlation|)

    std::string label() const {
        std::string s = penalty_kind_name(kind);
        if (kind != PenaltyKind::lasso)
            s += corr_rule ? "(corr-rule)" : "(" + std::to_string(gamma) + ")";
        return s;
    }
};

enum class SigmaRule { known, full_model, path_estimate };

struct ExperimentConfig {
    DesignKind design = DesignKind::iid_gaussian;
    std::size_t n = 100;
    std::size_t p = 200;
    std::size_t d0 = 10;
    double beta_star = 1.0;
    BetaPattern beta_pattern = BetaPattern::pm_constant;
    double sigma = 1.0;
    std::vector<PenaltyChoice> penalties;
    std::vector<double> lambda_factors{1.0};  // multiples of lambda_univ
    std::vector<double> lambda_values;        // explicit values override factors
    SigmaRule sigma_rule = SigmaRule::known;
    std::size_t reps = 1;
    std::uint64_t seed = 0;
    std::size_t k_max = 5000;
    std::size_t pool_mult = 3;
    std::size_t group_size = 10;
    double rho12 = 0.0;
    bool estimate_sigma = false;  // per-replication sigma_hat via Eq. (5.14)
    double r0 = 1.0;

    bool noiseless() const { return sigma == 0.0; }

    void check() const {
        if (reps < 1) throw ConfigError("config: reps must be >= 1");
        if (d0 > p) throw ConfigError("config: d0 exceeds p");
        if (penalties.empty()) throw ConfigError("config: at least one penalty");
        for (double v : lambda_values)
            if (!(v > 0.0)) throw ConfigError("config: lambda values must be positive");
        if (!noiseless() && lambda_values.empty() && lambda_factors.empty())
            throw ConfigError("config: no penalty levels requested");
    }
};

struct CellResult {
    double lambda = 0.0;
    Metrics metrics;
};

struct PenaltyRepResult {
    std::string label;
    double gamma_used = 0.0;
    bool stalled = false;
    std::string note;
    std::vector<CellResult> cells;
    // noiseless-mode fields, evaluated at the last path step
    int recovered = 0;
    std::size_t fn_last = 0;
    std::size_t k_star = 0;
    // optional noise estimate
    double sigma_hat = std::numeric_limits<double>::quiet_NaN();
    double lambda_hat = std::numeric_limits<double>::quiet_NaN();
};

struct RepResult {
    std::size_t rep = 0;
    double sigma_used = 0.0;  // sigma plugged into the lambda grid
    std::vector<PenaltyRepResult> penalties;
};

namespace detail {

inline double max_abs_offdiag_correlation(const RegressionData& data) {
    GramView gram(data);
    double m = 0.0;
    for (std::size_t j = 0; j < data.p(); ++j) {
        const Vector& chi = gram.column(j);
        for (std::size_t i = 0; i < data.p(); ++i)
            if (i != j) m = std::max(m, std::abs(chi[i]));
    }
    return m;
}

inline RegressionData make_rep_design(const ExperimentConfig& cfg, CounterRng stream) {
    const std::uint64_t s = stream.next_u64();
    switch (cfg.design) {
        case DesignKind::grouped:
            return gen_design_grouped(cfg.n, cfg.p, cfg.pool_mult, cfg.group_size, s);
        case DesignKind::ar_gaussian:
            return gen_design_ar(cfg.n, cfg.p, cfg.rho12, s);
        default:
            return gen_design_iid(cfg.n, cfg.p, s);
    }
}

} // namespace detail

inline RepResult run_replication(const ExperimentConfig& cfg, std::size_t rep) {
    CounterRng base(cfg.seed);
    CounterRng rep_rng = base.derive(rep);

    RegressionData data = detail::make_rep_design(cfg, rep_rng.derive(1));
    Signal sig = gen_beta(cfg.p, cfg.d0, cfg.beta_pattern, cfg.beta_star,
                          rep_rng.derive(2).next_u64());
    data.y = gen_response(data, sig.beta, cfg.sigma, rep_rng.derive(3).next_u64());

    RepResult out;
    out.rep = rep;

    double sigma_used = cfg.sigma;
    if (!cfg.noiseless() && cfg.sigma_rule == SigmaRule::full_model) {
        const auto proj = project_onto_columns(data.x, data.y);
        if (proj.rank >= data.n())
            throw ConfigError("full-model sigma estimate needs rank(X) < n");
        double rss = 0.0;
        for (std::size_t i = 0; i < data.n(); ++i) {
            const double r = data.y[i] - proj.projected[i];
            rss += r * r;
        }
        sigma_used = std::sqrt(rss / static_cast<double>(data.n() - proj.rank));
    }

    const double corr = [&] {
        for (const auto& pc : cfg.penalties)
            if (pc.corr_rule) return detail::max_abs_offdiag_correlation(data);
        return 0.0;
    }();

    for (const auto& pc : cfg.penalties) {
        PenaltyRepResult pres;
        double gamma = pc.gamma;
        if (pc.corr_rule && pc.kind != PenaltyKind::lasso) gamma = 2.0 / (1.0 - corr);
        pres.gamma_used = pc.kind == PenaltyKind::lasso ? 0.0 : gamma;
        pres.label = pc.label();

        PenaltySpec spec;
        try {
            spec = pc.kind == PenaltyKind::lasso ? make_lasso()
                   : pc.kind == PenaltyKind::mcp ? make_mcp(gamma)
                                                 : make_scad(gamma);
        } catch (const Error& e) {
            pres.stalled = true;
            pres.note = e.what();
            out.penalties.push_back(std::move(pres));
            continue;
        }

        std::vector<double> lambdas = cfg.lambda_values;
        if (lambdas.empty() && !cfg.noiseless()) {
            const double base_lambda =
                (cfg.sigma_rule == SigmaRule::path_estimate)
                    ? lambda_univ(cfg.n, cfg.p, 1.0)  // scaled after sigma_hat below
                    : lambda_univ(cfg.n, cfg.p, sigma_used);
            for (double f : cfg.lambda_factors) lambdas.push_back(f * base_lambda);
        }

        PathOptions opts;
        opts.k_max = cfg.k_max;
        if (!cfg.noiseless()) {
            double lam_min = std::numeric_limits<double>::infinity();
            for (double l : lambdas) lam_min = std::min(lam_min, l);
            if (cfg.estimate_sigma || cfg.sigma_rule == SigmaRule::path_estimate)
                lam_min = std::min(lam_min, default_lambda_star(cfg.n, cfg.p));
            opts.lambda_floor = 0.45 * lam_min;
        }

        SolutionPath path;
        try {
            path = compute_path(data, spec, opts);
        } catch (const Error& e) {
            pres.stalled = true;
            pres.note = e.what();
            out.penalties.push_back(std::move(pres));
            continue;
        }
        if (path.termination == Termination::stalled) {
            pres.stalled = true;
            pres.note = path.diagnostic;
            out.penalties.push_back(std::move(pres));
            continue;
        }

        if (cfg.estimate_sigma || cfg.sigma_rule == SigmaRule::path_estimate) {
            try {
                const auto sh = sigma_hat(data, path, spec, cfg.r0);
                pres.sigma_hat = sh.sigma;
                pres.lambda_hat = sh.lambda_hat;
                if (cfg.sigma_rule == SigmaRule::path_estimate) {
                    sigma_used = sh.sigma;
                    lambdas.clear();
                    for (double f : cfg.lambda_factors)
                        lambdas.push_back(f * lambda_univ(cfg.n, cfg.p, sigma_used));
                }
            } catch (const Error& e) {
                pres.note = e.what();
            }
        }

        if (cfg.noiseless()) {
            const Vector bf = path.beta_final();
            double err = 0.0;
            for (std::size_t j = 0; j < cfg.p; ++j) err = std::max(err, std::abs(bf[j] - sig.beta[j]));
            pres.recovered =
                (path.termination == Termination::perfect_fit
                 && err <= 1e-8 * std::max(1.0, std::abs(cfg.beta_star))) ? 1 : 0;
            pres.fn_last = 0;
            for (std::size_t j : sig.support)
                if (bf[j] == 0.0) ++pres.fn_last;
            pres.k_star = path.k_star();
        } else {
            for (double lam : lambdas) {
                CellResult cell;
                cell.lambda = lam;
                try {
                    const Vector bh = beta_at_lambda(path, lam, EstimatorRule::first_reach);
                    cell.metrics = evaluate(bh, sig.beta, data);
                    cell.metrics.steps = steps_to_lambda(path, lam);
                } catch (const Error& e) {
                    pres.stalled = true;
                    pres.note = e.what();
                    break;
                }
                pres.cells.push_back(cell);
            }
        }
        out.penalties.push_back(std::move(pres));
    }
    out.sigma_used = sigma_used;
    return out;
}

struct SummaryRow {
    std::string penalty;
    double gamma = 0.0;
    double lambda = 0.0;  // representative (mean over ok reps)
    std::size_t ok = 0;
    std::size_t stalled = 0;
    double cs_mean = 0.0;
    double se_beta_mean = 0.0;
    double se_mu_mean = 0.0;
    double fn_mean = 0.0;
    double fp_mean = 0.0;
    double steps_mean = 0.0;
    // noiseless-mode aggregates
    double recovery_rate = 0.0;
    double fn_mean_failed = 0.0;
    double k_mean_recovered = 0.0;
    double k_mean_failed = 0.0;
    // noise-estimation aggregate
    double sigma_hat_mean = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<RepResult> reps;
    std::vector<SummaryRow> summary;
};

inline std::vector<SummaryRow> summarize(const ExperimentConfig& cfg,
                                         const std::vector<RepResult>& reps) {
    std::vector<SummaryRow> rows;
    const std::size_t n_pen = cfg.penalties.size();
    for (std::size_t pi = 0; pi < n_pen; ++pi) {
        std::size_t n_cells = 0;
        for (const auto& rep : reps)
            if (pi < rep.penalties.size())
                n_cells = std::max(n_cells, rep.penalties[pi].cells.size());
        const std::size_t loop = cfg.noiseless() ? 1 : std::max<std::size_t>(1, n_cells);
        for (std::size_t ci = 0; ci < loop; ++ci) {
            SummaryRow row;
            double lambda_sum = 0.0, gamma_sum = 0.0;
            double sig_sum = 0.0;
            std::size_t sig_count = 0;
            std::size_t rec = 0, failed = 0;
            double fn_failed = 0.0, k_rec = 0.0, k_failed = 0.0;
            for (const auto& rep : reps) {
                const auto& pres = rep.penalties[pi];
                if (row.penalty.empty()) row.penalty = pres.label;
                if (pres.stalled) {
                    ++row.stalled;
                    continue;
                }
                if (!cfg.noiseless() && ci >= pres.cells.size()) {
                    ++row.stalled;
                    continue;
                }
                ++row.ok;
                gamma_sum += pres.gamma_used;
                if (!std::isnan(pres.sigma_hat)) {
                    sig_sum += pres.sigma_hat;
                    ++sig_count;
                }
                if (cfg.noiseless()) {
                    if (pres.recovered) {
                        ++rec;
                        k_rec += static_cast<double>(pres.k_star);
                    } else {
                        ++failed;
                        fn_failed += static_cast<double>(pres.fn_last);
                        k_failed += static_cast<double>(pres.k_star);
                    }
                } else {
                    const auto& cell = pres.cells[ci];
                    lambda_sum += cell.lambda;
                    row.cs_mean += cell.metrics.cs;
                    row.se_beta_mean += cell.metrics.se_beta;
                    row.se_mu_mean += cell.metrics.se_mu;
                    row.fn_mean += static_cast<double>(cell.metrics.fn);
                    row.fp_mean += static_cast<double>(cell.metrics.fp);
                    row.steps_mean += static_cast<double>(cell.metrics.steps);
                }
            }
            if (row.ok > 0) {
                const double d = static_cast<double>(row.ok);
                row.gamma = gamma_sum / d;
                row.lambda = lambda_sum / d;
                row.cs_mean /= d;
                row.se_beta_mean /= d;
                row.se_mu_mean /= d;
                row.fn_mean /= d;
                row.fp_mean /= d;
                row.steps_mean /= d;
                row.recovery_rate = static_cast<double>(rec) / d;
                row.fn_mean_failed = failed > 0 ? fn_failed / static_cast<double>(failed) : 0.0;
                row.k_mean_recovered = rec > 0 ? k_rec / static_cast<double>(rec) : 0.0;
                row.k_mean_failed = failed > 0 ? k_failed / static_cast<double>(failed) : 0.0;
                if (sig_count > 0) row.sigma_hat_mean = sig_sum / static_cast<double>(sig_count);
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t threads = 1) {
    cfg.check();
    ExperimentResult result;
    result.config = cfg;
    result.reps.resize(cfg.reps);

    if (threads <= 1 || cfg.reps == 1) {
        for (std::size_t r = 0; r < cfg.reps; ++r) result.reps[r] = run_replication(cfg, r);
    } else {
        const std::size_t nt = std::min(threads, cfg.reps);
        std::vector<std::thread> workers;
        std::vector<std::string> errors(nt);
        for (std::size_t t = 0; t < nt; ++t) {
            workers.emplace_back([&, t] {
                try {
                    for (std::size_t r = t; r < cfg.reps; r += nt)
                        result.reps[r] = run_replication(cfg, r);
                } catch (const std::exception& e) {
                    errors[t] = e.what();
                }
            });
        }
        for (auto& w : workers) w.join();
        for (const auto& e : errors)
            if (!e.empty()) throw Error("replication worker failed: " + e);
    }
    result.summary = summarize(cfg, result.reps);
    return result;
}

} // namespace plus
