// Command line driver: fit solution paths, query estimators, compute
// risk/noise estimates, evaluate bound quantities, run experiments.
//
// CSV conventions: rows are observations, comma separated, LF line ends,
// no header unless --header is given. Numeric output uses shortest
// round-trip decimals so pipelines are lossless.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "plus/bounds.hpp"
#include "plus/errors.hpp"
#include "plus/estimator.hpp"
#include "plus/io.hpp"
#include "plus/linalg.hpp"
#include "plus/path.hpp"
#include "plus/penalty.hpp"
#include "plus/risk.hpp"
#include "plus/sim.hpp"

namespace {

using nlohmann::json;

plus::RegressionData load_data(const std::string& x_path, const std::string& y_path,
                               bool header) {
    plus::Matrix x = plus::read_csv_matrix(x_path, header);
    plus::Vector y = plus::read_csv_vector(y_path, header);
    if (y.size() != x.rows())
        throw plus::IoError("dimension mismatch: X has " + std::to_string(x.rows())
                            + " rows, y has " + std::to_string(y.size()));
    return plus::make_data(std::move(x), std::move(y));
}

plus::PenaltySpec build_penalty(const std::string& kind, double gamma) {
    if (kind == "lasso") return plus::make_lasso();
    if (kind == "mcp") {
        if (std::abs(gamma - 1.0) < 1e-3)
            std::cerr << "warning: mcp with gamma near 1 is singular under standardized "
                         "designs whenever sum |eta_j| = 1; the fit proceeds\n";
        return plus::make_mcp(gamma);
    }
    if (kind == "scad") return plus::make_scad(gamma);
    throw plus::ConfigError("unknown penalty kind '" + kind + "'");
}

std::string csv_row(const std::vector<std::string>& cells) {
    std::string row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) row += ',';
        row += cells[i];
    }
    row += '\n';
    return row;
}

// ------------------------------------------------------------------
// fit

int cmd_fit(const std::string& x_path, const std::string& y_path, bool header,
            const std::string& penalty_kind, double gamma, bool standardize, std::size_t kmax,
            double lambda_floor, const std::string& out_path, double lambda,
            const std::string& rule) {
    plus::RegressionData data = load_data(x_path, y_path, header);
    plus::RegressionData fit_data = standardize ? plus::standardize_columns(data) : data;
    const plus::PenaltySpec spec = build_penalty(penalty_kind, gamma);

    plus::PathOptions opts;
    opts.k_max = kmax;
    opts.lambda_floor = lambda_floor;
    opts.allow_unstandardized = !standardize;
    const plus::SolutionPath path = plus::compute_path(fit_data, spec, opts);

    if (!out_path.empty()) {
        const json doc = plus::path_to_json(path, data.col_norms, standardize);
        plus::write_text_file(out_path, doc.dump(2) + "\n");
    }

    bool lambda_reached = false;
    if (lambda > 0.0) {
        try {
            const plus::EstimatorRule r = rule == "sparsest" ? plus::EstimatorRule::sparsest
                                                             : plus::EstimatorRule::first_reach;
            plus::Vector beta = plus::beta_at_lambda(path, lambda, r);
            if (standardize) beta = plus::beta_to_original_scale(data, beta);
            std::string out = "index,value\n";
            for (std::size_t j = 0; j < beta.size(); ++j)
                if (beta[j] != 0.0)
                    out += csv_row({std::to_string(j), plus::format_double(beta[j])});
            std::fputs(out.c_str(), stdout);
            lambda_reached = true;
        } catch (const plus::LambdaNotReachedError& e) {
            std::cerr << "error: " << e.what() << "\n";
        }
    }

    std::cerr << "termination: " << plus::termination_name(path.termination) << " after "
              << path.k_star() << " steps";
    if (!path.diagnostic.empty()) std::cerr << " (" << path.diagnostic << ")";
    std::cerr << "\n";

    if (path.termination == plus::Termination::perfect_fit || (lambda > 0.0 && lambda_reached))
        return 0;
    if (path.termination == plus::Termination::step_cap) return 2;
    if (path.termination == plus::Termination::stalled) return 3;
    return 0;
}

// ------------------------------------------------------------------
// risk

int cmd_risk(const std::string& path_file, const std::string& x_path, const std::string& y_path,
             bool header, double lambda, bool want_sigma_hat, double r0, double lambda_star,
             double sigma2_arg) {
    const json doc = json::parse(plus::read_text_file(path_file));
    plus::LoadedPath loaded = plus::path_from_json(doc);
    plus::RegressionData data = load_data(x_path, y_path, header);
    if (loaded.standardized) data = plus::standardize_columns(data);
    if (data.p() != loaded.path.p)
        throw plus::IoError("path document and design disagree on p");
    const plus::PenaltySpec& spec = loaded.path.penalty;

    if (want_sigma_hat) {
        const auto sh = plus::sigma_hat(data, loaded.path, spec, r0, lambda_star);
        std::string out = "sigma_hat,lambda_hat,no_crossing\n";
        out += csv_row({plus::format_double(sh.sigma), plus::format_double(sh.lambda_hat),
                        sh.no_crossing ? "1" : "0"});
        std::fputs(out.c_str(), stdout);
        if (sh.no_crossing)
            std::cerr << "warning: the sigma_hat inequality never held above lambda_star; "
                         "reporting sigma_hat at lambda_star\n";
        return 0;
    }

    double sigma2 = sigma2_arg;
    if (sigma2 <= 0.0) {
        const auto proj = plus::project_onto_columns(data.x, data.y);
        if (proj.rank >= data.n())
            throw plus::ConfigError(
                "sigma2 is required when rank(X) = n; pass --sigma2 or use --sigma-hat");
        double rss = 0.0;
        for (std::size_t i = 0; i < data.n(); ++i) {
            const double r = data.y[i] - proj.projected[i];
            rss += r * r;
        }
        sigma2 = rss / static_cast<double>(data.n() - proj.rank);
    }

    const plus::RiskReport rep = plus::risk_report(data, loaded.path, lambda, spec, sigma2);
    std::string out = "lambda,df_hat,cp_hat,sigma2_at_lambda,active_count,sigma2_used\n";
    out += csv_row({plus::format_double(rep.lambda), plus::format_double(rep.df_hat),
                    plus::format_double(rep.cp_hat), plus::format_double(rep.sigma2_at_lambda),
                    std::to_string(rep.active_count), plus::format_double(rep.sigma2_used)});
    std::fputs(out.c_str(), stdout);
    return 0;
}

// ------------------------------------------------------------------
// simulate

plus::ExperimentConfig parse_config(const json& j) {
    plus::ExperimentConfig cfg;
    const std::string design = j.value("design", std::string("iid-gaussian"));
    if (design == "grouped" || design == "grouped-exp1" || design == "grouped-exp3")
        cfg.design = plus::DesignKind::grouped;
    else if (design == "ar-gaussian")
        cfg.design = plus::DesignKind::ar_gaussian;
    else if (design == "iid-gaussian")
        cfg.design = plus::DesignKind::iid_gaussian;
    else
        throw plus::ConfigError("unknown design '" + design + "'");
    cfg.n = j.at("n").get<std::size_t>();
    cfg.p = j.at("p").get<std::size_t>();
    cfg.d0 = j.value("d0", std::size_t{0});
    cfg.beta_star = j.value("beta_star", 1.0);
    const std::string pattern = j.value("beta_pattern", std::string("pm-constant"));
    if (pattern == "pm-constant")
        cfg.beta_pattern = plus::BetaPattern::pm_constant;
    else if (pattern == "blocks")
        cfg.beta_pattern = plus::BetaPattern::blocks;
    else
        throw plus::ConfigError("unknown beta_pattern '" + pattern + "'");
    cfg.sigma = j.value("sigma", 1.0);
    if (!j.contains("penalties") || !j["penalties"].is_array() || j["penalties"].empty())
        throw plus::ConfigError("config requires a non-empty penalties array");
    for (const auto& jp : j["penalties"]) {
        plus::PenaltyChoice pc;
        const std::string kind = jp.at("kind").get<std::string>();
        pc.kind = kind == "lasso" ? plus::PenaltyKind::lasso
                  : kind == "mcp" ? plus::PenaltyKind::mcp
                  : kind == "scad"
                      ? plus::PenaltyKind::scad
                      : throw plus::ConfigError("unknown penalty kind '" + kind + "'");
        pc.gamma = jp.value("gamma", 2.0);
        pc.corr_rule = jp.value("corr_rule", false);
        cfg.penalties.push_back(pc);
    }
    if (j.contains("lambdas")) {
        const auto& jl = j["lambdas"];
        if (jl.is_array()) {
            cfg.lambda_values = jl.get<std::vector<double>>();
        } else if (jl.is_object()) {
            if (jl.value("rule", std::string("univ")) != "univ")
                throw plus::ConfigError("lambdas.rule must be 'univ'");
            cfg.lambda_factors = jl.value("factors", std::vector<double>{1.0});
        } else {
            throw plus::ConfigError("lambdas must be an array or {rule, factors}");
        }
    }
    const std::string sr = j.value("sigma_rule", std::string("known"));
    cfg.sigma_rule = sr == "known"        ? plus::SigmaRule::known
                     : sr == "full-model" ? plus::SigmaRule::full_model
                     : sr == "path-estimate"
                         ? plus::SigmaRule::path_estimate
                         : throw plus::ConfigError("unknown sigma_rule '" + sr + "'");
    cfg.reps = j.value("reps", std::size_t{1});
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.k_max = j.value("kmax", std::size_t{5000});
    cfg.pool_mult = j.value("pool_mult", std::size_t{3});
    cfg.group_size = j.value("group_size", std::size_t{10});
    cfg.rho12 = j.value("rho12", 0.0);
    cfg.estimate_sigma = j.value("estimate_sigma", false);
    cfg.r0 = j.value("r0", 1.0);
    return cfg;
}

std::string summary_csv(const std::vector<plus::SummaryRow>& rows) {
    std::string out =
        "penalty,gamma,lambda,ok,stalled,cs_mean,se_beta_mean,se_mu_mean,fn_mean,fp_mean,"
        "steps_mean,recovery_rate,fn_mean_failed,k_mean_recovered,k_mean_failed,sigma_hat_mean\n";
    for (const auto& r : rows)
        out += csv_row({r.penalty, plus::format_double(r.gamma), plus::format_double(r.lambda),
                        std::to_string(r.ok), std::to_string(r.stalled),
                        plus::format_double(r.cs_mean), plus::format_double(r.se_beta_mean),
                        plus::format_double(r.se_mu_mean), plus::format_double(r.fn_mean),
                        plus::format_double(r.fp_mean), plus::format_double(r.steps_mean),
                        plus::format_double(r.recovery_rate),
                        plus::format_double(r.fn_mean_failed),
                        plus::format_double(r.k_mean_recovered),
                        plus::format_double(r.k_mean_failed),
                        plus::format_double(r.sigma_hat_mean)});
    return out;
}

std::string long_csv(const std::vector<plus::SummaryRow>& rows) {
    std::string out = "penalty,gamma,lambda,metric,value\n";
    const auto emit = [&](const plus::SummaryRow& r, const char* metric, double v) {
        out += csv_row({r.penalty, plus::format_double(r.gamma), plus::format_double(r.lambda),
                        metric, plus::format_double(v)});
    };
    for (const auto& r : rows) {
        emit(r, "cs_mean", r.cs_mean);
        emit(r, "se_beta_mean", r.se_beta_mean);
        emit(r, "se_mu_mean", r.se_mu_mean);
        emit(r, "fn_mean", r.fn_mean);
        emit(r, "fp_mean", r.fp_mean);
        emit(r, "steps_mean", r.steps_mean);
        emit(r, "recovery_rate", r.recovery_rate);
        emit(r, "fn_mean_failed", r.fn_mean_failed);
        emit(r, "k_mean_recovered", r.k_mean_recovered);
        emit(r, "k_mean_failed", r.k_mean_failed);
        if (!std::isnan(r.sigma_hat_mean)) emit(r, "sigma_hat_mean", r.sigma_hat_mean);
    }
    return out;
}

json replications_json(const plus::ExperimentResult& result) {
    json reps = json::array();
    for (const auto& rep : result.reps) {
        json jr;
        jr["rep"] = rep.rep;
        jr["sigma_used"] = rep.sigma_used;
        json pens = json::array();
        for (const auto& pres : rep.penalties) {
            json jp;
            jp["penalty"] = pres.label;
            jp["gamma"] = pres.gamma_used;
            jp["stalled"] = pres.stalled;
            if (!pres.note.empty()) jp["note"] = pres.note;
            json cells = json::array();
            for (const auto& c : pres.cells) {
                cells.push_back({{"lambda", c.lambda},
                                 {"cs", c.metrics.cs},
                                 {"se_beta", c.metrics.se_beta},
                                 {"se_mu", c.metrics.se_mu},
                                 {"fn", c.metrics.fn},
                                 {"fp", c.metrics.fp},
                                 {"steps", c.metrics.steps}});
            }
            jp["cells"] = std::move(cells);
            if (result.config.noiseless()) {
                jp["recovered"] = pres.recovered;
                jp["fn_last"] = pres.fn_last;
                jp["k_star"] = pres.k_star;
            }
            if (!std::isnan(pres.sigma_hat)) {
                jp["sigma_hat"] = pres.sigma_hat;
                jp["lambda_hat"] = pres.lambda_hat;
            }
            pens.push_back(std::move(jp));
        }
        jr["penalties"] = std::move(pens);
        reps.push_back(std::move(jr));
    }
    return reps;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::int64_t seed_override, std::size_t parallel) {
    const json jcfg = json::parse(plus::read_text_file(config_path));
    plus::ExperimentConfig cfg = parse_config(jcfg);
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    cfg.check();

    const plus::ExperimentResult result = plus::run_experiment(cfg, parallel);

    std::filesystem::create_directories(out_dir);
    plus::write_text_file(out_dir + "/summary.csv", summary_csv(result.summary));
    plus::write_text_file(out_dir + "/long.csv", long_csv(result.summary));
    plus::write_text_file(out_dir + "/replications.json", replications_json(result).dump(2) + "\n");
    std::fputs(summary_csv(result.summary).c_str(), stdout);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"plus: exact piecewise-linear solution paths for concave penalized "
                 "least squares (LASSO / MCP / SCAD), risk and noise estimation, "
                 "bound calculators, and simulation experiments"};
    app.set_version_flag("--version", std::string("plus ") + plus::kToolVersion
                                          + " (tol_solve=1e-10, tol_knot=1e-9, tol_kkt=1e-9, "
                                            "tol_fit=1e-9, sigma_hat bisection 1e-6)");
    app.require_subcommand(1);

    // ---- fit
    auto* fit = app.add_subcommand("fit", "trace a penalized solution path");
    std::string x_path, y_path, out_path, penalty_kind = "mcp", rule = "first-reach";
    bool header = false, no_standardize = false;
    double gamma = 2.0, lambda = 0.0, lambda_floor = 0.0;
    std::size_t kmax = 5000;
    fit->add_option("--x", x_path, "design matrix CSV, rows are observations")->required();
    fit->add_option("--y", y_path, "response CSV, one value per row")->required();
    fit->add_flag("--header", header, "skip one header row in the CSV inputs");
    fit->add_option("--penalty", penalty_kind, "lasso | mcp | scad")
        ->check(CLI::IsMember({"lasso", "mcp", "scad"}));
    fit->add_option("--gamma", gamma, "threshold factor (mcp: >0, scad: >2)");
    fit->add_flag("--no-standardize", no_standardize,
                  "fit raw columns (threshold interpretation then only approximate)");
    fit->add_option("--kmax", kmax, "step cap (default 5000)");
    fit->add_option("--lambda-floor", lambda_floor, "stop once lambda falls below this level");
    fit->add_option("--out", out_path, "write the PathDocument JSON here");
    fit->add_option("--lambda", lambda, "also print beta(lambda) as sparse CSV on stdout");
    fit->add_option("--rule", rule, "estimator rule for --lambda")
        ->check(CLI::IsMember({"first-reach", "sparsest"}));

    // ---- risk
    auto* risk = app.add_subcommand("risk", "degrees of freedom, Cp and noise estimates");
    std::string r_path, r_x, r_y;
    bool r_header = false, want_sigma_hat = false;
    double r_lambda = 0.0, r0 = 1.0, lambda_star = -1.0, sigma2 = 0.0;
    risk->add_option("--path", r_path, "PathDocument JSON from `fit`")->required();
    risk->add_option("--x", r_x, "design matrix CSV")->required();
    risk->add_option("--y", r_y, "response CSV")->required();
    risk->add_flag("--header", r_header, "skip one header row in the CSV inputs");
    risk->add_option("--lambda", r_lambda, "penalty level for df/Cp/sigma2(lambda)");
    risk->add_flag("--sigma-hat", want_sigma_hat, "estimate the noise level instead");
    risk->add_option("--r0", r0, "sigma_hat rule constant (default 1)");
    risk->add_option("--lambda-star", lambda_star,
                     "lower scan limit (default sqrt(log(p)/(8n)))");
    risk->add_option("--sigma2", sigma2, "known noise variance for Cp");

    // ---- bounds
    auto* bounds = app.add_subcommand("bounds", "theoretical bound calculators");
    bounds->require_subcommand(1);
    auto* lu = bounds->add_subcommand("lambda-univ", "universal penalty level");
    std::size_t lu_n = 0, lu_p = 0;
    double lu_sigma = 1.0;
    lu->add_option("--n", lu_n)->required();
    lu->add_option("--p", lu_p)->required();
    lu->add_option("--sigma", lu_sigma);
    auto* pt = bounds->add_subcommand("ptilde", "solve the p~_eps equation");
    std::size_t pt_p = 0, pt_d0 = 0, pt_m = 0;
    double pt_eps = 1.0;
    pt->add_option("--p", pt_p)->required();
    pt->add_option("--d0", pt_d0)->required();
    pt->add_option("--m", pt_m)->required();
    pt->add_option("--eps", pt_eps);
    auto* ks = bounds->add_subcommand("kstar", "false-positive constant K*");
    double ks_cstar = 1.0, ks_cupper = 1.0, ks_kappa = 0.0, ks_alpha = 0.5;
    ks->add_option("--cstar", ks_cstar)->required();
    ks->add_option("--cupper", ks_cupper)->required();
    ks->add_option("--kappa", ks_kappa);
    ks->add_option("--alpha", ks_alpha);
    auto* gt = bounds->add_subcommand("gamma-threshold", "MCP gamma threshold");
    double gt_cstar = 1.0, gt_cupper = 1.0;
    gt->add_option("--cstar", gt_cstar)->required();
    gt->add_option("--cupper", gt_cupper)->required();
    auto* sp = bounds->add_subcommand("src-probe", "Monte Carlo sparse-Riesz probe");
    std::string sp_x;
    std::size_t sp_d = 1, sp_reps = 100;
    double sp_gamma = 2.0;
    std::uint64_t sp_seed = 0;
    bool sp_header = false;
    sp->add_option("--x", sp_x, "design matrix CSV")->required();
    sp->add_option("--d", sp_d, "subset size")->required();
    sp->add_option("--gamma", sp_gamma);
    sp->add_option("--reps", sp_reps);
    sp->add_option("--seed", sp_seed);
    sp->add_flag("--header", sp_header);

    // ---- simulate
    auto* sim = app.add_subcommand("simulate", "run a replication experiment");
    std::string sim_config, sim_out = ".";
    std::int64_t sim_seed = -1;
    std::size_t sim_parallel = 1;
    sim->add_option("--config", sim_config, "ExperimentConfig JSON")->required();
    sim->add_option("--out", sim_out, "output directory");
    sim->add_option("--seed", sim_seed, "override the config seed");
    sim->add_option("--parallel", sim_parallel, "worker threads for replications");

    CLI11_PARSE(app, argc, argv);

    try {
        if (fit->parsed())
            return cmd_fit(x_path, y_path, header, penalty_kind, gamma, !no_standardize, kmax,
                           lambda_floor, out_path, lambda, rule);
        if (risk->parsed())
            return cmd_risk(r_path, r_x, r_y, r_header, r_lambda, want_sigma_hat, r0, lambda_star,
                            sigma2);
        if (bounds->parsed()) {
            if (lu->parsed()) {
                std::printf("lambda_univ\n%s\n",
                            plus::format_double(plus::lambda_univ(lu_n, lu_p, lu_sigma)).c_str());
            } else if (pt->parsed()) {
                std::printf("ptilde\n%s\n",
                            plus::format_double(plus::ptilde(pt_p, pt_d0, pt_m, pt_eps)).c_str());
            } else if (ks->parsed()) {
                std::printf("kstar\n%s\n",
                            plus::format_double(plus::kstar(ks_cstar, ks_cupper, ks_kappa,
                                                            ks_alpha)).c_str());
            } else if (gt->parsed()) {
                std::printf("gamma_threshold\n%s\n",
                            plus::format_double(plus::gamma_threshold(gt_cstar,
                                                                      gt_cupper)).c_str());
            } else if (sp->parsed()) {
                plus::Matrix x = plus::read_csv_matrix(sp_x, sp_header);
                plus::Vector y0(x.rows(), 0.0);
                const plus::RegressionData d = plus::make_data(std::move(x), std::move(y0));
                const auto probe = plus::src_probe(d, sp_d, sp_gamma, sp_reps, sp_seed);
                std::printf("fraction_pass,cmin_mean,cmin_mean_minus_2sd\n%s,%s,%s\n",
                            plus::format_double(probe.fraction_pass).c_str(),
                            plus::format_double(probe.cmin_mean()).c_str(),
                            plus::format_double(probe.cmin_mean_minus_2sd()).c_str());
            }
            return 0;
        }
        if (sim->parsed()) return cmd_simulate(sim_config, sim_out, sim_seed, sim_parallel);
    } catch (const plus::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
