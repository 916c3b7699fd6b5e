// Command-line driver: identity verification, bias sweeps, Monte-Carlo rate
// studies, cross-fitted estimation, and the three-method comparison table.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "kadv/config.hpp"
#include "kadv/scenarios.hpp"
#include "kadv/simkit.hpp"

namespace {

using namespace kadv;

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 0;
    std::string methods;
    bool emit_plotdata = false;
};

void add_common(CLI::App* sub, CommonOpts& opts) {
    sub->add_option("--config", opts.config_path, "TOML-style config file");
    sub->add_option("--out", opts.out_dir, "output directory for CSV files");
    sub->add_option("--seed", opts.seed, "base seed override")
        ->each([&opts](const std::string&) { opts.seed_set = true; });
    sub->add_option("--jobs", opts.jobs, "worker threads (default from config)");
    sub->add_option("--method", opts.methods,
                    "comma-separated subset of KRAS,LRAS,KMMR");
    sub->add_flag("--emit-plotdata", opts.emit_plotdata,
                  "also write tidy long-format CSV");
}

ExperimentConfig load_experiment(const CommonOpts& opts) {
    Config cfg = opts.config_path.empty()
                     ? Config::parse_string("")
                     : Config::parse_file(opts.config_path);
    ExperimentConfig ec = ExperimentConfig::from_config(cfg);
    if (opts.seed_set) ec.seed = opts.seed;
    if (opts.jobs > 0) ec.jobs = opts.jobs;
    if (!opts.methods.empty()) {
        ec.methods.clear();
        std::size_t pos = 0;
        const std::string& ms = opts.methods;
        while (pos != std::string::npos) {
            std::size_t comma = ms.find(',', pos);
            std::string tok = ms.substr(
                pos, comma == std::string::npos ? std::string::npos : comma - pos);
            if (!tok.empty()) ec.methods.push_back(method_from_string(tok));
            pos = comma == std::string::npos ? comma : comma + 1;
        }
    }
    ec.validate();
    return ec;
}

std::string out_path(const CommonOpts& opts, const std::string& name) {
    std::filesystem::create_directories(opts.out_dir);
    return (std::filesystem::path(opts.out_dir) / name).string();
}

bool report(const std::string& label, bool ok, const std::string& detail) {
    std::printf("%-34s %s  %s\n", label.c_str(), ok ? "PASS" : "FAIL",
                detail.c_str());
    return ok;
}

// -------------------------------------------------------------------------
// verify: operator identities, Prop-2 inner maximum, triple theta, source
// residuals, on the configured (or default) workbench scenario.
int cmd_verify(const CommonOpts& opts) {
    ExperimentConfig ec = load_experiment(opts);
    DiscreteDGP dgp = random_dgp(ec.n_w, ec.n_z, ec.x_states, ec.mask, ec.dgp_seed);
    DualScenario dual = make_dual_scenario(dgp, ec.kernel_h, ec.kernel_g,
                                           ec.beta, ec.variant, ec.dgp_seed + 1);
    const SourceProblem& prob = dual.h_prob;
    bool all = true;

    // adjointness <Th, g>_Z = <h, T*g>_W over random vectors
    std::mt19937_64 rng(ec.seed + 5);
    std::normal_distribution<double> nd;
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        Eigen::VectorXd h(dgp.w_points.rows()), g(dgp.z_points.rows());
        for (long i = 0; i < h.size(); ++i) h(i) = nd(rng);
        for (long i = 0; i < g.size(); ++i) g(i) = nd(rng);
        double lhs = weighted_inner(prob.t.apply(h), g, dgp.p_z());
        double rhs = weighted_inner(h, prob.t_adjoint.apply(g), dgp.p_w());
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    all &= report("adjointness", worst <= 1e-10,
                  "max |<Th,g>-<h,T*g>| = " + std::to_string(worst));

    // square root reconstruction
    double sq_err = (prob.t_h_sqrt.entries * prob.t_h_sqrt.entries -
                     prob.t_h.entries)
                        .cwiseAbs()
                        .maxCoeff();
    all &= report("operator sqrt", sq_err <= 1e-10,
                  "max |S*S - T_H| = " + std::to_string(sq_err));

    // source residual: T I0 h0 = rho
    Eigen::VectorXd resid =
        prob.t.apply(dgp.i0_w().cwiseProduct(prob.h0_dag)).cwiseProduct(dgp.i0_z()) -
        prob.rho;
    double res = resid.cwiseAbs().maxCoeff();
    all &= report("source residual", res <= 1e-10,
                  "max |T I0 h0 - rho| = " + std::to_string(res));

    // inner maximum against the population formula
    double p2_worst = 0.0;
    for (int t = 0; t < 10; ++t) {
        Eigen::VectorXd h(dgp.w_points.rows());
        for (long i = 0; i < h.size(); ++i) h(i) = nd(rng);
        auto [gstar, val] = inner_max_population(prob, h, 1.0);
        Eigen::VectorXd diff =
            dgp.i0_z().cwiseProduct(prob.t.apply(dgp.i0_w().cwiseProduct(prob.h0_dag - h)));
        double ref = weighted_inner(diff, diff, dgp.p_z());
        p2_worst = std::max(p2_worst, std::abs(val - ref));
    }
    all &= report("population inner max", p2_worst <= 1e-9,
                  "max value error = " + std::to_string(p2_worst));

    // triple representation
    double theta = dual.theta;
    all &= report("triple theta", std::isfinite(theta),
                  "theta = " + std::to_string(theta));
    return all ? 0 : 1;
}

// -------------------------------------------------------------------------
int cmd_bias(const CommonOpts& opts) {
    ExperimentConfig ec = load_experiment(opts);
    Config cfg = opts.config_path.empty()
                     ? Config::parse_string("")
                     : Config::parse_file(opts.config_path);
    std::vector<double> lambdas =
        cfg.get_array("bias.lambda_grid",
                      {1e-7, 3e-7, 1e-6, 3e-6, 1e-5, 3e-5, 1e-4});
    double tol = cfg.get_double("bias.tolerance", 0.10);
    long curve_seeds = cfg.get_long("bias.curve_seeds", 1);

    DiscreteDGP dgp = ec.build_dgp();
    SourceProblem prob = make_source_problem(dgp, ec.kernel_h, ec.beta,
                                             ec.variant, ec.dgp_seed + 1,
                                             ec.profile);
    BiasSweep sweep = bias_sweep(prob, lambdas, tol);
    for (long si = 1; si < curve_seeds; ++si) {
        SourceProblem ps = make_source_problem(dgp, ec.kernel_h, ec.beta,
                                               ec.variant,
                                               ec.dgp_seed + 1 + si,
                                               ec.profile);
        BiasSweep ss = bias_sweep(ps, lambdas, tol);
        for (std::size_t i = 0; i < lambdas.size(); ++i) {
            sweep.rkhs_error2[i] += ss.rkhs_error2[i];
            sweep.weak_error2[i] += ss.weak_error2[i];
        }
    }
    if (curve_seeds > 1) {
        for (std::size_t i = 0; i < lambdas.size(); ++i) {
            sweep.rkhs_error2[i] /= static_cast<double>(curve_seeds);
            sweep.weak_error2[i] /= static_cast<double>(curve_seeds);
        }
        sweep.rkhs_fit = fit_loglog(lambdas, sweep.rkhs_error2,
                                    std::min(ec.beta, 2.0), tol);
        sweep.weak_fit = fit_loglog(lambdas, sweep.weak_error2,
                                    std::min(ec.beta + 1.0, 2.0), tol);
    }

    std::ofstream out(out_path(opts, "bias_sweep.csv"));
    out << "lambda,rkhs_error2,weak_error2\n";
    for (std::size_t i = 0; i < sweep.lambdas.size(); ++i)
        out << sweep.lambdas[i] << ',' << sweep.rkhs_error2[i] << ','
            << sweep.weak_error2[i] << '\n';

    bool ok = true;
    ok &= report("rkhs bias slope", sweep.rkhs_fit.pass,
                 "slope=" + std::to_string(sweep.rkhs_fit.slope) + " target=" +
                     std::to_string(sweep.rkhs_fit.target_exponent) +
                     " r2=" + std::to_string(sweep.rkhs_fit.r_squared));
    ok &= report("weak bias slope", sweep.weak_fit.pass,
                 "slope=" + std::to_string(sweep.weak_fit.slope) + " target=" +
                     std::to_string(sweep.weak_fit.target_exponent) +
                     " r2=" + std::to_string(sweep.weak_fit.r_squared));
    return ok ? 0 : 1;
}

// -------------------------------------------------------------------------
int cmd_rates(const CommonOpts& opts) {
    ExperimentConfig ec = load_experiment(opts);
    Config cfg = opts.config_path.empty()
                     ? Config::parse_string("")
                     : Config::parse_file(opts.config_path);
    // error curves can be averaged over several dgp seeds (step 100) before
    // the slope fit; smooths realization wobble in sparse spectra.
    long curve_seeds = cfg.get_long("rates.curve_seeds", 1);

    ReplicationTable table = run_experiment(ec);
    write_csv(table, out_path(opts, "rates.csv"));
    if (opts.emit_plotdata)
        write_plotdata(table, out_path(opts, "rates_long.csv"));
    if (table.failures > 0)
        std::printf("failures: %ld of %zu cells\n", table.failures,
                    table.rows.size());
    long total_failures = table.failures;

    double bmin = std::min(ec.beta, 1.0);
    double rmse_target = bmin / (1.0 + bmin);
    bool ok = true;
    for (Method m : ec.methods) {
        RateReport rmse = fit_rate(table, "rmse", "delta_n", m, rmse_target,
                                   ec.rate_tolerance);
        RateReport weak = fit_rate(table, "weak_error", "delta_n", m, 1.0,
                                   ec.rate_tolerance);
        for (long si = 1; si < curve_seeds; ++si) {
            ExperimentConfig es = ec;
            es.seed += static_cast<std::uint64_t>(si);
            es.dgp_seed += static_cast<std::uint64_t>(100 * si);
            ReplicationTable ts = run_experiment(es);
            total_failures += ts.failures;
            RateReport rs = fit_rate(ts, "rmse", "delta_n", m, 0.0, 1.0);
            RateReport ws = fit_rate(ts, "weak_error", "delta_n", m, 0.0, 1.0);
            for (size_t i = 0; i < rmse.mean_errors.size(); ++i) {
                rmse.mean_errors[i] += rs.mean_errors[i];
                weak.mean_errors[i] += ws.mean_errors[i];
            }
        }
        if (curve_seeds > 1) {
            for (size_t i = 0; i < rmse.mean_errors.size(); ++i) {
                rmse.mean_errors[i] /= static_cast<double>(curve_seeds);
                weak.mean_errors[i] /= static_cast<double>(curve_seeds);
            }
            rmse = fit_loglog(rmse.x, rmse.mean_errors, rmse_target,
                              ec.rate_tolerance);
            weak = fit_loglog(weak.x, weak.mean_errors, 1.0,
                              ec.rate_tolerance);
        }
        ok &= report(method_name(m) + " rmse rate", rmse.pass,
                     "slope=" + std::to_string(rmse.slope) +
                         " target=" + std::to_string(rmse_target) +
                         " r2=" + std::to_string(rmse.r_squared));
        ok &= report(method_name(m) + " weak rate", weak.pass,
                     "slope=" + std::to_string(weak.slope) + " target=1" +
                         " r2=" + std::to_string(weak.r_squared));
    }
    return ok && total_failures == 0 ? 0 : 1;
}

// -------------------------------------------------------------------------
int cmd_dml(const CommonOpts& opts) {
    ExperimentConfig ec = load_experiment(opts);
    Config cfg = opts.config_path.empty()
                     ? Config::parse_string("")
                     : Config::parse_file(opts.config_path);
    long n = cfg.get_long("dml.n", ec.n_grid.empty() ? 500 : ec.n_grid.back());
    int reps = static_cast<int>(cfg.get_long("dml.replications", ec.replications));
    double cov_lo = cfg.get_double("dml.coverage_low", 0.92);
    double cov_hi = cfg.get_double("dml.coverage_high", 0.97);

    DmlStudy study = run_dml_study(ec, n, reps);
    write_csv(study, out_path(opts, "dml.csv"));
    bool ok = true;
    if (ec.oracle_nuisances) {
        ok &= report(
            "coverage", study.coverage >= cov_lo && study.coverage <= cov_hi,
            "coverage=" + std::to_string(study.coverage) + " theta_true=" +
                std::to_string(study.theta_true) + " mean=" +
                std::to_string(study.mean_theta) + " failures=" +
                std::to_string(study.failures));
    } else {
        // estimated nuisances: bias must be small relative to one CI width
        double bias = std::abs(study.mean_theta - study.theta_true);
        ok &= report("bias vs clt", bias <= 2.0 * study.sd_theta,
                     "bias=" + std::to_string(bias) +
                         " sd=" + std::to_string(study.sd_theta) +
                         " coverage=" + std::to_string(study.coverage));
    }
    return ok && study.failures == 0 ? 0 : 1;
}

// -------------------------------------------------------------------------
// kmmr-compare: all three methods on the same replications; reports mean
// exact errors and conditioning side by side.
int cmd_kmmr_compare(const CommonOpts& opts) {
    ExperimentConfig ec = load_experiment(opts);
    ec.methods = {Method::KRAS, Method::LRAS, Method::KMMR};
    ReplicationTable table = run_experiment(ec);
    write_csv(table, out_path(opts, "kmmr_compare.csv"));
    if (opts.emit_plotdata)
        write_plotdata(table, out_path(opts, "kmmr_compare_long.csv"));

    std::printf("%-6s %12s %12s %12s\n", "method", "mean_rmse", "mean_weak",
                "n_fail");
    bool ok = table.failures == 0;
    for (Method m : ec.methods) {
        double rmse = 0.0, weak = 0.0;
        long cnt = 0, fail = 0;
        for (const RepRow& r : table.rows) {
            if (r.method != m) continue;
            if (r.failed) {
                ++fail;
                continue;
            }
            rmse += r.rmse;
            weak += r.weak_error;
            ++cnt;
        }
        if (cnt > 0) {
            rmse /= cnt;
            weak /= cnt;
        }
        std::printf("%-6s %12.6g %12.6g %12ld\n", method_name(m).c_str(), rmse,
                    weak, fail);
        ok &= cnt > 0;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernel adversarial estimation toolkit"};
    app.require_subcommand(1);

    CommonOpts v_opts, b_opts, r_opts, d_opts, k_opts;
    CLI::App* verify = app.add_subcommand("verify", "workbench identity suite");
    add_common(verify, v_opts);
    CLI::App* bias = app.add_subcommand("bias", "population bias-slope sweep");
    add_common(bias, b_opts);
    CLI::App* rates = app.add_subcommand("rates", "Monte-Carlo rate study");
    add_common(rates, r_opts);
    CLI::App* dml = app.add_subcommand("dml", "cross-fitted estimation study");
    add_common(dml, d_opts);
    CLI::App* kmmr =
        app.add_subcommand("kmmr-compare", "three-method comparison table");
    add_common(kmmr, k_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (verify->parsed()) return cmd_verify(v_opts);
        if (bias->parsed()) return cmd_bias(b_opts);
        if (rates->parsed()) return cmd_rates(r_opts);
        if (dml->parsed()) return cmd_dml(d_opts);
        if (kmmr->parsed()) return cmd_kmmr_compare(k_opts);
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 2;
    }
    return 2;
}
