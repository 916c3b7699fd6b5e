#include "kadv/simkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <thread>

#include "kadv/scenarios.hpp"

namespace kadv {

double delta_n(long n) {
    if (n < 2) throw std::invalid_argument("delta_n: n must be >= 2");
    return std::sqrt(std::log(static_cast<double>(n)) / n);
}

std::string method_name(Method method) {
    switch (method) {
        case Method::KRAS: return "KRAS";
        case Method::LRAS: return "LRAS";
        case Method::KMMR: return "KMMR";
    }
    throw std::logic_error("method_name: unknown method");
}

Method method_from_string(const std::string& name) {
    if (name == "KRAS" || name == "kras") return Method::KRAS;
    if (name == "LRAS" || name == "lras") return Method::LRAS;
    if (name == "KMMR" || name == "kmmr") return Method::KMMR;
    throw std::invalid_argument("unknown method: " + name);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// run cells [0, total) over `jobs` threads; each worker writes only its own
// preassigned slots, so output ordering never depends on scheduling
template <class Fn>
void parallel_cells(long total, int jobs, Fn&& fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || total <= 1) {
        for (long c = 0; c < total; ++c) fn(c);
        return;
    }
    std::vector<std::thread> workers;
    for (int t = 0; t < jobs; ++t)
        workers.emplace_back([&, t] {
            for (long c = t; c < total; c += jobs) fn(c);
        });
    for (auto& w : workers) w.join();
}

}  // namespace

std::uint64_t rep_seed(std::uint64_t seed, int n_index, int rep_index) {
    return splitmix64(seed ^ splitmix64((static_cast<std::uint64_t>(n_index) << 32) |
                                        static_cast<std::uint32_t>(rep_index)));
}

void ExperimentConfig::validate() const {
    if (scenario != "workbench" && scenario != "proximal" &&
        scenario != "policy_shift" && scenario != "mnar")
        throw std::invalid_argument("unknown scenario: " + scenario);
    if (dgp_kind != "random" && dgp_kind != "chain" && dgp_kind != "geometric" && dgp_kind != "circulant")
        throw std::invalid_argument("unknown dgp kind: " + dgp_kind);
    for (std::size_t i = 0; i + 1 < n_grid.size(); ++i)
        if (n_grid[i] >= n_grid[i + 1])
            throw std::invalid_argument("experiment: n grid must be strictly increasing");
    if (replications < 1)
        throw std::invalid_argument("experiment: replications must be >= 1");
    if (methods.empty())
        throw std::invalid_argument("experiment: no methods selected");
    if (beta <= 0.0) throw std::invalid_argument("experiment: beta must be positive");
    if (k_folds < 2) throw std::invalid_argument("experiment: k_folds must be >= 2");
}

ExperimentConfig ExperimentConfig::from_config(const Config& cfg) {
    ExperimentConfig ec;
    ec.scenario = cfg.get_string("experiment.scenario", ec.scenario);
    for (double v : cfg.get_array("experiment.n_grid", {}))
        ec.n_grid.push_back(static_cast<long>(v));
    ec.replications =
        static_cast<int>(cfg.get_long("experiment.replications", ec.replications));
    if (cfg.has("experiment.methods")) {
        ec.methods.clear();
        // methods are a comma-separated string, e.g. "KRAS,LRAS"
        std::string ms = cfg.get_string("experiment.methods");
        std::size_t pos = 0;
        while (pos != std::string::npos) {
            std::size_t comma = ms.find(',', pos);
            std::string tok = ms.substr(
                pos, comma == std::string::npos ? std::string::npos : comma - pos);
            if (!tok.empty()) ec.methods.push_back(method_from_string(tok));
            pos = comma == std::string::npos ? comma : comma + 1;
        }
    }
    ec.beta = cfg.get_double("experiment.beta", ec.beta);
    ec.variant = cfg.get_string("experiment.variant", "transformed") == "basic"
                     ? SourceVariant::basic
                     : SourceVariant::transformed;
    ec.seed = static_cast<std::uint64_t>(cfg.get_long("experiment.seed", 1));
    ec.jobs = static_cast<int>(cfg.get_long("experiment.jobs", ec.jobs));
    ec.k_folds = static_cast<int>(cfg.get_long("experiment.k_folds", ec.k_folds));
    ec.rate_tolerance =
        cfg.get_double("experiment.rate_tolerance", ec.rate_tolerance);
    ec.dgp_kind = cfg.get_string("dgp.kind", ec.dgp_kind);
    ec.chain_tau = cfg.get_double("dgp.chain_tau", ec.chain_tau);
    ec.geo_decades = cfg.get_double("dgp.geo_decades", ec.geo_decades);
    ec.circ_rho = cfg.get_double("dgp.circ_rho", ec.circ_rho);
    ec.aux_noise = cfg.get_double("dgp.aux_noise", ec.aux_noise);
    ec.oracle_nuisances =
        cfg.get_bool("dml.oracle_nuisances", ec.oracle_nuisances);
    ec.profile = cfg.get_string("dgp.seed_profile", "state") == "spectral"
                     ? SeedProfile::spectral_normal
                     : SeedProfile::state_normal;
    ec.n_w = static_cast<int>(cfg.get_long("dgp.n_w", ec.n_w));
    ec.n_z = static_cast<int>(cfg.get_long("dgp.n_z", ec.n_z));
    ec.x_states = static_cast<int>(cfg.get_long("dgp.x_states", ec.x_states));
    ec.mask = cfg.get_bool("dgp.mask", ec.mask);
    ec.dgp_seed = static_cast<std::uint64_t>(cfg.get_long("dgp.seed", 101));

    auto read_kernel = [&cfg](const std::string& section, KernelSpec& ks) {
        ks.family = KernelSpec::family_from_string(cfg.get_string(
            section + ".family", KernelSpec::family_to_string(ks.family)));
        ks.bandwidth = cfg.get_double(section + ".bandwidth", ks.bandwidth);
        ks.nu = cfg.get_double(section + ".nu", ks.nu);
        ks.degree = static_cast<int>(cfg.get_long(section + ".degree", ks.degree));
        ks.dimension =
            static_cast<int>(cfg.get_long(section + ".dimension", ks.dimension));
        ks.radius_constant =
            cfg.get_double(section + ".radius_constant", ks.radius_constant);
    };
    read_kernel("kernel_h", ec.kernel_h);
    read_kernel("kernel_g", ec.kernel_g);

    ec.tuning.c_h = cfg.get_double("tuning.c_h", ec.tuning.c_h);
    ec.tuning.c_g = cfg.get_double("tuning.c_g", ec.tuning.c_g);
    ec.tuning.c = cfg.get_double("tuning.c", ec.tuning.c);
    ec.tuning.b1 = cfg.get_double("tuning.b1", ec.tuning.b1);
    ec.validate();
    return ec;
}

DiscreteDGP ExperimentConfig::build_dgp() const {
    if (dgp_kind == "chain") return chain_dgp(n_w, chain_tau);
    if (dgp_kind == "geometric") return geometric_dgp(n_w, geo_decades);
    if (dgp_kind == "circulant") return circulant_dgp(n_w, circ_rho);
    return random_dgp(n_w, n_z, x_states, mask, dgp_seed);
}

ReplicationTable run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.n_grid.empty())
        throw std::invalid_argument("run_experiment: empty n grid");
    if (cfg.scenario != "workbench")
        throw std::invalid_argument(
            "run_experiment: only the workbench scenario has exact errors");
    DiscreteDGP dgp = cfg.build_dgp();
    DualScenario dual = make_dual_scenario(dgp, cfg.kernel_h, cfg.kernel_g,
                                           cfg.beta, cfg.variant,
                                           cfg.dgp_seed + 1, true, cfg.profile);
    dual.dgp.aux_noise_halfwidth = cfg.aux_noise;
    MomentSpec mspec = make_workbench_mspec(dual.dgp);
    double mu0 = dual.dgp.mu0();

    long n_methods = static_cast<long>(cfg.methods.size());
    long total = static_cast<long>(cfg.n_grid.size()) * cfg.replications * n_methods;
    ReplicationTable table;
    table.rows.resize(total);

    parallel_cells(total, cfg.jobs, [&](long cell) {
        long per_n = cfg.replications * n_methods;
        int ni = static_cast<int>(cell / per_n);
        int rep = static_cast<int>((cell % per_n) / n_methods);
        Method method = cfg.methods[cell % n_methods];
        long n = cfg.n_grid[ni];

        RepRow row;
        row.n = n;
        row.rep = rep;
        row.method = method;
        row.seed = rep_seed(cfg.seed, ni, rep);
        try {
            double dn = critical_radius(cfg.kernel_h, n, mu0);
            auto [lh, lg] = tune_lambdas(dn, cfg.beta, cfg.tuning);
            row.lambda_h = lh;
            row.lambda_g = lg;

            WbDataset wbds = sample(dual.dgp, n, row.seed);
            Dataset ds = to_dataset(dual.dgp, wbds);
            EstimatorConfig ec;
            ec.method = method;
            ec.lambda_h = lh;
            ec.lambda_g = lg;
            ec.c = cfg.tuning.c;
            ec.kernel_h = cfg.kernel_h;
            ec.kernel_g = cfg.kernel_g;
            FittedNuisance fitfn = fit(ds, mspec, ec);

            long p = dual.dgp.w_points.rows();
            Eigen::VectorXd hvals(p);
            for (long i = 0; i < p; ++i)
                hvals(i) = fitfn.f.evaluate(dual.dgp.w_points.row(i).transpose());
            ExactErrors err = exact_errors(dual.h_prob, hvals);
            row.rmse = err.rmse;
            row.weak_error = err.weak_error;
            row.rkhs_error = err.rkhs_error;
        } catch (const std::exception& ex) {
            row.failed = true;
            row.note = "n=" + std::to_string(n) + " rep=" + std::to_string(rep) +
                       " method=" + method_name(method) + ": " + ex.what();
        }
        table.rows[cell] = std::move(row);
    });
    for (const RepRow& r : table.rows) table.failures += r.failed ? 1 : 0;
    return table;
}

void write_csv(const ReplicationTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << "n,rep,method,seed,lambda_h,lambda_g,rmse,weak_error,rkhs_error,"
           "failed,note\n";
    for (const RepRow& r : table.rows) {
        out << r.n << ',' << r.rep << ',' << method_name(r.method) << ','
            << r.seed << ',' << fmt_double(r.lambda_h) << ','
            << fmt_double(r.lambda_g) << ',' << fmt_double(r.rmse) << ','
            << fmt_double(r.weak_error) << ',' << fmt_double(r.rkhs_error)
            << ',' << (r.failed ? 1 : 0) << ',' << r.note << '\n';
    }
}

void write_plotdata(const ReplicationTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << "n,rep,method,metric,value\n";
    for (const RepRow& r : table.rows) {
        if (r.failed) continue;
        const std::pair<const char*, double> metrics[] = {
            {"rmse", r.rmse},
            {"weak_error", r.weak_error},
            {"rkhs_error", r.rkhs_error},
        };
        for (const auto& [name, value] : metrics)
            out << r.n << ',' << r.rep << ',' << method_name(r.method) << ','
                << name << ',' << fmt_double(value) << '\n';
    }
}

RateReport fit_loglog(const std::vector<double>& xs,
                      const std::vector<double>& ys, double target_exponent,
                      double tolerance) {
    if (xs.size() != ys.size() || xs.size() < 3)
        throw std::invalid_argument("fit_loglog: need >= 3 matched points");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] <= 0.0 || ys[i] <= 0.0)
            throw std::invalid_argument("fit_loglog: inputs must be positive");
        lx.push_back(std::log(xs[i]));
        ly.push_back(std::log(ys[i]));
    }
    double n = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (sxx <= 0.0) throw std::invalid_argument("fit_loglog: degenerate x range");
    RateReport rep;
    rep.slope = sxy / sxx;
    rep.intercept = my - rep.slope * mx;
    rep.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    rep.target_exponent = target_exponent;
    rep.pass = std::abs(rep.slope - target_exponent) <= tolerance &&
               rep.r_squared >= 0.9;
    rep.x = xs;
    rep.mean_errors = ys;
    return rep;
}

RateReport fit_rate(const ReplicationTable& table,
                    const std::string& error_column, const std::string& x_axis,
                    Method method, double target_exponent, double tolerance) {
    std::map<long, std::pair<double, long>> acc;  // n -> (sum, count)
    for (const RepRow& r : table.rows) {
        if (r.failed || r.method != method) continue;
        double v = 0.0;
        if (error_column == "rmse")
            v = r.rmse;
        else if (error_column == "weak_error")
            v = r.weak_error;
        else if (error_column == "rkhs_error")
            v = r.rkhs_error;
        else
            throw std::invalid_argument("fit_rate: unknown error column: " +
                                        error_column);
        auto& cell = acc[r.n];
        cell.first += v;
        cell.second += 1;
    }
    std::vector<double> xs, ys;
    for (const auto& [n, cell] : acc) {
        if (cell.second == 0) continue;
        if (x_axis == "n")
            xs.push_back(static_cast<double>(n));
        else if (x_axis == "delta_n")
            xs.push_back(delta_n(n));
        else
            throw std::invalid_argument("fit_rate: unknown x axis: " + x_axis);
        ys.push_back(cell.first / cell.second);
    }
    return fit_loglog(xs, ys, target_exponent, tolerance);
}

BiasSweep bias_sweep(const SourceProblem& problem,
                     const std::vector<double>& lambdas, double tolerance) {
    if (lambdas.size() < 3)
        throw std::invalid_argument("bias_sweep: need >= 3 lambdas");
    BiasSweep sweep;
    sweep.lambdas = lambdas;
    for (double lam : lambdas) {
        Eigen::VectorXd h_lam = tikhonov_path_point(problem, lam);
        ExactErrors err = exact_errors(problem, h_lam);
        sweep.rkhs_error2.push_back(err.rkhs_error * err.rkhs_error);
        sweep.weak_error2.push_back(err.weak_error * err.weak_error);
    }
    double beta = problem.beta;
    sweep.rkhs_fit = fit_loglog(lambdas, sweep.rkhs_error2,
                                std::min(beta, 2.0), tolerance);
    sweep.weak_fit = fit_loglog(lambdas, sweep.weak_error2,
                                std::min(beta + 1.0, 2.0), tolerance);
    return sweep;
}

EnvelopeShapes theory_envelope(double delta, double lambda_h, double lambda_g,
                               double beta, double b, long n) {
    if (delta <= 0.0 || lambda_h <= 0.0 || beta <= 0.0 || b <= 0.0 || n < 1)
        throw std::invalid_argument("theory_envelope: inputs must be positive");
    EnvelopeShapes env;
    env.rmse_bound_shape = delta * delta / lambda_h + lambda_g / lambda_h +
                           std::pow(lambda_h, std::min(beta, 1.0));
    env.weak_bound_shape =
        delta * delta + lambda_g + std::pow(lambda_h, std::min(beta + 1.0, 2.0));
    double c1 = 1.0 / (8.0 * b * b * (1.0 + 17.0 * std::exp(1.0)));
    double bracket = 36.0;
    if (delta < 5.0 * b / 6.0)
        bracket += 18.0 * std::floor(std::log(b / delta) / std::log(6.0 / 5.0));
    env.kappa = 1.0 - bracket * std::exp(-c1 * n * delta * delta);
    return env;
}

namespace {

struct DmlSetup {
    double theta_true = 0.0;
    double mu0 = 1.0;
    MomentSpec mspec;
    std::function<Dataset(long, std::uint64_t)> draw;
    NuisanceFn oracle_h, oracle_g;
};

NuisanceFn state_lookup(std::shared_ptr<DualScenario> dual,
                        const Eigen::MatrixXd& pts, const Eigen::VectorXd& vals,
                        const MomentSpec& mspec) {
    return [dual, &pts, &vals, mspec](const Eigen::VectorXd& p, double x) {
        long best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (long i = 0; i < pts.rows(); ++i) {
            double d = (pts.row(i).transpose() - p).squaredNorm();
            if (d < best_d) { best_d = d; best = i; }
        }
        return mspec.i0(x) * vals(best);
    };
}

DmlSetup make_dml_setup(const ExperimentConfig& cfg) {
    DmlSetup setup;
    if (cfg.scenario == "workbench") {
        DiscreteDGP dgp = cfg.build_dgp();
        auto dual = std::make_shared<DualScenario>(make_dual_scenario(
            dgp, cfg.kernel_h, cfg.kernel_g, cfg.beta, cfg.variant,
            cfg.dgp_seed + 1, true, cfg.profile));
        dual->dgp.aux_noise_halfwidth = cfg.aux_noise;
        setup.theta_true = dual->theta;
        setup.mu0 = dual->dgp.mu0();
        setup.mspec = make_workbench_mspec(dual->dgp);
        setup.draw = [dual](long n, std::uint64_t seed) {
            return to_dataset(dual->dgp, sample(dual->dgp, n, seed));
        };
        setup.oracle_h = state_lookup(dual, dual->dgp.w_points,
                                      dual->h_prob.h0_dag, setup.mspec);
        setup.oracle_g = state_lookup(dual, dual->dgp.z_points,
                                      dual->g_prob.h0_dag, setup.mspec);
    } else if (cfg.scenario == "proximal") {
        auto params = std::make_shared<ProximalParams>();
        setup.theta_true =
            oracle_theta(*params, OracleMethod::closed_form).value;
        setup.mu0 = 1.0;  // ATE weight has no structural zeros
        setup.mspec = gen_proximal(*params, 2, 0).mspec;
        setup.draw = [params](long n, std::uint64_t seed) {
            return gen_proximal(*params, n, seed).data;
        };
        setup.oracle_h = proximal_h0(*params);
        setup.oracle_g = proximal_g0(*params);
    } else {
        throw std::invalid_argument("run_dml_study: unsupported scenario: " +
                                    cfg.scenario);
    }
    return setup;
}

}  // namespace

DmlStudy run_dml_study(const ExperimentConfig& cfg, long n, int replications) {
    cfg.validate();
    DmlSetup setup = make_dml_setup(cfg);
    MomentSpec mspec_g = swap_roles(setup.mspec);

    auto make_fitter = [&](bool g_side) -> NuisanceFitter {
        return [&cfg, &setup, mspec_g, g_side](const Dataset& train) {
            double dn = critical_radius(g_side ? cfg.kernel_g : cfg.kernel_h,
                                        train.n(), setup.mu0);
            auto [lh, lg] = tune_lambdas(dn, cfg.beta, cfg.tuning);
            EstimatorConfig ec;
            ec.method = Method::KRAS;
            ec.lambda_h = lh;
            ec.lambda_g = lg;
            ec.c = cfg.tuning.c;
            ec.kernel_h = g_side ? cfg.kernel_g : cfg.kernel_h;
            ec.kernel_g = g_side ? cfg.kernel_h : cfg.kernel_g;
            if (g_side)
                return fit(swap_dataset(train), mspec_g, ec).as_function();
            return fit(train, setup.mspec, ec).as_function();
        };
    };
    NuisanceFitter fitter_h = make_fitter(false);
    NuisanceFitter fitter_g = make_fitter(true);
    if (cfg.oracle_nuisances) {
        fitter_h = [&setup](const Dataset&) { return setup.oracle_h; };
        fitter_g = [&setup](const Dataset&) { return setup.oracle_g; };
    }

    DmlStudy study;
    study.theta_true = setup.theta_true;
    study.rows.resize(replications);
    parallel_cells(replications, cfg.jobs, [&](long rep) {
        DmlStudyRow row;
        row.rep = static_cast<int>(rep);
        std::uint64_t seed = rep_seed(cfg.seed, 0, static_cast<int>(rep));
        try {
            Dataset ds = setup.draw(n, seed);
            DmlResult res = crossfit(ds, cfg.k_folds, fitter_h, fitter_g,
                                     setup.mspec, splitmix64(seed));
            row.theta_hat = res.theta_hat;
            row.se = res.se;
            row.ci_low = res.ci_low;
            row.ci_high = res.ci_high;
            row.remainder_proxy = res.remainder_proxy;
            row.covered = setup.theta_true >= res.ci_low &&
                          setup.theta_true <= res.ci_high;
        } catch (const std::exception& ex) {
            row.failed = true;
            row.note = "rep=" + std::to_string(rep) + ": " + ex.what();
        }
        study.rows[rep] = std::move(row);
    });

    long ok = 0, covered = 0;
    double sum = 0.0, sum2 = 0.0;
    for (const DmlStudyRow& r : study.rows) {
        if (r.failed) {
            ++study.failures;
            continue;
        }
        ++ok;
        covered += r.covered ? 1 : 0;
        sum += r.theta_hat;
        sum2 += r.theta_hat * r.theta_hat;
    }
    if (ok > 0) {
        study.coverage = static_cast<double>(covered) / ok;
        study.mean_theta = sum / ok;
        if (ok > 1)
            study.sd_theta =
                std::sqrt(std::max(0.0, (sum2 - sum * sum / ok) / (ok - 1)));
    }
    return study;
}

void write_csv(const DmlStudy& study, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << "rep,theta_hat,se,ci_low,ci_high,remainder_proxy,covered,failed,"
           "note\n";
    for (const DmlStudyRow& r : study.rows)
        out << r.rep << ',' << fmt_double(r.theta_hat) << ','
            << fmt_double(r.se) << ',' << fmt_double(r.ci_low) << ','
            << fmt_double(r.ci_high) << ',' << fmt_double(r.remainder_proxy)
            << ',' << (r.covered ? 1 : 0) << ',' << (r.failed ? 1 : 0) << ','
            << r.note << '\n';
}

}  // namespace kadv
