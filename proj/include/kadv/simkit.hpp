#pragma once
// Experiment runner: Monte-Carlo rate studies, population bias sweeps,
// cross-fitting studies, rate fitting, and theory envelopes.

#include <cstdint>
#include <string>
#include <vector>

#include "kadv/config.hpp"
#include "kadv/dml.hpp"
#include "kadv/estimators.hpp"
#include "kadv/workbench.hpp"

namespace kadv {

double delta_n(long n);  // sqrt(log n / n)

std::string method_name(Method method);
Method method_from_string(const std::string& name);

// Per-cell seed: mixes the base seed with (n-index, rep-index) so any row can
// be re-run in isolation; pure function of its inputs.
std::uint64_t rep_seed(std::uint64_t seed, int n_index, int rep_index);

struct ExperimentConfig {
    std::string scenario = "workbench";  // workbench|proximal|policy_shift|mnar
    std::vector<long> n_grid;
    int replications = 1;
    std::vector<Method> methods{Method::KRAS};
    double beta = 1.0;
    SourceVariant variant = SourceVariant::transformed;
    KernelSpec kernel_h, kernel_g;
    TuningConstants tuning;
    std::uint64_t seed = 1;
    int jobs = 1;
    int k_folds = 5;
    double rate_tolerance = 0.15;
    // workbench dgp shape: "random" tag-consistent dgp or the 1-d "chain"
    std::string dgp_kind = "random";
    int n_w = 8, n_z = 8, x_states = 2;
    bool mask = true;
    double chain_tau = 0.15;
    double geo_decades = 11.0;
    double circ_rho = 0.55;
    double aux_noise = 0.5;
    bool oracle_nuisances = false;
    SeedProfile profile = SeedProfile::state_normal;
    std::uint64_t dgp_seed = 101;

    DiscreteDGP build_dgp() const;

    void validate() const;
    static ExperimentConfig from_config(const Config& cfg);
};

struct RepRow {
    long n = 0;
    int rep = 0;
    Method method = Method::KRAS;
    std::uint64_t seed = 0;
    double lambda_h = 0.0, lambda_g = 0.0;
    double rmse = 0.0, weak_error = 0.0, rkhs_error = 0.0;
    bool failed = false;
    std::string note;
};

struct ReplicationTable {
    std::vector<RepRow> rows;  // deterministic order: (n, rep, method)
    long failures = 0;
};

// Workbench Monte-Carlo study: per (n, rep, method) sample, tune lambdas via
// the critical radius, fit, record exact h-side errors.  Deterministic for a
// fixed config regardless of jobs.
ReplicationTable run_experiment(const ExperimentConfig& cfg);

void write_csv(const ReplicationTable& table, const std::string& path);
// tidy long format: one (cell, metric, value) row per error column
void write_plotdata(const ReplicationTable& table, const std::string& path);

struct RateReport {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double target_exponent = 0.0;
    bool pass = false;
    std::vector<double> x;            // per-n regressor (n or delta_n)
    std::vector<double> mean_errors;  // per-n mean of the error column
};

// log-log OLS of ys on xs against a target exponent
RateReport fit_loglog(const std::vector<double>& xs,
                      const std::vector<double>& ys, double target_exponent,
                      double tolerance);

// error_column in {rmse, weak_error, rkhs_error}; x_axis in {n, delta_n};
// averages the column over non-failed reps per n for one method.
RateReport fit_rate(const ReplicationTable& table,
                    const std::string& error_column, const std::string& x_axis,
                    Method method, double target_exponent, double tolerance);

// Population regularization-bias sweep along the Tikhonov path.
struct BiasSweep {
    std::vector<double> lambdas;
    std::vector<double> rkhs_error2;  // ||h_lambda - h0||_H^2
    std::vector<double> weak_error2;  // ||I0 T(h_lambda - h0)||_2^2
    RateReport rkhs_fit;              // slope vs lambda, target min{beta,2}
    RateReport weak_fit;              // target min{beta+1,2}
};
BiasSweep bias_sweep(const SourceProblem& problem,
                     const std::vector<double>& lambdas, double tolerance);

struct EnvelopeShapes {
    double rmse_bound_shape = 0.0;  // delta^2/l_h + l_g/l_h + l_h^{min(b,1)}
    double weak_bound_shape = 0.0;  // delta^2 + l_g + l_h^{min(b+1,2)}
    double kappa = 0.0;             // may be negative (vacuous), reported as-is
};
EnvelopeShapes theory_envelope(double delta, double lambda_h, double lambda_g,
                               double beta, double b, long n);

// Cross-fitting coverage study on the workbench dual scenario or a
// continuous scenario ("proximal"); KRAS nuisances on both sides.
struct DmlStudyRow {
    int rep = 0;
    double theta_hat = 0.0, se = 0.0, ci_low = 0.0, ci_high = 0.0;
    double remainder_proxy = 0.0;
    bool covered = false;
    bool failed = false;
    std::string note;
};
struct DmlStudy {
    double theta_true = 0.0;
    std::vector<DmlStudyRow> rows;
    double coverage = 0.0;   // over non-failed reps
    double mean_theta = 0.0;
    double sd_theta = 0.0;
    long failures = 0;
};
DmlStudy run_dml_study(const ExperimentConfig& cfg, long n, int replications);

void write_csv(const DmlStudy& study, const std::string& path);

}  // namespace kadv
