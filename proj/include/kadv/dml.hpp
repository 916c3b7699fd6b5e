#pragma once
// Cross-fitted debiased estimation of theta with variance, CIs, the
// critical-radius tuning rule, and the mixed-bias remainder diagnostic.

#include <cstdint>
#include <functional>
#include <vector>

#include "kadv/estimators.hpp"

namespace kadv {

using NuisanceFn = std::function<double(const Eigen::VectorXd&, double)>;

// phi(o;h,g) = m~(o;h) + m(o;g) - r(o) h(w) g(z).  h and g take (point,
// x-tag) and are expected to apply their own I0 mask.
double influence(const Dataset& ds, long i, const NuisanceFn& h,
                 const NuisanceFn& g, const MomentSpec& mspec);

struct DmlResult {
    double theta_hat = 0.0;
    double se = 0.0;
    double ci_low = 0.0, ci_high = 0.0;
    std::vector<double> fold_estimates;
    double remainder_proxy = std::numeric_limits<double>::quiet_NaN();
    long n = 0;
    int k_folds = 0;
};

// Fits both nuisances on each fold complement; the pair of fitters receives
// the training subset and returns evaluable functions.
using NuisanceFitter = std::function<NuisanceFn(const Dataset& train)>;

DmlResult crossfit(const Dataset& ds, int k_folds,
                   const NuisanceFitter& fitter_h,
                   const NuisanceFitter& fitter_g, const MomentSpec& mspec,
                   std::uint64_t seed);

struct TuningConstants {
    double c_h = 1.0;   // multiplier on lambda_h
    double c_g = 1.0;   // multiplier on lambda_g
    double c = 1.0;     // stabilization constant
    double b1 = 12.529964086141668;  // sqrt(157): makes the floor c^2 delta^2
};

// Tuning rule: lambda_h = min(1, C_H delta^{2/(1+min(beta,1))}),
// lambda_g = max(C_G delta^2, 157 c^2 delta^2 / B1^2).
std::pair<double, double> tune_lambdas(double delta_n, double beta,
                                       const TuningConstants& tc = {});

// min{ h_weak * g_rmse, g_weak * h_rmse } — the mixed-bias bound on R_n.
double remainder_diag(double h_weak, double h_rmse, double g_weak,
                      double g_rmse);

// Deterministic shuffled round-robin fold assignment.
std::vector<int> fold_assignment(long n, int k_folds, std::uint64_t seed);

Dataset subset_rows(const Dataset& ds, const std::vector<long>& rows);

}  // namespace kadv
