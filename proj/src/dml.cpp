#include "kadv/dml.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace kadv {

double influence(const Dataset& ds, long i, const NuisanceFn& h,
                 const NuisanceFn& g, const MomentSpec& mspec) {
    const double x = ds.x[i];
    const double mt = mspec.m_tilde(
        ds, i, [&](const Eigen::VectorXd& p) { return h(p, x); });
    const double mm =
        mspec.m(ds, i, [&](const Eigen::VectorXd& p) { return g(p, x); });
    const double hv = h(ds.w.row(i), x);
    const double gv = g(ds.z.row(i), x);
    return mt + mm - ds.r[i] * hv * gv;
}

std::vector<int> fold_assignment(long n, int k_folds, std::uint64_t seed) {
    std::vector<long> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0L);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> fold(static_cast<size_t>(n));
    for (long pos = 0; pos < n; ++pos)
        fold[static_cast<size_t>(order[static_cast<size_t>(pos)])] =
            static_cast<int>(pos % k_folds);
    return fold;
}

Dataset subset_rows(const Dataset& ds, const std::vector<long>& rows) {
    Dataset out;
    const long m = static_cast<long>(rows.size());
    out.w.resize(m, ds.w.cols());
    out.z.resize(m, ds.z.cols());
    out.x.resize(m);
    out.s.resize(m);
    out.r.resize(m);
    Eigen::VectorXd st(m);
    for (long k = 0; k < m; ++k) {
        const long i = rows[static_cast<size_t>(k)];
        out.w.row(k) = ds.w.row(i);
        out.z.row(k) = ds.z.row(i);
        out.x[k] = ds.x[i];
        out.s[k] = ds.s[i];
        out.r[k] = ds.r[i];
        st[k] = ds.s_tilde ? (*ds.s_tilde)[i] : 0.0;
    }
    out.s_tilde = st;
    return out;
}

DmlResult crossfit(const Dataset& ds, int k_folds,
                   const NuisanceFitter& fitter_h,
                   const NuisanceFitter& fitter_g, const MomentSpec& mspec,
                   std::uint64_t seed) {
    ds.validate();
    if (k_folds < 2) throw std::invalid_argument("crossfit: K < 2");
    const long n = ds.n();
    if (n < 2L * k_folds) throw std::invalid_argument("crossfit: n < 2K");
    const std::vector<int> fold = fold_assignment(n, k_folds, seed);

    Eigen::VectorXd phi(n);
    DmlResult res;
    res.n = n;
    res.k_folds = k_folds;
    for (int k = 0; k < k_folds; ++k) {
        std::vector<long> train, held;
        for (long i = 0; i < n; ++i)
            (fold[static_cast<size_t>(i)] == k ? held : train).push_back(i);
        const Dataset tr = subset_rows(ds, train);
        NuisanceFn h, g;
        try {
            h = fitter_h(tr);
            g = fitter_g(tr);
        } catch (const std::exception& e) {
            throw std::runtime_error("crossfit: fold " + std::to_string(k) +
                                     " fitting failed: " + e.what());
        }
        double acc = 0.0;
        for (long i : held) {
            phi[i] = influence(ds, i, h, g, mspec);
            acc += phi[i];
        }
        res.fold_estimates.push_back(acc / static_cast<double>(held.size()));
    }
    res.theta_hat = phi.mean();
    const double var =
        (phi.array() - res.theta_hat).square().sum() / static_cast<double>(n);
    res.se = std::sqrt(var / static_cast<double>(n));
    res.ci_low = res.theta_hat - 1.96 * res.se;
    res.ci_high = res.theta_hat + 1.96 * res.se;
    return res;
}

std::pair<double, double> tune_lambdas(double delta_n, double beta,
                                       const TuningConstants& tc) {
    if (delta_n <= 0.0 || delta_n >= 1.0)
        throw std::invalid_argument("tune_lambdas: delta_n out of (0,1)");
    if (beta <= 0.0) throw std::invalid_argument("tune_lambdas: beta <= 0");
    const double expo = 2.0 / (1.0 + std::min(beta, 1.0));
    const double lambda_h = std::min(1.0, tc.c_h * std::pow(delta_n, expo));
    const double floor =
        157.0 * tc.c * tc.c * delta_n * delta_n / (tc.b1 * tc.b1);
    const double lambda_g = std::max(tc.c_g * delta_n * delta_n, floor);
    return {lambda_h, lambda_g};
}

double remainder_diag(double h_weak, double h_rmse, double g_weak,
                      double g_rmse) {
    if (h_weak < 0 || h_rmse < 0 || g_weak < 0 || g_rmse < 0)
        throw std::invalid_argument("remainder_diag: negative input");
    return std::min(h_weak * g_rmse, g_weak * h_rmse);
}

}  // namespace kadv
