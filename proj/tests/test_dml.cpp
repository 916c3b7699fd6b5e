#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "kadv/dml.hpp"
#include "kadv/workbench.hpp"

using namespace kadv;

TEST_CASE("tuning rule reproduces the stated formulas") {
    TuningConstants tc;  // c_h = c_g = c = 1, b1 = sqrt(157)
    double d = 0.1;
    auto [lh, lg] = tune_lambdas(d, 1.0, tc);
    CHECK(lh == doctest::Approx(std::pow(d, 1.0)).epsilon(1e-12));
    // floor: 157 c^2 d^2 / b1^2 = d^2 with the default b1
    CHECK(lg == doctest::Approx(d * d).epsilon(1e-12));

    auto [lh2, lg2] = tune_lambdas(d, 0.5, tc);
    CHECK(lh2 == doctest::Approx(std::pow(d, 2.0 / 1.5)).epsilon(1e-12));

    // beta saturates at 1 in the exponent
    auto [lh3, lg3] = tune_lambdas(d, 3.0, tc);
    CHECK(lh3 == lh);
    CHECK(lg3 == lg);

    // lambda_h capped at 1
    TuningConstants big;
    big.c_h = 100.0;
    CHECK(tune_lambdas(0.5, 1.0, big).first == 1.0);

    // c_g scales the first branch of the max
    TuningConstants cg;
    cg.c_g = 10.0;
    CHECK(tune_lambdas(d, 1.0, cg).second ==
          doctest::Approx(10.0 * d * d).epsilon(1e-12));
}

TEST_CASE("remainder diagnostic is the min of the two products") {
    CHECK(remainder_diag(0.1, 0.5, 0.2, 0.3) ==
          doctest::Approx(std::min(0.1 * 0.3, 0.2 * 0.5)).epsilon(1e-14));
    CHECK(remainder_diag(0.0, 1.0, 1.0, 1.0) == 0.0);
}

TEST_CASE("fold assignment is a balanced deterministic partition") {
    std::vector<int> f1 = fold_assignment(103, 5, 17);
    std::vector<int> f2 = fold_assignment(103, 5, 17);
    CHECK(f1 == f2);
    CHECK(fold_assignment(103, 5, 18) != f1);
    std::vector<long> counts(5, 0);
    for (int f : f1) {
        REQUIRE(f >= 0);
        REQUIRE(f < 5);
        ++counts[f];
    }
    CHECK(*std::max_element(counts.begin(), counts.end()) -
              *std::min_element(counts.begin(), counts.end()) <=
          1);
}

TEST_CASE("subset rows preserves row content") {
    DiscreteDGP dgp = random_dgp(5, 5, 2, true, 11);
    Dataset ds = to_dataset(dgp, sample(dgp, 30, 12));
    Dataset sub = subset_rows(ds, {3, 7, 20});
    REQUIRE(sub.n() == 3);
    CHECK((sub.w.row(1) - ds.w.row(7)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(sub.s(2) == ds.s(20));
    CHECK(sub.r(0) == ds.r(3));
    REQUIRE(sub.s_tilde.has_value());
    CHECK((*sub.s_tilde)(1) == (*ds.s_tilde)(7));
}

TEST_CASE("influence is the debiased moment combination") {
    DiscreteDGP dgp = random_dgp(5, 5, 2, true, 21);
    KernelSpec ks;
    DualScenario dual =
        make_dual_scenario(dgp, ks, ks, 1.0, SourceVariant::transformed, 22);
    Dataset ds = to_dataset(dual.dgp, sample(dual.dgp, 10, 23));
    MomentSpec mspec = make_workbench_mspec(dual.dgp);
    NuisanceFn h = [](const Eigen::VectorXd& p, double) { return p(0); };
    NuisanceFn g = [](const Eigen::VectorXd& p, double) { return 1.0 + p(0); };
    for (long i = 0; i < ds.n(); ++i) {
        double mt = mspec.m_tilde(ds, i, [&](const Eigen::VectorXd& p) {
            return h(p, ds.x(i));
        });
        double m = mspec.m(ds, i, [&](const Eigen::VectorXd& p) {
            return g(p, ds.x(i));
        });
        double expect = mt + m - ds.r(i) * h(ds.w.row(i), ds.x(i)) *
                                     g(ds.z.row(i), ds.x(i));
        CHECK(influence(ds, i, h, g, mspec) ==
              doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("crossfit with oracle nuisances is unbiased and deterministic") {
    DiscreteDGP base = circulant_dgp(8, 0.5);
    KernelSpec ks;
    ks.bandwidth = 0.25;
    DualScenario dual =
        make_dual_scenario(base, ks, ks, 1.0, SourceVariant::transformed, 31);
    MomentSpec mspec = make_workbench_mspec(dual.dgp);

    // exact state-lookup nuisances
    auto lookup = [](const Eigen::MatrixXd& pts, Eigen::VectorXd vals) {
        return [pts, vals](const Eigen::VectorXd& p, double) {
            long best = 0;
            double bd = 1e300;
            for (long i = 0; i < pts.rows(); ++i) {
                double d = (pts.row(i).transpose() - p).squaredNorm();
                if (d < bd) {
                    bd = d;
                    best = i;
                }
            }
            return vals(best);
        };
    };
    NuisanceFn h0 = lookup(dual.dgp.w_points, dual.h0());
    NuisanceFn g0 = lookup(dual.dgp.z_points, dual.g0());
    NuisanceFitter fh = [&](const Dataset&) { return h0; };
    NuisanceFitter fg = [&](const Dataset&) { return g0; };

    Dataset ds = to_dataset(dual.dgp, sample(dual.dgp, 800, 32));
    DmlResult r1 = crossfit(ds, 5, fh, fg, mspec, 33);
    DmlResult r2 = crossfit(ds, 5, fh, fg, mspec, 33);
    CHECK(r1.theta_hat == r2.theta_hat);
    CHECK(r1.se == r2.se);
    REQUIRE(r1.fold_estimates.size() == 5);
    CHECK(r1.n == 800);

    // symmetric ~95% normal interval around theta_hat
    CHECK(r1.ci_high - r1.theta_hat ==
          doctest::Approx(r1.theta_hat - r1.ci_low).epsilon(1e-12));
    double z = (r1.ci_high - r1.ci_low) / (2.0 * r1.se);
    CHECK(z == doctest::Approx(1.96).epsilon(1e-3));
    CHECK(std::abs(r1.theta_hat - dual.theta) <= 4.0 * r1.se);
}
