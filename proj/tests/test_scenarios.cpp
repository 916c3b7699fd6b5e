#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "kadv/dml.hpp"
#include "kadv/scenarios.hpp"

using namespace kadv;

namespace {

bool same_dataset(const Dataset& a, const Dataset& b) {
    return a.n() == b.n() && (a.w - b.w).cwiseAbs().maxCoeff() == 0.0 &&
           (a.z - b.z).cwiseAbs().maxCoeff() == 0.0 &&
           (a.s - b.s).cwiseAbs().maxCoeff() == 0.0 &&
           (a.r - b.r).cwiseAbs().maxCoeff() == 0.0;
}

}  // namespace

TEST_CASE("proximal generator shape and determinism") {
    ProximalParams params;
    params.validate();
    GenOutput a = gen_proximal(params, 300, 5);
    GenOutput b = gen_proximal(params, 300, 5);
    GenOutput c = gen_proximal(params, 300, 6);
    a.data.validate();
    CHECK(same_dataset(a.data, b.data));
    CHECK(!same_dataset(a.data, c.data));
    CHECK(a.data.w.cols() == 3);  // (A, L, W')
    CHECK(a.data.z.cols() == 3);  // (A, L, Z')
    CHECK((a.data.r.array() == 1.0).all());
    // X-tag is the treatment arm
    for (long i = 0; i < a.data.n(); ++i) {
        CHECK((a.data.x(i) == 0.0 || a.data.x(i) == 1.0));
        CHECK(a.data.w(i, 0) == a.data.x(i));
    }
}

TEST_CASE("proximal oracle: closed form vs monte carlo") {
    ProximalParams params;
    OracleTheta cf = oracle_theta(params, OracleMethod::closed_form);
    CHECK(cf.mc_se == 0.0);
    OracleTheta mc = oracle_theta(params, OracleMethod::full_data_mc, 400000, 9);
    CHECK(mc.mc_se > 0.0);
    CHECK(std::abs(cf.value - mc.value) <= 4.0 * mc.mc_se);
    // ATE weight with ta = 1: direct effect contribution equals ta
    CHECK(cf.value == doctest::Approx(params.ta).epsilon(1e-12));
}

TEST_CASE("proximal bridges satisfy their moment conditions") {
    ProximalParams params;
    NuisanceFn h0 = proximal_h0(params);
    NuisanceFn g0 = proximal_g0(params);
    GenOutput gen = gen_proximal(params, 200000, 13);
    const Dataset& ds = gen.data;
    // E[phi] with both oracle bridges recovers theta
    double acc = 0.0;
    for (long i = 0; i < ds.n(); ++i) acc += influence(ds, i, h0, g0, gen.mspec);
    acc /= static_cast<double>(ds.n());
    OracleTheta cf = oracle_theta(params, OracleMethod::closed_form);
    CHECK(std::abs(acc - cf.value) < 0.02);
    // outcome bridge is the stated linear form
    Eigen::VectorXd w(3);
    w << 1.0, 0.3, -0.4;
    double d2 = params.tu / params.cu;
    double expect = params.ta * 1.0 + (params.tl - d2 * params.cl) * 0.3 +
                    d2 * -0.4;
    CHECK(h0(w, 1.0) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("policy q matches the piecewise definition") {
    PolicyShiftParams params;
    params.validate();
    double interior = 0.5;  // in [c, d - delta - eps)
    CHECK(policy_q(params, interior) ==
          doctest::Approx(interior + params.delta).epsilon(1e-14));
    double edge = params.d;  // boundary maps to itself
    CHECK(policy_q(params, edge) == doctest::Approx(params.d).epsilon(1e-12));
    double blend = params.d - 0.1;  // inside the taper region
    double expect = blend + params.delta * (params.d - blend) /
                                (params.delta + params.eps);
    CHECK(policy_q(params, blend) == doctest::Approx(expect).epsilon(1e-12));
    // q never exceeds the support
    for (double a = params.c; a <= params.d; a += 0.01)
        CHECK(policy_q(params, a) <= params.d + 1e-12);
}

TEST_CASE("policy shift structural zeros and m bound") {
    PolicyShiftParams params;
    GenOutput gen = gen_policy_shift(params, 500, 21);
    gen.data.validate();
    // representer mask: X0 = [c + delta, d]
    CHECK(gen.mspec.i0(params.c + params.delta / 2) == 0.0);
    CHECK(gen.mspec.i0(params.c + params.delta + 0.01) == 1.0);
    MBoundReport rep = verify_m_bound(params, 4000, 50, 11);
    CHECK(rep.pass);
    CHECK(rep.b2_hat > 0.0);
    CHECK(std::isfinite(rep.b2_ref));
}

TEST_CASE("policy shift oracle consistency") {
    PolicyShiftParams params;
    OracleTheta cf = oracle_theta(params, OracleMethod::closed_form);
    OracleTheta mc =
        oracle_theta(params, OracleMethod::full_data_mc, 400000, 15);
    CHECK(std::abs(cf.value - mc.value) <= 4.0 * std::max(mc.mc_se, 1e-6));
}

TEST_CASE("mnar generator and oracle") {
    MnarParams params;
    params.validate();
    GenOutput gen = gen_mnar_shadow(params, 2000, 31);
    gen.data.validate();
    // r is the observation indicator; missing outcomes are zeroed
    for (long i = 0; i < gen.data.n(); ++i) {
        CHECK((gen.data.r(i) == 0.0 || gen.data.r(i) == 1.0));
        if (gen.data.r(i) == 0.0) CHECK(gen.data.w(i, 1) == 0.0);
    }
    // no closed form for this design; the MC oracle is stable across seeds
    CHECK_THROWS(oracle_theta(params, OracleMethod::closed_form));
    OracleTheta mc1 =
        oracle_theta(params, OracleMethod::full_data_mc, 400000, 17);
    OracleTheta mc2 =
        oracle_theta(params, OracleMethod::full_data_mc, 400000, 18);
    CHECK(mc1.mc_se > 0.0);
    CHECK(std::abs(mc1.value - mc2.value) <= 4.0 * (mc1.mc_se + mc2.mc_se));

    // test hook: everyone observed makes the missing-part target vanish
    MnarParams all = params;
    all.force_always_observed = true;
    OracleTheta zero =
        oracle_theta(all, OracleMethod::full_data_mc, 100000, 19);
    CHECK(std::abs(zero.value) <= 4.0 * std::max(zero.mc_se, 1e-12));
}
