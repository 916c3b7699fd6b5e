#pragma once
// Continuous-data generators for the three motivating scenarios, with
// closed-form / Monte-Carlo oracles for theta and the oracle nuisances of
// the linear designs.

#include <cstdint>
#include <utility>

#include "kadv/dml.hpp"
#include "kadv/estimators.hpp"

namespace kadv {

struct GenOutput {
    Dataset data;
    MomentSpec mspec;
};

enum class OracleMethod { closed_form, full_data_mc };

struct OracleTheta {
    double value = 0.0;
    double mc_se = 0.0;  // 0 for closed forms
};

// ---------------------------------------------------------------------------
// Proximal design (negative controls).  Structural equations, with e denoting
// independent standard normals truncated at +-4 sd (symmetric, so conditional
// means stay exactly linear):
//   L ~ Uniform(-1,1)
//   U ~ Bernoulli(expit(u0 + ul L))
//   Z' = bu U + bl L + sz e      (negative control treatment)
//   W' = cu U + cl L + sw e      (negative control outcome)
//   A ~ Bernoulli(expit(a0 + au U + al L))
//   Y = ta A + tu U + tl L + sy e
// W = (A, L, W'), Z = (A, L, Z'), X-tag = a, r = 1.
// The linear outcome bridge h0(a,l,w') = ta a + (tl - d2 cl) l + d2 w' with
// d2 = tu/cu is exact, as is the per-(a,l) linear treatment bridge.
struct ProximalParams {
    double u0 = 0.0, ul = 0.8;
    double bu = 1.0, bl = 0.3, sz = 0.5;
    double cu = 1.0, cl = 0.2, sw = 0.5;
    double a0 = 0.0, au = 0.7, al = 0.4;
    double ta = 1.0, tu = 0.8, tl = 0.5, sy = 0.3;
    enum class Weight { ate, treated } weight = Weight::ate;  // 2a-1 vs a
    double propensity_floor = 0.02;

    void validate() const;
};

GenOutput gen_proximal(const ProximalParams& params, long n,
                       std::uint64_t seed);
OracleTheta oracle_theta(const ProximalParams& params, OracleMethod method,
                         long n_mc = 1000000, std::uint64_t seed = 7);
NuisanceFn proximal_h0(const ProximalParams& params);
NuisanceFn proximal_g0(const ProximalParams& params);

// ---------------------------------------------------------------------------
// Policy shift on a continuous treatment supported on [c,d]:
//   q(a) = (a+delta) 1{a in [c, d-delta-eps)}
//        + {a + delta (d-a)/(delta+eps)} 1{a in [d-delta-eps, d]}
// Same proxy SEM as above with A a truncated normal on [c,d]; X0 is
// {a in [c+delta, d]} (the structural-zero region of rho~ is its complement).
struct PolicyShiftParams {
    double c = 0.0, d = 2.0;
    double delta = 0.3, eps = 0.2;
    double u0 = 0.0, ul = 0.8;
    double bu = 1.0, bl = 0.3, sz = 0.5;
    double cu = 1.0, cl = 0.2, sw = 0.5;
    double am = 1.0, au = 0.5, al = 0.3, sa = 0.6;  // A trunc-normal params
    double ta = 1.0, tu = 0.8, tl = 0.5, sy = 0.3;

    void validate() const;  // requires d - delta - eps > c
};

double policy_q(const PolicyShiftParams& params, double a);
GenOutput gen_policy_shift(const PolicyShiftParams& params, long n,
                           std::uint64_t seed);
OracleTheta oracle_theta(const PolicyShiftParams& params, OracleMethod method,
                         long n_mc = 1000000, std::uint64_t seed = 7);
NuisanceFn policy_h0(const PolicyShiftParams& params);

struct MBoundReport {
    double b2_hat = 0.0;  // max observed ratio ||m~(.;h)||_2 / ||I0 h||_2
    double b2_ref = 0.0;  // sqrt of the grid-estimated density-ratio bound
    bool pass = false;
};

// Assumption-7-style check for the policy-shift composition: ratios over
// random unit-norm RKHS draws, against the change-of-variables bound.
MBoundReport verify_m_bound(const PolicyShiftParams& params, long sample_size,
                            int draws = 100, std::uint64_t seed = 11);

// ---------------------------------------------------------------------------
// Missing-not-at-random with a shadow variable:
//   X ~ Uniform(0,1); Z' = zx X + sz e; Y = y0 + yx X + yz Z' + sy e;
//   Delta ~ Bernoulli(expit(d0 + dx X + dy Y))
// Observed O = (Delta, Delta*Y, X, Z'); W = (X, Delta*Y), Z = (X, Z'),
// r = Delta; target theta = E[(1-Delta) pi(X,Y)] with pi(x,y) = y.
struct MnarParams {
    double zx = 1.0, sz = 0.5;
    double y0 = 0.5, yx = 1.0, yz = 0.8, sy = 0.3;
    double d0 = 1.0, dx = 0.5, dy = -0.6;
    double prob_floor = 0.02;
    bool force_always_observed = false;  // test hook: Delta == 1

    void validate() const;
};

GenOutput gen_mnar_shadow(const MnarParams& params, long n,
                          std::uint64_t seed);
OracleTheta oracle_theta(const MnarParams& params, OracleMethod method,
                         long n_mc = 1000000, std::uint64_t seed = 7);

}  // namespace kadv
