#pragma once
// Closed-form kernel adversarial estimators (KRAS, LRAS, KMMR), the
// norm-constrained solve, the inner maximization, and a nested minimax
// oracle used to validate the closed forms.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "kadv/kernels.hpp"
#include "kadv/workbench.hpp"

namespace kadv {

struct Dataset {
    Eigen::MatrixXd w, z;  // n x dw, n x dz (rows are observations)
    Eigen::VectorXd x;     // scalar X-tag per row
    Eigen::VectorXd s;     // auxiliary outcome feeding the m-moment
    Eigen::VectorXd r;     // r(o)
    std::optional<Eigen::VectorXd> s_tilde;  // aux outcome for m-tilde

    long n() const { return w.rows(); }
    void validate() const;
};

Dataset to_dataset(const DiscreteDGP& dgp, const WbDataset& ds);

// One term of a linear moment functional: weight * f(point).
struct MomentTerm {
    double weight;
    Eigen::VectorXd point;
};

// m(o;g) = sum_k w_k g(p_k) with p_k on the Z-space; m~(o;h) likewise on the
// W-space.  Every moment in the implemented examples is a finite weighted
// combination of point evaluations, which keeps the closed forms exact.
struct MomentSpec {
    std::function<std::vector<MomentTerm>(const Dataset&, long)> m_terms;
    std::function<std::vector<MomentTerm>(const Dataset&, long)> mt_terms;
    std::function<double(double)> x0_membership;  // null = no structural zeros
    double b2 = std::numeric_limits<double>::quiet_NaN();  // optional bounds
    double b3 = std::numeric_limits<double>::quiet_NaN();

    double i0(double x_value) const {
        return x0_membership ? x0_membership(x_value) : 1.0;
    }
    double m(const Dataset& ds, long i,
             const std::function<double(const Eigen::VectorXd&)>& g) const;
    double m_tilde(const Dataset& ds, long i,
                   const std::function<double(const Eigen::VectorXd&)>& h) const;
};

// Default workbench moments: m(o;g) = s*g(z), m~(o;h) = s~*h(w), mask from
// the dgp's X0 set.
MomentSpec make_workbench_mspec(const DiscreteDGP& dgp);

// Swap the roles of W and Z so the adjoint equation T*g = rho~ is fit by the
// same code path: w<->z, s<->s_tilde, m<->m_tilde.
Dataset swap_dataset(const Dataset& ds);
MomentSpec swap_roles(const MomentSpec& mspec);

enum class Method { KRAS, LRAS, KMMR };

struct EstimatorConfig {
    Method method = Method::KRAS;
    double lambda_h = 0.1;
    double lambda_g = 0.1;
    double c = 1.0;  // stabilization constant
    std::optional<double> norm_bound_B;
    KernelSpec kernel_h, kernel_g;
    // ridge added to near-singular solves, as a multiple of trace-scale.
    // Negative = method default (0 for KRAS/KMMR, 1e-10 for LRAS).
    double ridge_floor = -1.0;

    double effective_ridge() const;
    void validate() const;
};

// Collapsed empirical design: duplicate support/evaluation points are merged
// (weighted), which leaves every objective value identical but makes
// finite-state fits run at state-space cost.
struct Design {
    Eigen::MatrixXd wpts, zpts, tpts;  // unique points (rows)
    Eigen::MatrixXd kh, kg, kzt;       // Gram K_H, K_G, cross K_G(z, t)
    Eigen::MatrixXd c_mat;             // Q x P, cell sums of I0*r
    Eigen::VectorXd du;                // Q, cell sums of I0
    Eigen::VectorXd cnt_w, cnt_z;      // multiplicities
    Eigen::VectorXd omega;             // U, summed m-term weights (I0-masked)
    double qtt = 0.0;                  // omega' K_TT omega
    long n = 0;
    std::vector<int> row_w, row_z;     // row -> unique-point index
    std::function<double(double)> i0;
};

std::shared_ptr<const Design> build_design(const Dataset& ds,
                                           const MomentSpec& mspec,
                                           const EstimatorConfig& config);

struct FitReport {
    double ridge_used = 0.0;
    double cond_inner = std::numeric_limits<double>::quiet_NaN();
    double cond_outer = std::numeric_limits<double>::quiet_NaN();
    double objective = std::numeric_limits<double>::quiet_NaN();
    double constraint_multiplier = 0.0;
    long collapsed_w = 0, collapsed_z = 0;
};

struct FittedNuisance {
    RepresenterFunction f;  // support = design wpts, mask = I0
    EstimatorConfig config;
    std::shared_ptr<const Design> design;
    FitReport report;

    double norm_h() const;  // RKHS norm via the cached Gram
    double predict(const Eigen::VectorXd& point, double x_value) const {
        return f.evaluate(point, x_value);
    }
    std::function<double(const Eigen::VectorXd&, double)> as_function() const;
};

FittedNuisance fit_kras(const Dataset& ds, const MomentSpec& mspec,
                        const EstimatorConfig& config);
FittedNuisance fit_lras(const Dataset& ds, const MomentSpec& mspec,
                        const EstimatorConfig& config);
FittedNuisance fit_kmmr(const Dataset& ds, const MomentSpec& mspec,
                        const EstimatorConfig& config);
FittedNuisance fit(const Dataset& ds, const MomentSpec& mspec,
                   const EstimatorConfig& config);  // dispatch on method

// Direct evaluation of the outer objective F(gamma) (inner problem solved
// exactly inside); shared by the closed-form tests and the nested oracle.
class ObjectiveEval {
  public:
    ObjectiveEval(std::shared_ptr<const Design> design, EstimatorConfig config,
                  double extra_mu = 0.0);
    double operator()(const Eigen::VectorXd& gamma) const;
    Eigen::VectorXd inner_maximizer(const Eigen::VectorXd& gamma) const;
    double inner_objective(const Eigen::VectorXd& gamma,
                           const Eigen::VectorXd& alpha) const;

    std::shared_ptr<const Design> design;
    EstimatorConfig config;
    double extra_mu;
    // Assembled pieces (KRAS/LRAS: inner quadratic Q, linear map A, constant
    // beta0, outer penalty P_H; KMMR reuses A-like blocks).
    Eigen::MatrixXd q_mat, a_mat, p_h;
    Eigen::VectorXd beta0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> q_eig;
    double ridge_used = 0.0;
    double cond_inner = std::numeric_limits<double>::quiet_NaN();
};

// Empirical inner maximizer for the adversarial (KRAS-style) problem at a
// fitted h, and the attained value scaled by 4c^2 so that in population mode
// it is the population adversarial value M_P(h).
std::pair<RepresenterFunction, double> inner_max(const FittedNuisance& h,
                                                 const Dataset& ds,
                                                 const MomentSpec& mspec,
                                                 const EstimatorConfig& config);

// Exact-expectation counterpart on the workbench: value ||I0 T(h0-h)||_2^2,
// maximizer (2c^2)^{-1} I0 T(h0-h).
std::pair<Eigen::VectorXd, double> inner_max_population(
    const SourceProblem& problem, const Eigen::VectorXd& h, double c);

// If ||unconstrained||_H <= B returns it unchanged (bitwise); otherwise
// bisects a multiplier mu added to the RKHS penalty until the norm lies in
// [B(1-1e-6), B].
FittedNuisance constrain_norm(const FittedNuisance& unconstrained, double B);

struct OracleSettings {
    long max_iters = 200000;
    double tol = 1e-13;
};

// Ground-truth minimax by conjugate-gradient descent on the coefficient
// space with central-difference gradients of the direct objective (exact for
// these quadratics up to roundoff).
FittedNuisance nested_oracle(const Dataset& ds, const MomentSpec& mspec,
                             const EstimatorConfig& config,
                             const OracleSettings& settings = {});

}  // namespace kadv
