#pragma once
// Finite-state workbench: every operator (T, T*, T_H, T_H^{1/2}, T-tilde) is
// an explicit matrix under marginal-pmf-weighted inner products, so
// solutions, source conditions, and errors are computable exactly.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kadv/kernels.hpp"

namespace kadv {

// Finite-state data-generating process.  W-states and Z-states are points in
// R^d, each carrying a scalar X-tag (the shared coarsening X); the joint pmf
// lives on W x Z cells, and tag-consistency (positive mass only where the two
// tags agree) encodes that X is a common component of W and Z.
struct DiscreteDGP {
    Eigen::MatrixXd w_points;  // P x dw
    Eigen::MatrixXd z_points;  // Q x dz
    Eigen::VectorXd w_tag;     // P, X-component of each W-state
    Eigen::VectorXd z_tag;     // Q
    Eigen::MatrixXd joint_pmf;  // P x Q, entries >= 0, sums to 1
    Eigen::MatrixXd r_table;    // P x Q
    std::vector<double> x0_values;  // the set X0; empty = no structural zeros
    // Optional auxiliary-outcome means: E[s|w,z] drives the m-moment,
    // E[s_tilde|w,z] the m-tilde moment (adjoint direction).
    std::optional<Eigen::MatrixXd> aux_mean;
    std::optional<Eigen::MatrixXd> aux_mean_tilde;
    double aux_noise_halfwidth = 0.5;  // additive Uniform[-a,a] noise on s

    void validate() const;  // throws on violated invariants

    Eigen::VectorXd p_w() const;  // W marginal
    Eigen::VectorXd p_z() const;  // Z marginal
    bool in_x0(double tag) const;
    Eigen::VectorXd i0_w() const;  // indicator per W-state
    Eigen::VectorXd i0_z() const;
    double mu0() const;  // P(X in X0)
};

// Linear map between weighted L2 spaces; inner products carry the marginal
// pmf weights: <f,g> = sum f_i g_i w_i.
struct OperatorMatrix {
    Eigen::MatrixXd entries;         // range-dim x domain-dim
    Eigen::VectorXd domain_weights;  // pmf of the domain space
    Eigen::VectorXd range_weights;   // pmf of the range space

    Eigen::VectorXd apply(const Eigen::VectorXd& v) const { return entries * v; }
    void validate() const;
};

double weighted_inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                      const Eigen::VectorXd& w);
double weighted_norm(const Eigen::VectorXd& a, const Eigen::VectorXd& w);

enum class OpDirection { forward, adjoint };

// forward: (Th)(z) = E[r h(W) | Z=z], entries T[z,w] = r(w,z) P(w|z);
// adjoint: (T*g)(w) = E[r g(Z) | W=w], entries T*[w,z] = r(w,z) P(z|w).
OperatorMatrix cond_exp_operator(const DiscreteDGP& dgp, OpDirection direction);

enum class Side { W, Z };

// (T_H h)(w) = sum_v K(w,v) h(v) P(v); self-adjoint PSD in the weighted
// inner product.  Rejects non-PSD kernels (eigenvalue < -1e-10).
OperatorMatrix kernel_integral_operator(const DiscreteDGP& dgp,
                                        const KernelSpec& kernel, Side side);

// Square root of a self-adjoint PSD operator via eigendecomposition in the
// weight-symmetrized coordinates; eigenvalues in (-1e-10, 0] are clamped to
// 0, anything more negative is rejected.
OperatorMatrix operator_sqrt(const OperatorMatrix& op);

// Weighted SVD A = sum_k sigma_k u_k <v_k, .>_domain with u_k orthonormal
// under range weights and v_k under domain weights.
struct WeightedSvd {
    Eigen::MatrixXd u;  // range-dim x r, weighted-orthonormal columns
    Eigen::VectorXd sigma;
    Eigen::MatrixXd v;  // domain-dim x r
};
WeightedSvd weighted_svd(const OperatorMatrix& op);

enum class SourceVariant { basic, transformed };

struct SourceProblem {
    DiscreteDGP dgp;
    KernelSpec kernel_h;
    double beta = 1.0;
    SourceVariant variant = SourceVariant::transformed;
    OperatorMatrix t;         // forward conditional-expectation operator
    OperatorMatrix t_adjoint;
    OperatorMatrix t_h;       // kernel integral operator on W
    OperatorMatrix t_h_sqrt;
    OperatorMatrix t_tilde;   // I0 o T o T_H^{1/2}
    WeightedSvd t_tilde_svd;
    Eigen::VectorXd h0_dag;   // on W-states
    Eigen::VectorXd rho;      // on Z-states
    Eigen::VectorXd seed_vector;  // the h* / h** used in construction
};

// Coefficient profile of the random construction seed: state_normal draws
// i.i.d. normals per W-state; spectral_normal draws i.i.d. normals in the
// right-singular basis of T~, giving flat spectral content (the natural
// profile for bias-slope studies, where the slope should reflect beta alone).
enum class SeedProfile { state_normal, spectral_normal };

// Draws a random seed vector, applies the beta/2 fractional power of the
// stated composite operator (basic: (T_H T* I0 T)^{beta/2} in the RKHS
// geometry; transformed: T_H^{1/2}(T~* T~)^{beta/2} via the SVD of T~), and
// sets rho = T I0 h0_dag.
SourceProblem make_source_problem(
    const DiscreteDGP& dgp, const KernelSpec& kernel_h, double beta,
    SourceVariant variant, std::uint64_t seed,
    SeedProfile profile = SeedProfile::state_normal);

// Minimal-RKHS-norm solution T_H^{1/2} (pinv(T~) rho); throws if rho is not
// in the range of T~ beyond tolerance.
Eigen::VectorXd min_norm_solution(const SourceProblem& problem);

struct ExactErrors {
    double rmse = 0.0;        // ||I0 (h - h0_dag)||_{2,P_W}
    double weak_error = 0.0;  // ||I0 T (h - h0_dag)||_{2,P_Z}
    double rkhs_error = 0.0;  // ||h - h0_dag||_H (inf if outside the RKHS)
};
ExactErrors exact_errors(const SourceProblem& problem, const Eigen::VectorXd& h);

// RKHS norm of a vector of function values, via the spectral decomposition
// of T_H; returns +inf when a component beyond tolerance lies outside the
// range of T_H^{1/2}.
double rkhs_norm_of_values(const SourceProblem& problem,
                           const Eigen::VectorXd& values);

// Workbench moment specification: m(o;g) = s * g(z), m~(o;h) = s~ * h(w),
// with E[s|w,z] and E[s~|w,z] given by the dgp aux tables.
struct WorkbenchMoment {};

// theta = E[r h0 g0] (masks applied internally per h_hat = I0 h~); also
// computes Psi = E[m~(O;h0)] and Phi = E[m(O;g0)] from the aux-mean tables
// and throws (naming the diverging pair) unless all three agree to 1e-9.
double theta_true(const DiscreteDGP& dgp, const WorkbenchMoment& mspec,
                  const Eigen::VectorXd& h0, const Eigen::VectorXd& g0);

struct WbRow {
    int w_index;
    int z_index;
    double x_value;
    double s;
    double s_tilde;
};
struct WbDataset {
    std::vector<WbRow> rows;
};

// n iid draws from the joint pmf; auxiliary outcomes are conditional means
// plus Uniform[-a,a] noise.  Deterministic under fixed seed.
WbDataset sample(const DiscreteDGP& dgp, long n, std::uint64_t seed);

// Population Tikhonov path h_lambda = T_H^{1/2}(T~*T~ + lambda I)^{-1}T~*rho
// evaluated on a lambda grid; used by the regularization-bias study.
Eigen::VectorXd tikhonov_path_point(const SourceProblem& problem, double lambda);

// A paired workbench scenario carrying both nuisance directions: the h-side
// source problem, the g-side problem built on the transposed dgp, and aux
// tables wired so that E[s|z] = rho and E[s~|w] = rho~, plus conditionally
// mean-zero perturbations that leave the representers unchanged.
struct DualScenario {
    DiscreteDGP dgp;       // aux tables filled in
    SourceProblem h_prob;  // forward direction (solves T h = rho)
    SourceProblem g_prob;  // adjoint direction on the transposed dgp
    double theta = 0.0;
    Eigen::VectorXd h0() const { return h_prob.h0_dag; }
    Eigen::VectorXd g0() const { return g_prob.h0_dag; }
};

DiscreteDGP transpose_dgp(const DiscreteDGP& dgp);

DualScenario make_dual_scenario(const DiscreteDGP& dgp,
                                const KernelSpec& kernel_h,
                                const KernelSpec& kernel_g, double beta,
                                SourceVariant variant, std::uint64_t seed,
                                bool perturb_aux = true,
                                SeedProfile profile = SeedProfile::state_normal);

// 1-d smooth-channel chain: W and Z states on a uniform grid over [0,1],
// joint pmf proportional to exp(-(w-z)^2 / 2 tau^2), r = 1, no structural
// zeros.  Gives a geometric, well-spread singular spectrum with near-uniform
// marginals; the standard bed for bias and rate studies.
DiscreteDGP chain_dgp(int n_states, double tau);

// Diagonal channel with an exactly geometric marginal spanning the given
// number of decades: W and Z states on the integer grid, joint pmf diagonal,
// r = 1, no structural zeros.  Combined with a (near-)delta kernel the
// composite operator's spectrum is exactly the marginal, which makes
// power-law exponents clean; the reference bed for slope studies.
DiscreteDGP geometric_dgp(int n_states, double decades);

// Circulant smoothing channel on a periodic grid: p(w|z) is the Poisson
// kernel with parameter rho, so the channel's singular values are rho^m
// (geometric, two per frequency) while both marginals stay exactly uniform.
// With a near-delta kernel this is the bed where the rate-study bounds are
// tight: dense log-uniform channel spectrum and a flat RKHS geometry.
DiscreteDGP circulant_dgp(int n_states, double rho);

// Random tag-consistent dgp generator for property tests.  x_states groups
// the W/Z states into that many shared-X blocks; with mask=true a strict
// subset of tags forms X0.
DiscreteDGP random_dgp(int n_w, int n_z, int x_states, bool mask,
                       std::uint64_t seed);

}  // namespace kadv
