#include "kadv/workbench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace kadv {

namespace {
constexpr double kPsdTol = 1e-10;   // clamping window for PSD drift
constexpr double kRankTol = 1e-12;  // relative singular-value cutoff
}  // namespace

void DiscreteDGP::validate() const {
    const Eigen::Index p = w_points.rows(), q = z_points.rows();
    if (p < 1 || q < 1) throw std::invalid_argument("dgp: empty support");
    if (w_tag.size() != p || z_tag.size() != q)
        throw std::invalid_argument("dgp: tag size mismatch");
    if (joint_pmf.rows() != p || joint_pmf.cols() != q)
        throw std::invalid_argument("dgp: joint_pmf shape mismatch");
    if (r_table.rows() != p || r_table.cols() != q)
        throw std::invalid_argument("dgp: r_table shape mismatch");
    if (joint_pmf.minCoeff() < 0.0)
        throw std::invalid_argument("dgp: negative pmf entry");
    if (std::abs(joint_pmf.sum() - 1.0) > 1e-12)
        throw std::invalid_argument("dgp: pmf does not sum to 1");
    if (!r_table.allFinite())
        throw std::invalid_argument("dgp: unbounded r_table");
    if (p_w().minCoeff() <= 0.0 || p_z().minCoeff() <= 0.0)
        throw std::invalid_argument("dgp: zero marginal state");
    // Shared X: positive mass only where the W-tag and Z-tag agree.
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < q; ++j)
            if (joint_pmf(i, j) > 0.0 && w_tag[i] != z_tag[j])
                throw std::invalid_argument("dgp: tag-inconsistent cell");
    if (aux_mean && (aux_mean->rows() != p || aux_mean->cols() != q))
        throw std::invalid_argument("dgp: aux_mean shape mismatch");
    if (aux_mean_tilde &&
        (aux_mean_tilde->rows() != p || aux_mean_tilde->cols() != q))
        throw std::invalid_argument("dgp: aux_mean_tilde shape mismatch");
}

Eigen::VectorXd DiscreteDGP::p_w() const { return joint_pmf.rowwise().sum(); }
Eigen::VectorXd DiscreteDGP::p_z() const {
    return joint_pmf.colwise().sum().transpose();
}

bool DiscreteDGP::in_x0(double tag) const {
    if (x0_values.empty()) return true;
    return std::find(x0_values.begin(), x0_values.end(), tag) !=
           x0_values.end();
}

Eigen::VectorXd DiscreteDGP::i0_w() const {
    Eigen::VectorXd v(w_tag.size());
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v[i] = in_x0(w_tag[i]) ? 1.0 : 0.0;
    return v;
}

Eigen::VectorXd DiscreteDGP::i0_z() const {
    Eigen::VectorXd v(z_tag.size());
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v[i] = in_x0(z_tag[i]) ? 1.0 : 0.0;
    return v;
}

double DiscreteDGP::mu0() const { return p_w().dot(i0_w()); }

void OperatorMatrix::validate() const {
    if (entries.cols() != domain_weights.size() ||
        entries.rows() != range_weights.size())
        throw std::invalid_argument("operator: weight/shape mismatch");
    if (domain_weights.minCoeff() <= 0.0 || range_weights.minCoeff() <= 0.0)
        throw std::invalid_argument("operator: non-positive weights");
}

double weighted_inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                      const Eigen::VectorXd& w) {
    return (a.array() * b.array() * w.array()).sum();
}

double weighted_norm(const Eigen::VectorXd& a, const Eigen::VectorXd& w) {
    return std::sqrt(std::max(0.0, weighted_inner(a, a, w)));
}

OperatorMatrix cond_exp_operator(const DiscreteDGP& dgp,
                                 OpDirection direction) {
    dgp.validate();
    const Eigen::VectorXd p = dgp.p_w(), q = dgp.p_z();
    OperatorMatrix op;
    if (direction == OpDirection::forward) {
        // T[z,w] = r(w,z) P(w|z)
        op.entries.resize(q.size(), p.size());
        for (Eigen::Index j = 0; j < q.size(); ++j)
            for (Eigen::Index i = 0; i < p.size(); ++i)
                op.entries(j, i) = dgp.r_table(i, j) * dgp.joint_pmf(i, j) / q[j];
        op.domain_weights = p;
        op.range_weights = q;
    } else {
        // T*[w,z] = r(w,z) P(z|w)
        op.entries.resize(p.size(), q.size());
        for (Eigen::Index i = 0; i < p.size(); ++i)
            for (Eigen::Index j = 0; j < q.size(); ++j)
                op.entries(i, j) = dgp.r_table(i, j) * dgp.joint_pmf(i, j) / p[i];
        op.domain_weights = q;
        op.range_weights = p;
    }
    return op;
}

OperatorMatrix kernel_integral_operator(const DiscreteDGP& dgp,
                                        const KernelSpec& kernel, Side side) {
    dgp.validate();
    const Eigen::MatrixXd& pts =
        (side == Side::W) ? dgp.w_points : dgp.z_points;
    const Eigen::VectorXd w = (side == Side::W) ? dgp.p_w() : dgp.p_z();
    const Eigen::MatrixXd k = gram(kernel, pts);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -kPsdTol * scale)
        throw std::invalid_argument("kernel_integral_operator: non-PSD Gram");
    OperatorMatrix op;
    op.entries = k * w.asDiagonal();
    op.domain_weights = w;
    op.range_weights = w;
    return op;
}

namespace {

// Symmetrize a weighted-self-adjoint operator: M = D A D^{-1} with
// D = diag(sqrt(weights)) is plain-symmetric.
Eigen::MatrixXd symmetrized(const OperatorMatrix& op) {
    const Eigen::VectorXd d = op.domain_weights.cwiseSqrt();
    Eigen::MatrixXd m =
        d.asDiagonal() * op.entries * d.cwiseInverse().asDiagonal();
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (asym > 1e-8 * scale)
        throw std::invalid_argument("operator not self-adjoint");
    return 0.5 * (m + m.transpose());
}

}  // namespace

OperatorMatrix operator_sqrt(const OperatorMatrix& op) {
    op.validate();
    if (op.entries.rows() != op.entries.cols())
        throw std::invalid_argument("operator_sqrt: non-square");
    const Eigen::MatrixXd m = symmetrized(op);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    Eigen::VectorXd lam = es.eigenvalues();
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (lam[i] < -kPsdTol * scale)
            throw std::invalid_argument("operator_sqrt: negative eigenvalue");
        if (lam[i] < 0.0) lam[i] = 0.0;  // clamp PSD drift
    }
    const Eigen::VectorXd d = op.domain_weights.cwiseSqrt();
    OperatorMatrix s;
    s.entries = d.cwiseInverse().asDiagonal() *
                (es.eigenvectors() * lam.cwiseSqrt().asDiagonal() *
                 es.eigenvectors().transpose()) *
                d.asDiagonal();
    s.domain_weights = op.domain_weights;
    s.range_weights = op.range_weights;
    return s;
}

WeightedSvd weighted_svd(const OperatorMatrix& op) {
    op.validate();
    const Eigen::VectorXd du = op.range_weights.cwiseSqrt();
    const Eigen::VectorXd dv = op.domain_weights.cwiseSqrt();
    const Eigen::MatrixXd b =
        du.asDiagonal() * op.entries * dv.cwiseInverse().asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sig = svd.singularValues();
    const double cutoff = (sig.size() ? sig[0] : 0.0) * kRankTol;
    Eigen::Index r = 0;
    while (r < sig.size() && sig[r] > cutoff) ++r;
    WeightedSvd out;
    out.sigma = sig.head(r);
    out.u = du.cwiseInverse().asDiagonal() * svd.matrixU().leftCols(r);
    out.v = dv.cwiseInverse().asDiagonal() * svd.matrixV().leftCols(r);
    return out;
}

namespace {

// Coefficients <v_k, x>_domain of x in the right singular basis.
Eigen::VectorXd right_coeffs(const WeightedSvd& svd, const Eigen::VectorXd& w,
                             const Eigen::VectorXd& x) {
    return svd.v.transpose() * (w.asDiagonal() * x);
}

Eigen::VectorXd apply_tt_power(const WeightedSvd& svd, const Eigen::VectorXd& w,
                               double expo, const Eigen::VectorXd& x) {
    // (T~* T~)^{expo} restricted to the row space (sigma > cutoff).
    Eigen::VectorXd c = right_coeffs(svd, w, x);
    for (Eigen::Index k = 0; k < c.size(); ++k)
        c[k] *= std::pow(svd.sigma[k] * svd.sigma[k], expo);
    return svd.v * c;
}

}  // namespace

SourceProblem make_source_problem(const DiscreteDGP& dgp,
                                  const KernelSpec& kernel_h, double beta,
                                  SourceVariant variant, std::uint64_t seed,
                                  SeedProfile profile) {
    if (beta <= 0.0) throw std::invalid_argument("make_source_problem: beta <= 0");
    SourceProblem pr;
    pr.dgp = dgp;
    pr.kernel_h = kernel_h;
    pr.beta = beta;
    pr.variant = variant;
    pr.t = cond_exp_operator(dgp, OpDirection::forward);
    pr.t_adjoint = cond_exp_operator(dgp, OpDirection::adjoint);
    pr.t_h = kernel_integral_operator(dgp, kernel_h, Side::W);
    pr.t_h_sqrt = operator_sqrt(pr.t_h);
    const Eigen::VectorXd i0z = dgp.i0_z();
    pr.t_tilde.entries =
        i0z.asDiagonal() * pr.t.entries * pr.t_h_sqrt.entries;
    pr.t_tilde.domain_weights = pr.t.domain_weights;
    pr.t_tilde.range_weights = pr.t.range_weights;
    pr.t_tilde_svd = weighted_svd(pr.t_tilde);
    if (pr.t_tilde_svd.sigma.size() == 0)
        throw std::runtime_error("make_source_problem: rank-zero operator");

    const Eigen::Index p = dgp.w_points.rows();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd s;
    if (profile == SeedProfile::state_normal) {
        s.resize(p);
        for (Eigen::Index i = 0; i < p; ++i) s[i] = gauss(rng);
    } else {
        Eigen::VectorXd g(pr.t_tilde_svd.sigma.size());
        for (Eigen::Index k = 0; k < g.size(); ++k) g[k] = gauss(rng);
        s = pr.t_tilde_svd.v * g;
    }
    pr.seed_vector = s;

    const Eigen::VectorXd pw = dgp.p_w();
    Eigen::VectorXd h_prime;
    if (variant == SourceVariant::transformed) {
        // h0 = T_H^{1/2} (T~*T~)^{beta/2} h**
        h_prime = apply_tt_power(pr.t_tilde_svd, pw, beta / 2.0, s);
    } else {
        // h* = T_H^{1/2} s in H; the RKHS-geometry fractional power of
        // T_H T* I0 T conjugates through the isometry T_H^{1/2}:
        // h0 = T_H^{1/2} (T~*T~)^{beta/2} pinv(T_H^{1/2}) h*.
        const Eigen::VectorXd h_star = pr.t_h_sqrt.apply(s);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
            symmetrized(pr.t_h_sqrt));
        const Eigen::VectorXd dsq = pw.cwiseSqrt();
        const Eigen::VectorXd lam = es.eigenvalues();
        const double cutoff =
            std::max(1e-300, lam.cwiseAbs().maxCoeff() * kRankTol);
        Eigen::VectorXd c = es.eigenvectors().transpose() *
                            (dsq.asDiagonal() * h_star);
        for (Eigen::Index k = 0; k < c.size(); ++k)
            c[k] = (lam[k] > cutoff) ? c[k] / lam[k] : 0.0;
        const Eigen::VectorXd pre =
            dsq.cwiseInverse().asDiagonal() * (es.eigenvectors() * c);
        h_prime = apply_tt_power(pr.t_tilde_svd, pw, beta / 2.0, pre);
    }
    pr.h0_dag = pr.t_h_sqrt.apply(h_prime);
    const Eigen::VectorXd i0w = dgp.i0_w();
    pr.rho = i0z.asDiagonal() *
             (pr.t.entries * (i0w.asDiagonal() * pr.h0_dag));
    return pr;
}

Eigen::VectorXd min_norm_solution(const SourceProblem& problem) {
    const WeightedSvd& svd = problem.t_tilde_svd;
    const Eigen::VectorXd qz = problem.dgp.p_z();
    Eigen::VectorXd c = svd.u.transpose() * (qz.asDiagonal() * problem.rho);
    for (Eigen::Index k = 0; k < c.size(); ++k) c[k] /= svd.sigma[k];
    const Eigen::VectorXd h_prime = svd.v * c;
    const Eigen::VectorXd resid =
        problem.t_tilde.apply(h_prime) - problem.rho;
    const double tol = 1e-8 * std::max(1.0, weighted_norm(problem.rho, qz));
    if (weighted_norm(resid, qz) > tol)
        throw std::runtime_error(
            "min_norm_solution: rho not in range of T~ (inconsistent problem)");
    return problem.t_h_sqrt.apply(h_prime);
}

double rkhs_norm_of_values(const SourceProblem& problem,
                           const Eigen::VectorXd& values) {
    const Eigen::VectorXd pw = problem.dgp.p_w();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(problem.t_h));
    const Eigen::VectorXd lam = es.eigenvalues();
    const double cutoff = std::max(1e-300, lam.cwiseAbs().maxCoeff() * 1e-13);
    const Eigen::VectorXd c =
        es.eigenvectors().transpose() * (pw.cwiseSqrt().asDiagonal() * values);
    double norm2 = 0.0, captured = 0.0;
    for (Eigen::Index k = 0; k < c.size(); ++k) {
        if (lam[k] > cutoff) {
            norm2 += c[k] * c[k] / lam[k];
            captured += c[k] * c[k];
        }
    }
    const double total = c.squaredNorm();
    const double leakage = total - captured;
    if (total > 0.0 && leakage > 1e-12 * total)
        return std::numeric_limits<double>::infinity();
    return std::sqrt(std::max(0.0, norm2));
}

ExactErrors exact_errors(const SourceProblem& problem,
                         const Eigen::VectorXd& h) {
    const Eigen::VectorXd d = h - problem.h0_dag;
    const Eigen::VectorXd i0w = problem.dgp.i0_w();
    const Eigen::VectorXd i0z = problem.dgp.i0_z();
    ExactErrors e;
    e.rmse = weighted_norm(i0w.asDiagonal() * d, problem.dgp.p_w());
    const Eigen::VectorXd td = i0z.asDiagonal() * (problem.t.entries * d);
    e.weak_error = weighted_norm(td, problem.dgp.p_z());
    e.rkhs_error = rkhs_norm_of_values(problem, d);
    return e;
}

double theta_true(const DiscreteDGP& dgp, const WorkbenchMoment&,
                  const Eigen::VectorXd& h0, const Eigen::VectorXd& g0) {
    dgp.validate();
    if (!dgp.aux_mean || !dgp.aux_mean_tilde)
        throw std::invalid_argument("theta_true: dgp lacks aux-mean tables");
    const Eigen::VectorXd i0w = dgp.i0_w(), i0z = dgp.i0_z();
    const Eigen::VectorXd hm = i0w.asDiagonal() * h0;
    const Eigen::VectorXd gm = i0z.asDiagonal() * g0;
    double direct = 0.0, psi = 0.0, phi = 0.0;
    for (Eigen::Index i = 0; i < dgp.joint_pmf.rows(); ++i)
        for (Eigen::Index j = 0; j < dgp.joint_pmf.cols(); ++j) {
            const double pij = dgp.joint_pmf(i, j);
            if (pij == 0.0) continue;
            direct += pij * dgp.r_table(i, j) * hm[i] * gm[j];
            psi += pij * (*dgp.aux_mean_tilde)(i, j) * hm[i];
            phi += pij * (*dgp.aux_mean)(i, j) * gm[j];
        }
    const double tol = 1e-9 * std::max(1.0, std::abs(direct));
    std::ostringstream bad;
    if (std::abs(psi - phi) > tol) bad << "Psi vs Phi ";
    if (std::abs(psi - direct) > tol) bad << "Psi vs E[rhg] ";
    if (std::abs(phi - direct) > tol) bad << "Phi vs E[rhg] ";
    if (!bad.str().empty())
        throw std::runtime_error("theta_true: triple representation diverges: " +
                                 bad.str());
    return direct;
}

WbDataset sample(const DiscreteDGP& dgp, long n, std::uint64_t seed) {
    dgp.validate();
    if (n < 1) throw std::invalid_argument("sample: n < 1");
    const Eigen::Index p = dgp.joint_pmf.rows(), q = dgp.joint_pmf.cols();
    std::vector<double> cellw(static_cast<size_t>(p * q));
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < q; ++j)
            cellw[static_cast<size_t>(i * q + j)] = dgp.joint_pmf(i, j);
    std::mt19937_64 rng(seed);
    std::discrete_distribution<int> cell(cellw.begin(), cellw.end());
    std::uniform_real_distribution<double> noise(-dgp.aux_noise_halfwidth,
                                                 dgp.aux_noise_halfwidth);
    WbDataset ds;
    ds.rows.reserve(static_cast<size_t>(n));
    for (long k = 0; k < n; ++k) {
        const int c = cell(rng);
        WbRow row;
        row.w_index = static_cast<int>(c / q);
        row.z_index = static_cast<int>(c % q);
        row.x_value = dgp.w_tag[row.w_index];
        const double ms = dgp.aux_mean ? (*dgp.aux_mean)(row.w_index, row.z_index) : 0.0;
        const double mt = dgp.aux_mean_tilde
                              ? (*dgp.aux_mean_tilde)(row.w_index, row.z_index)
                              : 0.0;
        row.s = ms + noise(rng);
        row.s_tilde = mt + noise(rng);
        ds.rows.push_back(row);
    }
    return ds;
}

Eigen::VectorXd tikhonov_path_point(const SourceProblem& problem,
                                    double lambda) {
    const WeightedSvd& svd = problem.t_tilde_svd;
    const Eigen::VectorXd qz = problem.dgp.p_z();
    Eigen::VectorXd c = svd.u.transpose() * (qz.asDiagonal() * problem.rho);
    for (Eigen::Index k = 0; k < c.size(); ++k)
        c[k] *= svd.sigma[k] / (svd.sigma[k] * svd.sigma[k] + lambda);
    return problem.t_h_sqrt.apply(svd.v * c);
}

DiscreteDGP transpose_dgp(const DiscreteDGP& dgp) {
    DiscreteDGP t;
    t.w_points = dgp.z_points;
    t.z_points = dgp.w_points;
    t.w_tag = dgp.z_tag;
    t.z_tag = dgp.w_tag;
    t.joint_pmf = dgp.joint_pmf.transpose();
    t.r_table = dgp.r_table.transpose();
    t.x0_values = dgp.x0_values;
    if (dgp.aux_mean_tilde) t.aux_mean = dgp.aux_mean_tilde->transpose();
    if (dgp.aux_mean) t.aux_mean_tilde = dgp.aux_mean->transpose();
    t.aux_noise_halfwidth = dgp.aux_noise_halfwidth;
    return t;
}

DualScenario make_dual_scenario(const DiscreteDGP& dgp_in,
                                const KernelSpec& kernel_h,
                                const KernelSpec& kernel_g, double beta,
                                SourceVariant variant, std::uint64_t seed,
                                bool perturb_aux, SeedProfile profile) {
    DualScenario sc;
    sc.h_prob = make_source_problem(dgp_in, kernel_h, beta, variant, seed,
                                    profile);
    sc.g_prob =
        make_source_problem(transpose_dgp(dgp_in), kernel_g, beta, variant,
                            seed + 0x9e3779b97f4a7c15ULL, profile);
    DiscreteDGP dgp = dgp_in;
    const Eigen::Index p = dgp.joint_pmf.rows(), q = dgp.joint_pmf.cols();
    const Eigen::VectorXd i0w = dgp.i0_w(), i0z = dgp.i0_z();
    const Eigen::VectorXd h0 = sc.h_prob.h0_dag, g0 = sc.g_prob.h0_dag;
    Eigen::MatrixXd sm(p, q), stm(p, q);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < q; ++j) {
            sm(i, j) = dgp.r_table(i, j) * i0w[i] * h0[i];
            stm(i, j) = dgp.r_table(i, j) * i0z[j] * g0[j];
        }
    if (perturb_aux) {
        // Conditionally mean-zero perturbations: E[eps|z]=0 keeps rho, and
        // E[eps~|w]=0 keeps rho~, so the triple-theta check is non-trivial.
        std::mt19937_64 rng(seed ^ 0xabcdef1234567890ULL);
        std::uniform_real_distribution<double> un(-0.5, 0.5);
        Eigen::MatrixXd e(p, q), et(p, q);
        for (Eigen::Index i = 0; i < p; ++i)
            for (Eigen::Index j = 0; j < q; ++j) {
                e(i, j) = un(rng);
                et(i, j) = un(rng);
            }
        const Eigen::VectorXd pw = dgp.p_w(), pz = dgp.p_z();
        for (Eigen::Index j = 0; j < q; ++j) {
            double mean = 0.0;
            for (Eigen::Index i = 0; i < p; ++i)
                mean += dgp.joint_pmf(i, j) * e(i, j);
            mean /= pz[j];
            for (Eigen::Index i = 0; i < p; ++i) sm(i, j) += e(i, j) - mean;
        }
        for (Eigen::Index i = 0; i < p; ++i) {
            double mean = 0.0;
            for (Eigen::Index j = 0; j < q; ++j)
                mean += dgp.joint_pmf(i, j) * et(i, j);
            mean /= pw[i];
            for (Eigen::Index j = 0; j < q; ++j) stm(i, j) += et(i, j) - mean;
        }
    }
    dgp.aux_mean = sm;
    dgp.aux_mean_tilde = stm;
    sc.dgp = dgp;
    sc.h_prob.dgp = dgp;
    sc.g_prob.dgp = transpose_dgp(dgp);
    sc.theta = theta_true(dgp, WorkbenchMoment{}, h0, g0);
    return sc;
}

DiscreteDGP chain_dgp(int n_states, double tau) {
    if (n_states < 2)
        throw std::invalid_argument("chain_dgp: need at least 2 states");
    if (tau <= 0.0) throw std::invalid_argument("chain_dgp: tau must be positive");
    DiscreteDGP d;
    d.w_points.resize(n_states, 1);
    d.z_points.resize(n_states, 1);
    d.w_tag = Eigen::VectorXd::Zero(n_states);
    d.z_tag = Eigen::VectorXd::Zero(n_states);
    d.r_table = Eigen::MatrixXd::Ones(n_states, n_states);
    d.joint_pmf.resize(n_states, n_states);
    for (int i = 0; i < n_states; ++i) {
        d.w_points(i, 0) = static_cast<double>(i) / (n_states - 1);
        d.z_points(i, 0) = static_cast<double>(i) / (n_states - 1);
    }
    for (int i = 0; i < n_states; ++i)
        for (int j = 0; j < n_states; ++j) {
            double gap = d.w_points(i, 0) - d.z_points(j, 0);
            d.joint_pmf(i, j) = std::exp(-gap * gap / (2.0 * tau * tau));
        }
    d.joint_pmf /= d.joint_pmf.sum();
    d.validate();
    return d;
}

DiscreteDGP geometric_dgp(int n_states, double decades) {
    if (n_states < 2)
        throw std::invalid_argument("geometric_dgp: need at least 2 states");
    if (decades <= 0.0)
        throw std::invalid_argument("geometric_dgp: decades must be positive");
    DiscreteDGP d;
    d.w_points.resize(n_states, 1);
    d.z_points.resize(n_states, 1);
    d.w_tag = Eigen::VectorXd::Zero(n_states);
    d.z_tag = Eigen::VectorXd::Zero(n_states);
    d.r_table = Eigen::MatrixXd::Ones(n_states, n_states);
    d.joint_pmf = Eigen::MatrixXd::Zero(n_states, n_states);
    const double ratio = std::pow(10.0, -decades / (n_states - 1));
    double total = 0.0;
    for (int i = 0; i < n_states; ++i) total += std::pow(ratio, i);
    for (int i = 0; i < n_states; ++i) {
        d.w_points(i, 0) = i;
        d.z_points(i, 0) = i;
        d.joint_pmf(i, i) = std::pow(ratio, i) / total;
    }
    d.validate();
    return d;
}

DiscreteDGP circulant_dgp(int n_states, double rho) {
    if (n_states < 3)
        throw std::invalid_argument("circulant_dgp: need at least 3 states");
    if (rho <= 0.0 || rho >= 1.0)
        throw std::invalid_argument("circulant_dgp: rho must lie in (0,1)");
    DiscreteDGP d;
    d.w_points.resize(n_states, 1);
    d.z_points.resize(n_states, 1);
    d.w_tag = Eigen::VectorXd::Zero(n_states);
    d.z_tag = Eigen::VectorXd::Zero(n_states);
    d.r_table = Eigen::MatrixXd::Ones(n_states, n_states);
    d.joint_pmf.resize(n_states, n_states);
    Eigen::VectorXd f(n_states);
    for (int k = 0; k < n_states; ++k) {
        double ang = 2.0 * M_PI * k / n_states;
        f[k] = (1.0 - rho * rho) /
               (1.0 - 2.0 * rho * std::cos(ang) + rho * rho);
    }
    f /= f.sum();
    for (int i = 0; i < n_states; ++i) {
        d.w_points(i, 0) = i;
        d.z_points(i, 0) = i;
        for (int j = 0; j < n_states; ++j)
            d.joint_pmf(i, j) = f[(i - j + n_states) % n_states] / n_states;
    }
    d.validate();
    return d;
}

DiscreteDGP random_dgp(int n_w, int n_z, int x_states, bool mask,
                       std::uint64_t seed) {
    if (n_w < 1 || n_z < 1 || x_states < 1 || x_states > std::min(n_w, n_z))
        throw std::invalid_argument("random_dgp: bad sizes");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> un(0.0, 1.0);
    DiscreteDGP d;
    d.w_points.resize(n_w, 2);
    d.z_points.resize(n_z, 2);
    d.w_tag.resize(n_w);
    d.z_tag.resize(n_z);
    for (int i = 0; i < n_w; ++i) {
        d.w_tag[i] = static_cast<double>(i % x_states);
        d.w_points.row(i) << 2.0 * un(rng) - 1.0, d.w_tag[i];
    }
    for (int j = 0; j < n_z; ++j) {
        d.z_tag[j] = static_cast<double>(j % x_states);
        d.z_points.row(j) << 2.0 * un(rng) - 1.0, d.z_tag[j];
    }
    d.joint_pmf.setZero(n_w, n_z);
    d.r_table.resize(n_w, n_z);
    for (int i = 0; i < n_w; ++i)
        for (int j = 0; j < n_z; ++j) {
            d.r_table(i, j) = 3.0 * un(rng) - 1.5;
            if (d.w_tag[i] == d.z_tag[j])
                d.joint_pmf(i, j) = 0.1 + 0.9 * un(rng);
        }
    d.joint_pmf /= d.joint_pmf.sum();
    if (mask && x_states > 1)
        for (int x = 0; x + 1 < x_states; ++x)
            d.x0_values.push_back(static_cast<double>(x));
    d.validate();
    return d;
}

}  // namespace kadv
