#include "kadv/estimators.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace kadv {

namespace {
constexpr double kPinvTol = 1e-12;  // relative eigenvalue cutoff for pinv

// Minimal-norm solve of a PSD system from its eigendecomposition, with an
// optional uniform shift (shared eigenvectors, so the shift is free).
Eigen::VectorXd pinv_apply(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& es,
                           const Eigen::VectorXd& b, double shift = 0.0) {
    const Eigen::VectorXd& lam = es.eigenvalues();
    const double lmax = std::max(0.0, lam[lam.size() - 1]) + shift;
    const double cutoff = lmax * kPinvTol;
    Eigen::VectorXd c = es.eigenvectors().transpose() * b;
    for (Eigen::Index k = 0; k < c.size(); ++k) {
        const double l = lam[k] + shift;
        c[k] = (l > cutoff && l > 0.0) ? c[k] / l : 0.0;
    }
    return es.eigenvectors() * c;
}

double condition_number(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& es,
                        double shift = 0.0) {
    const Eigen::VectorXd& lam = es.eigenvalues();
    const double lmin = lam[0] + shift, lmax = lam[lam.size() - 1] + shift;
    if (lmax <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    if (lmin <= 0.0) return std::numeric_limits<double>::infinity();
    return lmax / lmin;
}

}  // namespace

void Dataset::validate() const {
    if (n() < 2) throw std::invalid_argument("dataset: n < 2");
    if (z.rows() != n() || x.size() != n() || s.size() != n() ||
        r.size() != n())
        throw std::invalid_argument("dataset: column length mismatch");
    if (!w.allFinite() || !z.allFinite() || !x.allFinite() ||
        !s.allFinite() || !r.allFinite())
        throw std::invalid_argument("dataset: non-finite entries");
    if (s_tilde && (s_tilde->size() != n() || !s_tilde->allFinite()))
        throw std::invalid_argument("dataset: bad s_tilde");
}

Dataset to_dataset(const DiscreteDGP& dgp, const WbDataset& ds) {
    const long n = static_cast<long>(ds.rows.size());
    Dataset out;
    out.w.resize(n, dgp.w_points.cols());
    out.z.resize(n, dgp.z_points.cols());
    out.x.resize(n);
    out.s.resize(n);
    out.r.resize(n);
    Eigen::VectorXd st(n);
    for (long i = 0; i < n; ++i) {
        const WbRow& row = ds.rows[static_cast<size_t>(i)];
        out.w.row(i) = dgp.w_points.row(row.w_index);
        out.z.row(i) = dgp.z_points.row(row.z_index);
        out.x[i] = row.x_value;
        out.s[i] = row.s;
        out.r[i] = dgp.r_table(row.w_index, row.z_index);
        st[i] = row.s_tilde;
    }
    out.s_tilde = st;
    return out;
}

double MomentSpec::m(const Dataset& ds, long i,
                     const std::function<double(const Eigen::VectorXd&)>& g)
    const {
    double acc = 0.0;
    for (const MomentTerm& t : m_terms(ds, i)) acc += t.weight * g(t.point);
    return acc;
}

double MomentSpec::m_tilde(
    const Dataset& ds, long i,
    const std::function<double(const Eigen::VectorXd&)>& h) const {
    double acc = 0.0;
    for (const MomentTerm& t : mt_terms(ds, i)) acc += t.weight * h(t.point);
    return acc;
}

MomentSpec make_workbench_mspec(const DiscreteDGP& dgp) {
    MomentSpec ms;
    ms.m_terms = [](const Dataset& ds, long i) {
        return std::vector<MomentTerm>{{ds.s[i], ds.z.row(i)}};
    };
    ms.mt_terms = [](const Dataset& ds, long i) {
        const double w = ds.s_tilde ? (*ds.s_tilde)[i] : 0.0;
        return std::vector<MomentTerm>{{w, ds.w.row(i)}};
    };
    if (!dgp.x0_values.empty()) {
        std::vector<double> x0 = dgp.x0_values;
        ms.x0_membership = [x0](double tag) {
            for (double v : x0)
                if (v == tag) return 1.0;
            return 0.0;
        };
    }
    return ms;
}

Dataset swap_dataset(const Dataset& ds) {
    Dataset out;
    out.w = ds.z;
    out.z = ds.w;
    out.x = ds.x;
    out.r = ds.r;
    out.s = ds.s_tilde ? *ds.s_tilde : Eigen::VectorXd::Zero(ds.n());
    out.s_tilde = ds.s;
    return out;
}

MomentSpec swap_roles(const MomentSpec& mspec) {
    MomentSpec out = mspec;
    out.m_terms = mspec.mt_terms;
    out.mt_terms = mspec.m_terms;
    return out;
}

double EstimatorConfig::effective_ridge() const {
    if (ridge_floor >= 0.0) return ridge_floor;
    return method == Method::LRAS ? 1e-10 : 0.0;
}

void EstimatorConfig::validate() const {
    if (lambda_h <= 0.0) throw std::invalid_argument("config: lambda_h <= 0");
    if (method == Method::KRAS && lambda_g <= 0.0)
        throw std::invalid_argument("config: KRAS requires lambda_g > 0");
    if (c == 0.0) throw std::invalid_argument("config: c == 0");
    kernel_h.validate();
    kernel_g.validate();
}

namespace {

// Index rows of a matrix by exact value, returning (unique matrix, row map).
std::pair<Eigen::MatrixXd, std::vector<int>> collapse_points(
    const std::vector<Eigen::VectorXd>& pts) {
    std::map<std::vector<double>, int> seen;
    std::vector<int> idx(pts.size());
    std::vector<const Eigen::VectorXd*> uniq;
    for (size_t i = 0; i < pts.size(); ++i) {
        std::vector<double> key(pts[i].data(), pts[i].data() + pts[i].size());
        auto [it, inserted] =
            seen.emplace(std::move(key), static_cast<int>(uniq.size()));
        if (inserted) uniq.push_back(&pts[i]);
        idx[i] = it->second;
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(uniq.size()),
                      pts.empty() ? 0 : pts[0].size());
    for (size_t k = 0; k < uniq.size(); ++k)
        m.row(static_cast<Eigen::Index>(k)) = *uniq[k];
    return {m, idx};
}

}  // namespace

std::shared_ptr<const Design> build_design(const Dataset& ds,
                                           const MomentSpec& mspec,
                                           const EstimatorConfig& config) {
    ds.validate();
    const long n = ds.n();
    auto d = std::make_shared<Design>();
    d->n = n;
    d->i0 = [mspec](double x) { return mspec.i0(x); };

    std::vector<Eigen::VectorXd> wrows, zrows, trows;
    wrows.reserve(n);
    zrows.reserve(n);
    std::vector<double> tweights;
    std::vector<int> trow_idx;
    for (long i = 0; i < n; ++i) {
        wrows.emplace_back(ds.w.row(i));
        zrows.emplace_back(ds.z.row(i));
        for (const MomentTerm& t : mspec.m_terms(ds, i)) {
            trows.push_back(t.point);
            // The structural-zero mask collapses the whole empirical
            // residual, m-term included.
            tweights.push_back(t.weight * mspec.i0(ds.x[i]));
        }
    }
    auto [wu, widx] = collapse_points(wrows);
    auto [zu, zidx] = collapse_points(zrows);
    auto [tu, tidx] = collapse_points(trows);
    d->wpts = wu;
    d->zpts = zu;
    d->tpts = tu;
    d->row_w = widx;
    d->row_z = zidx;

    const Eigen::Index p = wu.rows(), q = zu.rows(), u = tu.rows();
    d->c_mat.setZero(q, p);
    d->du.setZero(q);
    d->cnt_w.setZero(p);
    d->cnt_z.setZero(q);
    d->omega.setZero(u);
    for (long i = 0; i < n; ++i) {
        const double ui = mspec.i0(ds.x[i]);
        d->c_mat(zidx[i], widx[i]) += ui * ds.r[i];
        d->du[zidx[i]] += ui;
        d->cnt_w[widx[i]] += 1.0;
        d->cnt_z[zidx[i]] += 1.0;
    }
    for (size_t k = 0; k < tweights.size(); ++k)
        d->omega[tidx[k]] += tweights[k];

    d->kh = gram(config.kernel_h, d->wpts);
    d->kg = gram(config.kernel_g, d->zpts);
    d->kzt = cross_gram(config.kernel_g, d->zpts, d->tpts);
    const Eigen::MatrixXd ktt = gram(config.kernel_g, d->tpts);
    d->qtt = d->omega.dot(ktt * d->omega);
    return d;
}

ObjectiveEval::ObjectiveEval(std::shared_ptr<const Design> design_,
                             EstimatorConfig config_, double extra_mu_)
    : design(std::move(design_)), config(std::move(config_)),
      extra_mu(extra_mu_) {
    const Design& d = *design;
    const double n = static_cast<double>(d.n);
    const double c2 = config.c * config.c;
    beta0 = (1.0 / n) * (d.kzt * d.omega);
    a_mat = (1.0 / n) * (d.kg * d.c_mat * d.kh);
    if (config.method == Method::KMMR) {
        p_h = (config.lambda_h + extra_mu) * d.kh;
    } else {
        Eigen::MatrixXd q_raw =
            (c2 / n) * (d.kg * d.du.asDiagonal() * d.kg);
        if (config.method == Method::KRAS) {
            q_raw += config.lambda_g * d.kg;
            p_h = (config.lambda_h + extra_mu) * d.kh;
        } else {
            q_raw += (config.lambda_g / n) *
                     (d.kg * d.cnt_z.asDiagonal() * d.kg);
            p_h = (config.lambda_h / n) *
                      (d.kh * d.cnt_w.asDiagonal() * d.kh) +
                  extra_mu * d.kh;
        }
        q_mat = 0.5 * (q_raw + q_raw.transpose());
        q_eig.compute(q_mat);
        cond_inner = condition_number(q_eig);
        const double tr = q_mat.trace();
        ridge_used = config.effective_ridge() * std::abs(tr) /
                     static_cast<double>(q_mat.rows());
    }
}

double ObjectiveEval::operator()(const Eigen::VectorXd& gamma) const {
    const Design& d = *design;
    if (config.method == Method::KMMR) {
        const double n = static_cast<double>(d.n);
        const Eigen::VectorXd v = d.c_mat * (d.kh * gamma);
        const double fit = (d.qtt - 2.0 * n * v.dot(beta0) +
                            v.dot(d.kg * v)) /
                           (n * n);
        return fit + gamma.dot(p_h * gamma);
    }
    const Eigen::VectorXd b = beta0 - a_mat * gamma;
    const double inner = 0.25 * b.dot(pinv_apply(q_eig, b, ridge_used));
    return inner + gamma.dot(p_h * gamma);
}

Eigen::VectorXd ObjectiveEval::inner_maximizer(
    const Eigen::VectorXd& gamma) const {
    if (config.method == Method::KMMR)
        throw std::logic_error("inner_maximizer: KMMR has a unit-ball inner player");
    const Eigen::VectorXd b = beta0 - a_mat * gamma;
    return 0.5 * pinv_apply(q_eig, b, ridge_used);
}

double ObjectiveEval::inner_objective(const Eigen::VectorXd& gamma,
                                      const Eigen::VectorXd& alpha) const {
    const Eigen::VectorXd b = beta0 - a_mat * gamma;
    return alpha.dot(b) - alpha.dot(q_mat * alpha) -
           ridge_used * alpha.squaredNorm();
}

double FittedNuisance::norm_h() const {
    const double q = f.coefficients.dot(design->kh * f.coefficients);
    return std::sqrt(std::max(0.0, q));
}

std::function<double(const Eigen::VectorXd&, double)>
FittedNuisance::as_function() const {
    RepresenterFunction rf = f;
    return [rf](const Eigen::VectorXd& pt, double x) {
        return rf.evaluate(pt, x);
    };
}

namespace {

FittedNuisance fit_design(std::shared_ptr<const Design> design,
                          const EstimatorConfig& config, double extra_mu) {
    const Design& d = *design;
    ObjectiveEval ev(design, config, extra_mu);
    const double n = static_cast<double>(d.n);
    Eigen::MatrixXd m;
    Eigen::VectorXd rhs;
    if (config.method == Method::KMMR) {
        m = (1.0 / (n * n)) *
                (d.kh * d.c_mat.transpose() * d.kg * d.c_mat * d.kh) +
            (config.lambda_h + extra_mu) * d.kh;
        rhs = (1.0 / n) * (d.kh * d.c_mat.transpose() * ev.beta0);
    } else {
        // Stationarity of F(gamma) = 1/4 b'Q^+ b + gamma'P_H gamma with
        // b = beta0 - A gamma:  (1/2 A'Q^+ A + 2 P_H) gamma = 1/2 A'Q^+ beta0.
        Eigen::MatrixXd qinv_a(d.kg.rows(), d.kh.rows());
        for (Eigen::Index j = 0; j < ev.a_mat.cols(); ++j)
            qinv_a.col(j) = pinv_apply(ev.q_eig, ev.a_mat.col(j), ev.ridge_used);
        m = 0.5 * ev.a_mat.transpose() * qinv_a + 2.0 * ev.p_h;
        rhs = 0.5 * ev.a_mat.transpose() *
              pinv_apply(ev.q_eig, ev.beta0, ev.ridge_used);
    }
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> mes(m);
    const double outer_ridge =
        config.effective_ridge() * std::abs(m.trace()) /
        static_cast<double>(m.rows());
    Eigen::VectorXd gamma = pinv_apply(mes, rhs, outer_ridge);
    if (!gamma.allFinite())
        throw std::runtime_error("fit: non-finite solution (conditioning failure)");

    FittedNuisance out;
    out.f.support_points = d.wpts;
    out.f.coefficients = gamma;
    out.f.kernel = config.kernel_h;
    out.f.offset_mask = d.i0;
    out.config = config;
    out.design = design;
    out.report.ridge_used = ev.ridge_used;
    out.report.cond_inner = ev.cond_inner;
    out.report.cond_outer = condition_number(mes, outer_ridge);
    out.report.objective = ev(gamma);
    out.report.constraint_multiplier = extra_mu;
    out.report.collapsed_w = d.wpts.rows();
    out.report.collapsed_z = d.zpts.rows();
    return out;
}

FittedNuisance fit_impl(const Dataset& ds, const MomentSpec& mspec,
                        const EstimatorConfig& config) {
    config.validate();
    auto design = build_design(ds, mspec, config);
    FittedNuisance fitted = fit_design(design, config, 0.0);
    if (config.norm_bound_B && fitted.norm_h() > *config.norm_bound_B)
        return constrain_norm(fitted, *config.norm_bound_B);
    return fitted;
}

}  // namespace

FittedNuisance fit_kras(const Dataset& ds, const MomentSpec& mspec,
                        const EstimatorConfig& config) {
    if (config.method != Method::KRAS)
        throw std::invalid_argument("fit_kras: config.method != KRAS");
    return fit_impl(ds, mspec, config);
}

FittedNuisance fit_lras(const Dataset& ds, const MomentSpec& mspec,
                        const EstimatorConfig& config) {
    if (config.method != Method::LRAS)
        throw std::invalid_argument("fit_lras: config.method != LRAS");
    return fit_impl(ds, mspec, config);
}

FittedNuisance fit_kmmr(const Dataset& ds, const MomentSpec& mspec,
                        const EstimatorConfig& config) {
    if (config.method != Method::KMMR)
        throw std::invalid_argument("fit_kmmr: config.method != KMMR");
    return fit_impl(ds, mspec, config);
}

FittedNuisance fit(const Dataset& ds, const MomentSpec& mspec,
                   const EstimatorConfig& config) {
    return fit_impl(ds, mspec, config);
}

std::pair<RepresenterFunction, double> inner_max(const FittedNuisance& h,
                                                 const Dataset& ds,
                                                 const MomentSpec& mspec,
                                                 const EstimatorConfig& config) {
    if (config.method == Method::KMMR)
        throw std::invalid_argument("inner_max: KRAS-style problems only");
    auto design = build_design(ds, mspec, config);
    const Design& d = *design;
    ObjectiveEval ev(design, config, 0.0);
    Eigen::VectorXd hvals(d.wpts.rows());
    for (Eigen::Index p = 0; p < d.wpts.rows(); ++p)
        hvals[p] = h.f.evaluate(d.wpts.row(p));
    const double n = static_cast<double>(d.n);
    const Eigen::VectorXd b =
        (1.0 / n) * (d.kzt * d.omega - d.kg * (d.c_mat * hvals));
    const Eigen::VectorXd alpha = 0.5 * pinv_apply(ev.q_eig, b, ev.ridge_used);
    const double c2 = config.c * config.c;
    const double value =
        4.0 * c2 * (alpha.dot(b) - alpha.dot(ev.q_mat * alpha) -
                    ev.ridge_used * alpha.squaredNorm());
    RepresenterFunction g;
    g.support_points = d.zpts;
    g.coefficients = alpha;
    g.kernel = config.kernel_g;
    g.offset_mask = d.i0;
    return {g, value};
}

std::pair<Eigen::VectorXd, double> inner_max_population(
    const SourceProblem& problem, const Eigen::VectorXd& h, double c) {
    const Eigen::VectorXd i0z = problem.dgp.i0_z();
    const Eigen::VectorXd td =
        i0z.asDiagonal() * (problem.t.entries * (problem.h0_dag - h));
    const double value = weighted_inner(td, td, problem.dgp.p_z());
    const Eigen::VectorXd g = td / (2.0 * c * c);
    return {g, value};
}

FittedNuisance constrain_norm(const FittedNuisance& unconstrained, double B) {
    if (B <= 0.0) throw std::invalid_argument("constrain_norm: B <= 0");
    if (unconstrained.norm_h() <= B) return unconstrained;
    EstimatorConfig config = unconstrained.config;
    auto refit = [&](double mu) {
        return fit_design(unconstrained.design, config, mu);
    };
    double lo = 0.0, hi = std::max(1.0, config.lambda_h);
    for (int k = 0; k < 200 && refit(hi).norm_h() > B; ++k) {
        lo = hi;
        hi *= 2.0;
        if (k == 199)
            throw std::runtime_error("constrain_norm: failed to bracket");
    }
    for (int k = 0; k < 500; ++k) {
        const double mid = 0.5 * (lo + hi);
        FittedNuisance cand = refit(mid);
        const double nm = cand.norm_h();
        if (nm <= B && nm >= B * (1.0 - 1e-6)) return cand;
        if (nm > B)
            lo = mid;
        else
            hi = mid;
    }
    throw std::runtime_error("constrain_norm: bisection did not converge");
}

FittedNuisance nested_oracle(const Dataset& ds, const MomentSpec& mspec,
                             const EstimatorConfig& config,
                             const OracleSettings& settings) {
    config.validate();
    if (ds.n() > 50)
        throw std::invalid_argument("nested_oracle: desk scale only (n <= 50)");
    auto design = build_design(ds, mspec, config);
    ObjectiveEval ev(design, config, 0.0);
    const Eigen::Index dim = design->wpts.rows();

    auto grad = [&](const Eigen::VectorXd& g) {
        Eigen::VectorXd out(dim);
        Eigen::VectorXd probe = g;
        for (Eigen::Index j = 0; j < dim; ++j) {
            // central difference is exact for quadratics at any step, so a
            // large step minimizes cancellation in fp - fm
            const double step = 0.5 * (1.0 + std::abs(g[j]));
            probe[j] = g[j] + step;
            const double fp = ev(probe);
            probe[j] = g[j] - step;
            const double fm = ev(probe);
            probe[j] = g[j];
            out[j] = (fp - fm) / (2.0 * step);  // exact for quadratics
        }
        return out;
    };

    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd g = grad(gamma);
    Eigen::VectorXd dir = -g;
    double f_prev = ev(gamma);
    int calm = 0;
    bool converged = false;
    for (long it = 0; it < settings.max_iters; ++it) {
        if (g.norm() <= 1e-13 * (1.0 + std::abs(f_prev))) {
            converged = true;
            break;
        }
        const Eigen::VectorXd hd = grad(gamma + dir) - g;
        const double curv = dir.dot(hd);
        double step;
        if (curv > 1e-16 * dir.squaredNorm())
            step = -g.dot(dir) / curv;
        else {
            dir = -g;  // restart on flat curvature
            step = 1e-3 / (1.0 + g.norm());
        }
        gamma += step * dir;
        const Eigen::VectorXd g_new = grad(gamma);
        const double f_now = ev(gamma);
        if (std::abs(f_prev - f_now) <= settings.tol * std::max(1.0, std::abs(f_now)))
            ++calm;
        else
            calm = 0;
        if (calm >= 5) {
            converged = true;
            break;
        }
        f_prev = f_now;
        const double denom = g.squaredNorm();
        double beta_pr =
            denom > 0.0 ? g_new.dot(g_new - g) / denom : 0.0;
        if (beta_pr < 0.0 || (it + 1) % std::max<Eigen::Index>(dim, 1) == 0)
            beta_pr = 0.0;  // periodic restart
        dir = -g_new + beta_pr * dir;
        g = g_new;
    }
    if (!converged)
        throw std::runtime_error("nested_oracle: no convergence within cap");

    FittedNuisance out;
    out.f.support_points = design->wpts;
    out.f.coefficients = gamma;
    out.f.kernel = config.kernel_h;
    out.f.offset_mask = design->i0;
    out.config = config;
    out.design = design;
    out.report.objective = ev(gamma);
    out.report.collapsed_w = design->wpts.rows();
    out.report.collapsed_z = design->zpts.rows();
    return out;
}

}  // namespace kadv
