#include "kadv/scenarios.hpp"

#include <gsl/gsl_integration.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "kadv/kernels.hpp"

namespace kadv {

namespace {

double expit(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// symmetric truncation keeps the noise exactly mean-zero
double trunc_normal(std::mt19937_64& rng, double half_width = 4.0) {
    std::normal_distribution<double> nd(0.0, 1.0);
    for (;;) {
        double v = nd(rng);
        if (std::abs(v) <= half_width) return v;
    }
}

// density of a normal(mu, sd) truncated to [lo, hi]
double trunc_density(double a, double mu, double sd, double lo, double hi) {
    if (a < lo || a > hi) return 0.0;
    auto cdf = [&](double t) { return 0.5 * std::erfc(-(t - mu) / (sd * std::sqrt(2.0))); };
    double zmass = cdf(hi) - cdf(lo);
    double pdf = std::exp(-0.5 * std::pow((a - mu) / sd, 2)) /
                 (sd * std::sqrt(2.0 * M_PI));
    return pdf / zmass;
}

double trunc_normal_in(std::mt19937_64& rng, double mu, double sd, double lo,
                       double hi) {
    std::normal_distribution<double> nd(mu, sd);
    for (;;) {
        double v = nd(rng);
        if (v >= lo && v <= hi) return v;
    }
}

struct GL {
    explicit GL(std::size_t order) : tab(gsl_integration_glfixed_table_alloc(order)), n(order) {}
    ~GL() { gsl_integration_glfixed_table_free(tab); }
    GL(const GL&) = delete;
    GL& operator=(const GL&) = delete;
    // integral over [a,b] of f
    template <class F>
    double integrate(double a, double b, F&& f) const {
        double acc = 0.0, xi = 0.0, wi = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            gsl_integration_glfixed_point(a, b, i, &xi, &wi, tab);
            acc += wi * f(xi);
        }
        return acc;
    }
    gsl_integration_glfixed_table* tab;
    std::size_t n;
};

double mc_se(const std::vector<double>& vals, double mean) {
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    long n = static_cast<long>(vals.size());
    return std::sqrt(ss / (n - 1.0) / n);
}

}  // namespace

// ---------------------------------------------------------------------------
// proximal

void ProximalParams::validate() const {
    if (cu == 0.0 || bu == 0.0)
        throw std::invalid_argument("proximal: bu and cu must be nonzero");
    if (sz <= 0.0 || sw <= 0.0 || sy <= 0.0)
        throw std::invalid_argument("proximal: noise scales must be positive");
    // worst-case propensity over u in {0,1}, l in [-1,1]
    double lo = a0 - std::abs(al) + std::min(0.0, au);
    double hi = a0 + std::abs(al) + std::max(0.0, au);
    if (expit(lo) < propensity_floor || expit(hi) > 1.0 - propensity_floor)
        throw std::invalid_argument("proximal: propensity outside floor bounds");
}

GenOutput gen_proximal(const ProximalParams& params, long n,
                       std::uint64_t seed) {
    params.validate();
    if (n < 1) throw std::invalid_argument("gen_proximal: n must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::bernoulli_distribution coin;

    Dataset ds;
    ds.w.resize(n, 3);
    ds.z.resize(n, 3);
    ds.x.resize(n);
    ds.s.resize(n);
    ds.r = Eigen::VectorXd::Ones(n);
    for (long i = 0; i < n; ++i) {
        double l = unif(rng);
        double u = std::bernoulli_distribution(expit(params.u0 + params.ul * l))(rng)
                       ? 1.0
                       : 0.0;
        double zp = params.bu * u + params.bl * l + params.sz * trunc_normal(rng);
        double wp = params.cu * u + params.cl * l + params.sw * trunc_normal(rng);
        double a =
            std::bernoulli_distribution(expit(params.a0 + params.au * u + params.al * l))(rng)
                ? 1.0
                : 0.0;
        double y = params.ta * a + params.tu * u + params.tl * l +
                   params.sy * trunc_normal(rng);
        ds.w.row(i) << a, l, wp;
        ds.z.row(i) << a, l, zp;
        ds.x(i) = a;
        ds.s(i) = y;
    }

    bool treated_only = params.weight == ProximalParams::Weight::treated;
    MomentSpec mspec;
    mspec.m_terms = [](const Dataset& d, long i) {
        return std::vector<MomentTerm>{{d.s(i), d.z.row(i).transpose()}};
    };
    mspec.mt_terms = [treated_only](const Dataset& d, long i) {
        Eigen::VectorXd p1 = d.w.row(i).transpose();
        p1(0) = 1.0;
        std::vector<MomentTerm> terms{{1.0, p1}};
        if (!treated_only) {
            Eigen::VectorXd p0 = d.w.row(i).transpose();
            p0(0) = 0.0;
            terms.push_back({-1.0, p0});
        }
        return terms;
    };
    if (treated_only)
        mspec.x0_membership = [](double x) { return x > 0.5 ? 1.0 : 0.0; };
    return {std::move(ds), std::move(mspec)};
}

NuisanceFn proximal_h0(const ProximalParams& params) {
    double d2 = params.tu / params.cu;
    double ta = params.ta, cl2 = params.tl - d2 * params.cl;
    return [ta, cl2, d2](const Eigen::VectorXd& w, double /*x*/) {
        return ta * w(0) + cl2 * w(1) + d2 * w(2);
    };
}

NuisanceFn proximal_g0(const ProximalParams& params) {
    ProximalParams p = params;
    bool treated_only = p.weight == ProximalParams::Weight::treated;
    return [p, treated_only](const Eigen::VectorXd& z, double /*x*/) {
        double a = z(0), l = z(1), zp = z(2);
        double pi = treated_only ? a : 2.0 * a - 1.0;
        if (pi == 0.0) return 0.0;
        // D_u = pi / P(A=a | U=u, L=l); E[g | u,l] must equal D_u for u=0,1
        auto prop = [&](double u) {
            double p1 = expit(p.a0 + p.au * u + p.al * l);
            return a > 0.5 ? p1 : 1.0 - p1;
        };
        double d_0 = pi / prop(0.0), d_1 = pi / prop(1.0);
        double c2 = (d_1 - d_0) / p.bu;
        double c1 = d_0 - c2 * p.bl * l;
        return c1 + c2 * zp;
    };
}

OracleTheta oracle_theta(const ProximalParams& params, OracleMethod method,
                         long n_mc, std::uint64_t seed) {
    params.validate();
    if (method == OracleMethod::closed_form) {
        if (params.weight == ProximalParams::Weight::ate)
            return {params.ta, 0.0};  // ATE: Y(1)-Y(0) = ta exactly
        // E[Y(1)] = ta + tu E[U] + tl E[L], E[L] = 0
        GL gl(64);
        double eu = gl.integrate(-1.0, 1.0, [&](double l) {
            return 0.5 * expit(params.u0 + params.ul * l);
        });
        return {params.ta + params.tu * eu, 0.0};
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<double> vals(n_mc);
    for (long i = 0; i < n_mc; ++i) {
        double l = unif(rng);
        double u = std::bernoulli_distribution(expit(params.u0 + params.ul * l))(rng)
                       ? 1.0
                       : 0.0;
        double ey = params.sy * trunc_normal(rng);
        double y1 = params.ta + params.tu * u + params.tl * l + ey;
        double y0 = params.tu * u + params.tl * l + ey;
        vals[i] = params.weight == ProximalParams::Weight::ate ? y1 - y0 : y1;
    }
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= n_mc;
    return {mean, mc_se(vals, mean)};
}

// ---------------------------------------------------------------------------
// policy shift

void PolicyShiftParams::validate() const {
    if (!(d > c)) throw std::invalid_argument("policy: need d > c");
    if (delta <= 0.0 || eps <= 0.0)
        throw std::invalid_argument("policy: delta and eps must be positive");
    if (!(d - delta - eps > c))
        throw std::invalid_argument("policy: need d - delta - eps > c");
    if (cu == 0.0 || bu == 0.0)
        throw std::invalid_argument("policy: bu and cu must be nonzero");
    if (sz <= 0.0 || sw <= 0.0 || sy <= 0.0 || sa <= 0.0)
        throw std::invalid_argument("policy: noise scales must be positive");
}

double policy_q(const PolicyShiftParams& params, double a) {
    if (a < params.c || a > params.d)
        throw std::invalid_argument("policy_q: a outside [c,d]");
    if (a < params.d - params.delta - params.eps) return a + params.delta;
    return a + params.delta * (params.d - a) / (params.delta + params.eps);
}

GenOutput gen_policy_shift(const PolicyShiftParams& params, long n,
                           std::uint64_t seed) {
    params.validate();
    if (n < 1) throw std::invalid_argument("gen_policy_shift: n must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);

    Dataset ds;
    ds.w.resize(n, 3);
    ds.z.resize(n, 3);
    ds.x.resize(n);
    ds.s.resize(n);
    ds.r = Eigen::VectorXd::Ones(n);
    for (long i = 0; i < n; ++i) {
        double l = unif(rng);
        double u = std::bernoulli_distribution(expit(params.u0 + params.ul * l))(rng)
                       ? 1.0
                       : 0.0;
        double zp = params.bu * u + params.bl * l + params.sz * trunc_normal(rng);
        double wp = params.cu * u + params.cl * l + params.sw * trunc_normal(rng);
        double a = trunc_normal_in(rng, params.am + params.au * u + params.al * l,
                                   params.sa, params.c, params.d);
        double y = params.ta * a + params.tu * u + params.tl * l +
                   params.sy * trunc_normal(rng);
        ds.w.row(i) << a, l, wp;
        ds.z.row(i) << a, l, zp;
        ds.x(i) = a;
        ds.s(i) = y;
    }

    PolicyShiftParams p = params;
    MomentSpec mspec;
    mspec.m_terms = [](const Dataset& d, long i) {
        return std::vector<MomentTerm>{{d.s(i), d.z.row(i).transpose()}};
    };
    mspec.mt_terms = [p](const Dataset& d, long i) {
        Eigen::VectorXd pt = d.w.row(i).transpose();
        pt(0) = policy_q(p, pt(0));
        return std::vector<MomentTerm>{{1.0, pt}};
    };
    double lo = p.c + p.delta, hi = p.d;
    mspec.x0_membership = [lo, hi](double x) {
        return (x >= lo && x <= hi) ? 1.0 : 0.0;
    };
    return {std::move(ds), std::move(mspec)};
}

NuisanceFn policy_h0(const PolicyShiftParams& params) {
    double d2 = params.tu / params.cu;
    double ta = params.ta, cl2 = params.tl - d2 * params.cl;
    return [ta, cl2, d2](const Eigen::VectorXd& w, double /*x*/) {
        return ta * w(0) + cl2 * w(1) + d2 * w(2);
    };
}

OracleTheta oracle_theta(const PolicyShiftParams& params, OracleMethod method,
                         long n_mc, std::uint64_t seed) {
    params.validate();
    if (method == OracleMethod::closed_form) {
        // theta = ta E[q(A)] + tu E[U] + tl E[L]; E[L] = 0.  Both inner
        // expectations are 1-d integrals given (u,l).
        GL gl_l(64), gl_a(128);
        auto inner = [&](double u, double l) {
            double mu = params.am + params.au * u + params.al * l;
            return gl_a.integrate(params.c, params.d, [&](double a) {
                return policy_q(params, a) *
                       trunc_density(a, mu, params.sa, params.c, params.d);
            });
        };
        double acc = gl_l.integrate(-1.0, 1.0, [&](double l) {
            double pu = expit(params.u0 + params.ul * l);
            double eq = pu * inner(1.0, l) + (1.0 - pu) * inner(0.0, l);
            return 0.5 * (params.ta * eq + params.tu * pu);
        });
        return {acc, 0.0};
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<double> vals(n_mc);
    for (long i = 0; i < n_mc; ++i) {
        double l = unif(rng);
        double u = std::bernoulli_distribution(expit(params.u0 + params.ul * l))(rng)
                       ? 1.0
                       : 0.0;
        double a = trunc_normal_in(rng, params.am + params.au * u + params.al * l,
                                   params.sa, params.c, params.d);
        vals[i] = params.ta * policy_q(params, a) + params.tu * u +
                  params.tl * l + params.sy * trunc_normal(rng);
    }
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= n_mc;
    return {mean, mc_se(vals, mean)};
}

MBoundReport verify_m_bound(const PolicyShiftParams& params, long sample_size,
                            int draws, std::uint64_t seed) {
    params.validate();
    GenOutput gen = gen_policy_shift(params, sample_size, seed);
    const Dataset& ds = gen.data;

    // reference bound: sup over (a', u, l) of the conditional density ratio
    // f_{q(A)}(a'|u,l) / f_A(a'|u,l) on the image [c+delta, d], via the
    // piecewise-linear inverse of q
    double knee = params.d - params.eps;  // q(d-delta-eps) = d-eps
    auto qinv = [&](double ap, double& slope) {
        if (ap < knee) {
            slope = 1.0;
            return ap - params.delta;
        }
        slope = (params.delta + params.eps) / params.eps;
        return (ap - params.delta * params.d / (params.delta + params.eps)) *
               slope;
    };
    double b0 = 0.0;
    for (double u : {0.0, 1.0}) {
        for (int il = 0; il <= 40; ++il) {
            double l = -1.0 + 2.0 * il / 40.0;
            double mu = params.am + params.au * u + params.al * l;
            for (int ia = 0; ia <= 400; ++ia) {
                double ap = params.c + params.delta +
                            (params.d - params.c - params.delta) * ia / 400.0;
                double slope = 1.0;
                double a = qinv(ap, slope);
                double num = trunc_density(a, mu, params.sa, params.c, params.d) * slope;
                double den = trunc_density(ap, mu, params.sa, params.c, params.d);
                if (den > 0.0) b0 = std::max(b0, num / den);
            }
        }
    }

    // random unit-norm RKHS draws on the W-space, ratio of empirical L2 norms
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> nd(0.0, 1.0);
    KernelSpec kern;
    kern.family = KernelFamily::gaussian;
    kern.bandwidth = 0.8;
    kern.dimension = 3;
    MBoundReport rep;
    rep.b2_ref = std::sqrt(b0);
    int n_sup = 25;
    for (int t = 0; t < draws; ++t) {
        RepresenterFunction f;
        f.kernel = kern;
        f.support_points.resize(n_sup, 3);
        f.coefficients.resize(n_sup);
        std::uniform_int_distribution<long> pick(0, ds.n() - 1);
        for (int j = 0; j < n_sup; ++j) {
            f.support_points.row(j) = ds.w.row(pick(rng));
            f.coefficients(j) = nd(rng);
        }
        double nrm = rkhs_norm(f);
        if (nrm <= 0.0) continue;
        f.coefficients /= nrm;
        double num = 0.0, den = 0.0;
        for (long i = 0; i < ds.n(); ++i) {
            Eigen::VectorXd shifted = ds.w.row(i).transpose();
            shifted(0) = policy_q(params, shifted(0));
            double mv = f.evaluate(shifted);
            num += mv * mv;
            double hv = gen.mspec.i0(ds.x(i)) * f.evaluate(ds.w.row(i).transpose());
            den += hv * hv;
        }
        if (den <= 0.0) continue;
        rep.b2_hat = std::max(rep.b2_hat, std::sqrt(num / den));
    }
    // allow Monte-Carlo slack on both sides of the ratio
    rep.pass = std::isfinite(rep.b2_hat) && rep.b2_hat > 0.0 &&
               rep.b2_hat <= rep.b2_ref * 1.15;
    return rep;
}

// ---------------------------------------------------------------------------
// MNAR shadow variable

void MnarParams::validate() const {
    if (sz <= 0.0 || sy <= 0.0)
        throw std::invalid_argument("mnar: noise scales must be positive");
    if (force_always_observed) return;
    // crude range bound on the missingness index over the (truncated) support
    double ymax = std::abs(y0) + std::abs(yx) +
                  std::abs(yz) * (std::abs(zx) + 4.0 * sz) + 4.0 * sy;
    double lo = d0 - std::abs(dx) - std::abs(dy) * ymax;
    double hi = d0 + std::abs(dx) + std::abs(dy) * ymax;
    if (expit(lo) <= prob_floor || expit(hi) >= 1.0)
        throw std::invalid_argument("mnar: observation probability outside (floor, 1)");
}

namespace {

struct MnarDraw {
    double x, zp, y, delta;
};

MnarDraw draw_mnar(const MnarParams& p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    MnarDraw d;
    d.x = unif(rng);
    d.zp = p.zx * d.x + p.sz * trunc_normal(rng);
    d.y = p.y0 + p.yx * d.x + p.yz * d.zp + p.sy * trunc_normal(rng);
    d.delta = p.force_always_observed
                  ? 1.0
                  : (std::bernoulli_distribution(
                         expit(p.d0 + p.dx * d.x + p.dy * d.y))(rng)
                         ? 1.0
                         : 0.0);
    return d;
}

}  // namespace

GenOutput gen_mnar_shadow(const MnarParams& params, long n,
                          std::uint64_t seed) {
    params.validate();
    if (n < 1) throw std::invalid_argument("gen_mnar_shadow: n must be positive");
    std::mt19937_64 rng(seed);

    Dataset ds;
    ds.w.resize(n, 2);
    ds.z.resize(n, 2);
    ds.x.resize(n);
    ds.s.resize(n);
    ds.r.resize(n);
    for (long i = 0; i < n; ++i) {
        MnarDraw d = draw_mnar(params, rng);
        double dy = d.delta * d.y;  // observed outcome only
        ds.w.row(i) << d.x, dy;
        ds.z.row(i) << d.x, d.zp;
        ds.x(i) = 0.0;
        ds.s(i) = 1.0 - d.delta;
        ds.r(i) = d.delta;
    }

    MomentSpec mspec;
    // m(o;g) = (1 - delta) g(x, z'); m~(o;h) = delta * pi(x, y) h(x, y) with
    // pi(x,y) = y, y available exactly when delta = 1
    mspec.m_terms = [](const Dataset& d, long i) {
        std::vector<MomentTerm> terms;
        if (d.s(i) > 0.5) terms.push_back({1.0, d.z.row(i).transpose()});
        return terms;
    };
    mspec.mt_terms = [](const Dataset& d, long i) {
        std::vector<MomentTerm> terms;
        if (d.r(i) > 0.5) terms.push_back({d.w(i, 1), d.w.row(i).transpose()});
        return terms;
    };
    return {std::move(ds), std::move(mspec)};
}

OracleTheta oracle_theta(const MnarParams& params, OracleMethod method,
                         long n_mc, std::uint64_t seed) {
    params.validate();
    if (params.force_always_observed &&
        method == OracleMethod::closed_form)
        return {0.0, 0.0};  // no nonrespondents
    if (method == OracleMethod::closed_form)
        throw std::invalid_argument(
            "mnar: closed_form oracle unavailable; use full_data_mc");
    std::mt19937_64 rng(seed);
    std::vector<double> vals(n_mc);
    for (long i = 0; i < n_mc; ++i) {
        MnarDraw d = draw_mnar(params, rng);
        vals[i] = (1.0 - d.delta) * d.y;
    }
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= n_mc;
    return {mean, mc_se(vals, mean)};
}

}  // namespace kadv
