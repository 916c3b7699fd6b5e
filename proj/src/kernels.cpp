#include "kadv/kernels.hpp"

#include <gsl/gsl_sf_bessel.h>
#include <gsl/gsl_sf_gamma.h>

#include <cmath>
#include <stdexcept>

#include "kadv/simd.hpp"

namespace kadv {

void KernelSpec::validate() const {
    if (bandwidth <= 0.0) throw std::invalid_argument("kernel bandwidth <= 0");
    if (family == KernelFamily::sobolev_matern && nu <= 0.0)
        throw std::invalid_argument("matern nu <= 0");
    if (family == KernelFamily::polynomial && degree < 1)
        throw std::invalid_argument("polynomial degree < 1");
    if (dimension < 1) throw std::invalid_argument("kernel dimension < 1");
    if (radius_constant <= 0.0)
        throw std::invalid_argument("radius_constant <= 0");
}

double KernelSpec::sup_k() const {
    switch (family) {
        case KernelFamily::gaussian:
        case KernelFamily::sobolev_matern:
        case KernelFamily::discrete_delta:
            return 1.0;
        case KernelFamily::polynomial:
            // sup over ||v|| <= 1 of (1 + v.v/s^2)^{deg/2}
            return std::pow(1.0 + 1.0 / (bandwidth * bandwidth),
                            0.5 * degree);
    }
    return 1.0;
}

namespace {

double matern(double r, double length, double nu) {
    if (r <= 0.0) return 1.0;
    const double z = std::sqrt(2.0 * nu) * r / length;
    // Closed forms for the common half-integer orders, Bessel-K otherwise.
    if (nu == 0.5) return std::exp(-z);
    if (nu == 1.5) return (1.0 + z) * std::exp(-z);
    if (nu == 2.5) return (1.0 + z + z * z / 3.0) * std::exp(-z);
    const double c = std::pow(2.0, 1.0 - nu) / gsl_sf_gamma(nu);
    return c * std::pow(z, nu) * gsl_sf_bessel_Knu(nu, z);
}

}  // namespace

double KernelSpec::eval(const Eigen::VectorXd& a,
                        const Eigen::VectorXd& b) const {
    switch (family) {
        case KernelFamily::gaussian: {
            const double d2 = simd::sqdist(a.data(), b.data(), a.size());
            return std::exp(-d2 / (2.0 * bandwidth * bandwidth));
        }
        case KernelFamily::sobolev_matern: {
            const double d2 = simd::sqdist(a.data(), b.data(), a.size());
            return matern(std::sqrt(d2), bandwidth, nu);
        }
        case KernelFamily::polynomial: {
            const double ip = simd::dot(a.data(), b.data(), a.size());
            return std::pow(1.0 + ip / (bandwidth * bandwidth), degree);
        }
        case KernelFamily::discrete_delta:
            return simd::sqdist(a.data(), b.data(), a.size()) == 0.0 ? 1.0
                                                                     : 0.0;
    }
    return 0.0;
}

KernelFamily KernelSpec::family_from_string(const std::string& s) {
    if (s == "gaussian") return KernelFamily::gaussian;
    if (s == "sobolev_matern") return KernelFamily::sobolev_matern;
    if (s == "polynomial") return KernelFamily::polynomial;
    if (s == "discrete_delta") return KernelFamily::discrete_delta;
    throw std::invalid_argument("unknown kernel family: " + s);
}

std::string KernelSpec::family_to_string(KernelFamily f) {
    switch (f) {
        case KernelFamily::gaussian: return "gaussian";
        case KernelFamily::sobolev_matern: return "sobolev_matern";
        case KernelFamily::polynomial: return "polynomial";
        case KernelFamily::discrete_delta: return "discrete_delta";
    }
    return "?";
}

Eigen::MatrixXd gram(const KernelSpec& kernel, const Eigen::MatrixXd& points) {
    kernel.validate();
    if (points.rows() == 0) throw std::invalid_argument("gram: empty point set");
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd pi = points.row(i);
        for (Eigen::Index j = 0; j <= i; ++j) {
            const Eigen::VectorXd pj = points.row(j);
            const double v = kernel.eval(pi, pj);
            if (!std::isfinite(v))
                throw std::runtime_error("gram: non-finite kernel value");
            g(i, j) = g(j, i) = v;
        }
    }
    return g;
}

Eigen::MatrixXd cross_gram(const KernelSpec& kernel, const Eigen::MatrixXd& a,
                           const Eigen::MatrixXd& b) {
    kernel.validate();
    Eigen::MatrixXd g(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const Eigen::VectorXd pi = a.row(i);
        for (Eigen::Index j = 0; j < b.rows(); ++j)
            g(i, j) = kernel.eval(pi, b.row(j));
    }
    return g;
}

double RepresenterFunction::evaluate(const Eigen::VectorXd& point) const {
    const Eigen::Index n = support_points.rows();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        acc += coefficients[i] * kernel.eval(support_points.row(i), point);
    return acc;
}

double RepresenterFunction::evaluate(const Eigen::VectorXd& point,
                                     double x_value) const {
    const double mask = offset_mask ? offset_mask(x_value) : 1.0;
    if (mask == 0.0) return 0.0;  // exact structural zero
    return mask * evaluate(point);
}

double rkhs_norm(const RepresenterFunction& f) {
    if (f.coefficients.size() == 0) return 0.0;
    const Eigen::MatrixXd k = gram(f.kernel, f.support_points);
    const double q = f.coefficients.dot(k * f.coefficients);
    return std::sqrt(std::max(q, 0.0));
}

double critical_radius(const KernelSpec& kernel, long n,
                       std::optional<double> mu0) {
    kernel.validate();
    if (n < 3) throw std::invalid_argument("critical_radius: n < 3");
    long n_eff = n;
    if (mu0) {
        if (*mu0 <= 0.0 || *mu0 > 1.0)
            throw std::invalid_argument("critical_radius: mu0 out of (0,1]");
        n_eff = static_cast<long>(std::floor(static_cast<double>(n) * *mu0 / 2.0));
    }
    if (n_eff < 3) throw std::invalid_argument("critical_radius: n_eff < 3");
    const double ne = static_cast<double>(n_eff);
    const double c = kernel.radius_constant;
    switch (kernel.family) {
        case KernelFamily::gaussian:
        case KernelFamily::discrete_delta:
            return c * std::sqrt(std::log(ne) / ne);
        case KernelFamily::sobolev_matern:
            return c * std::pow(ne, -kernel.nu /
                                        (2.0 * kernel.nu + kernel.dimension));
        case KernelFamily::polynomial:
            // finite-dimensional class: parametric radius
            return c * std::sqrt(1.0 / ne);
    }
    return c * std::sqrt(std::log(ne) / ne);
}

}  // namespace kadv
