#pragma once
// Kernel functions, Gram matrices, RKHS norms, and the critical-radius
// formulas used by the tuning rule.

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>

namespace kadv {

enum class KernelFamily { gaussian, sobolev_matern, polynomial, discrete_delta };

struct KernelSpec {
    KernelFamily family = KernelFamily::gaussian;
    double bandwidth = 1.0;     // length scale (gaussian, matern, polynomial)
    double nu = 1.5;            // matern smoothness, nu = (l+d)/2
    int degree = 2;             // polynomial degree
    int dimension = 1;          // input dimension d
    double radius_constant = 1.0;  // multiplicative constant C in delta_n

    // k = sup_v sqrt(K(v,v)); finite for the bounded families.  For the
    // polynomial family it is taken over the unit ball (compact supports).
    double sup_k() const;

    double eval(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

    void validate() const;  // throws std::invalid_argument on bad parameters

    static KernelFamily family_from_string(const std::string& s);
    static std::string family_to_string(KernelFamily f);
};

// Symmetric PSD matrix of pairwise kernel values; points are rows.
Eigen::MatrixXd gram(const KernelSpec& kernel, const Eigen::MatrixXd& points);

// Rectangular cross-Gram: entry (i,j) = K(a_i, b_j).
Eigen::MatrixXd cross_gram(const KernelSpec& kernel, const Eigen::MatrixXd& a,
                           const Eigen::MatrixXd& b);

// f(x) = sum_i coefficients_i K(support_points_i, x), then multiplied by the
// structural-zero mask evaluated at the X-tag when one is attached.
struct RepresenterFunction {
    Eigen::MatrixXd support_points;  // rows
    Eigen::VectorXd coefficients;
    KernelSpec kernel;
    std::function<double(double)> offset_mask;  // x-tag -> {0,1}; null = all 1

    double evaluate(const Eigen::VectorXd& point) const;  // unmasked
    double evaluate(const Eigen::VectorXd& point, double x_value) const;
};

// sqrt(gamma' K gamma); clamps tiny negative quadratic forms to 0.
double rkhs_norm(const RepresenterFunction& f);

// Critical radius delta_n.  Gaussian: C*sqrt(log n_eff / n_eff); Sobolev /
// Matern of smoothness nu, dimension d: C*n_eff^{-nu/(2nu+d)}.  When mu0 is
// given (structural zeros with P(X in X0) = mu0), n_eff = floor(n*mu0/2).
double critical_radius(const KernelSpec& kernel, long n,
                       std::optional<double> mu0 = std::nullopt);

}  // namespace kadv
