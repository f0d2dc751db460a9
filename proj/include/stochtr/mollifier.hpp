#pragma once

#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "stochtr/core.hpp"

namespace stochtr {

/// Even, nonnegative, unit-mass kernel supported in the closed unit ball.
///
/// The base profile is theta(w) = c_d (1 - |w|^2)^4 on B_1. Anisotropic
/// variants are theta_A(z) = det(A) theta(A z) with A symmetric positive
/// definite and smallest eigenvalue >= 1, which keeps the support inside B_1.
class Kernel {
public:
    static Kernel isotropic(int dim);
    /// Throws ConfigError unless A is symmetric with eigenvalues >= 1.
    static Kernel anisotropic(int dim, const Mat2& A);
    /// A = I + (aspect - 1) n n^T: compressed by `aspect` along the unit vector n.
    static Kernel aligned(int dim, const Vec2& n, double aspect);

    int dim() const { return dim_; }
    bool is_isotropic() const { return isotropic_; }
    const Mat2& matrix() const { return A_; }
    const Mat2& inverse() const { return Ainv_; }
    double det() const { return det_; }
    /// c_d such that the base profile has unit mass.
    double normalization() const { return c_; }

    double value(const Vec2& z) const;
    std::pair<double, Vec2> value_and_grad(const Vec2& z) const;

    /// theta_eps(z) = eps^-d theta(z / eps) and its gradient.
    double value_eps(const Vec2& z, double eps) const;
    Vec2 grad_eps(const Vec2& z, double eps) const;

    nlohmann::json descriptor() const;
    static Kernel from_descriptor(const nlohmann::json& j);

private:
    Kernel() = default;
    int dim_ = 1;
    bool isotropic_ = true;
    Mat2 A_{1, 0, 0, 1};
    Mat2 Ainv_{1, 0, 0, 1};
    double det_ = 1.0;
    double c_ = 1.0;
};

/// Base-profile normalization constants: 315/256 (d = 1), 5/pi (d = 2).
double bump_normalization(int dim);

std::pair<double, Vec2> eval_and_grad(const Kernel& kernel, const Vec2& z);

/// Midpoint-quadrature value of the unit mass, for invariant checks.
double kernel_mass(const Kernel& kernel);

/// I(theta) = int |z| |grad theta(z)| dz.
double i_functional(const Kernel& kernel);

/// Lambda(M, theta) = int |<M z, grad theta(z)>| dz.
double lambda_functional(const Mat2& M, const Kernel& kernel);

struct RankOneSearch {
    Kernel kernel;
    double lambda;
    double aspect;
};

/// Aspect-ratio ladder growth factor used by minimize_lambda_rank_one.
inline constexpr double kAspectLadderRatio = 1.4142135623730951;

/// Searches theta_A over aspect ratios sqrt(2)^k, k < budget, with A aligned to
/// the part of zeta orthogonal to eta. The ladder is nested, so the result is
/// monotone in budget. Ties resolve to the smaller aspect ratio.
RankOneSearch minimize_lambda_rank_one(const Vec2& eta, const Vec2& zeta, int budget);

inline Mat2 outer(const Vec2& a, const Vec2& b) { return {a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]}; }

/// Averaged auxiliary kernel rho_eps = (theta_eps + rho'_eps / omega_d) / 2 with
/// rho'_eps(z) = (1/eps) int_0^eps t^-d 1{|z| <= t} dt. The omega_d (unit-ball
/// volume) factor gives rho' unit mass.
class AuxKernelRho {
public:
    AuxKernelRho(Kernel theta, double eps);

    double eps() const { return eps_; }
    const Kernel& theta() const { return theta_; }
    /// Normalized rho'_eps as a function of r = |z|; +inf at r = 0.
    double rho_prime(double r) const;
    double value(const Vec2& z) const;

private:
    Kernel theta_;
    double eps_;
};

}  // namespace stochtr
