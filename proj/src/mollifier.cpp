#include "stochtr/mollifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace stochtr {

namespace {

constexpr int kQuad1d = 20000;  // midpoint cells on [-1, 1]
constexpr int kQuad2d = 400;    // midpoint cells per axis on [-1, 1]^2

double unit_ball_volume(int dim) { return dim == 1 ? 2.0 : kPi; }

Vec2 apply(const Mat2& M, const Vec2& v, int dim) {
    if (dim == 1) return {M[0] * v[0], 0.0};
    return {M[0] * v[0] + M[1] * v[1], M[2] * v[0] + M[3] * v[1]};
}

Mat2 matmul(const Mat2& a, const Mat2& b) {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

// Base profile in w-space: theta(w) and grad theta(w).
std::pair<double, Vec2> base_profile(const Vec2& w, int dim, double c) {
    const double r2 = dim == 1 ? w[0] * w[0] : w[0] * w[0] + w[1] * w[1];
    if (r2 >= 1.0) return {0.0, {0.0, 0.0}};
    const double s = 1.0 - r2;
    const double s3 = s * s * s;
    const double g = -8.0 * c * s3;
    return {c * s3 * s, {g * w[0], dim == 1 ? 0.0 : g * w[1]}};
}

// Midpoint nodes of the base profile's support with precomputed gradients.
struct ProfileQuadrature {
    std::vector<Vec2> w;
    std::vector<Vec2> grad;
    std::vector<double> value;
    double cell = 0.0;
};

ProfileQuadrature build_quadrature(int dim) {
    ProfileQuadrature q;
    const double c = bump_normalization(dim);
    const int n = dim == 1 ? kQuad1d : kQuad2d;
    const double h = 2.0 / n;
    q.cell = dim == 1 ? h : h * h;
    const int ny = dim == 1 ? 1 : n;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < n; ++i) {
            const Vec2 w{-1.0 + (i + 0.5) * h, dim == 1 ? 0.0 : -1.0 + (j + 0.5) * h};
            auto [v, g] = base_profile(w, dim, c);
            if (v <= 0.0) continue;
            q.w.push_back(w);
            q.grad.push_back(g);
            q.value.push_back(v);
        }
    }
    return q;
}

const ProfileQuadrature& quadrature(int dim) {
    static const ProfileQuadrature q1 = build_quadrature(1);
    static const ProfileQuadrature q2 = build_quadrature(2);
    return dim == 1 ? q1 : q2;
}

double min_eigenvalue_sym(const Mat2& A, int dim) {
    if (dim == 1) return A[0];
    const double m = 0.5 * (A[0] + A[3]);
    const double d = std::hypot(0.5 * (A[0] - A[3]), A[1]);
    return m - d;
}

}  // namespace

double bump_normalization(int dim) {
    // int_{-1}^{1} (1-z^2)^4 dz = 256/315; 2 pi int_0^1 r (1-r^2)^4 dr = pi/5.
    return dim == 1 ? 315.0 / 256.0 : 5.0 / kPi;
}

Kernel Kernel::isotropic(int dim) {
    if (dim != 1 && dim != 2) throw ConfigError("kernel dim must be 1 or 2");
    Kernel k;
    k.dim_ = dim;
    k.c_ = bump_normalization(dim);
    return k;
}

Kernel Kernel::anisotropic(int dim, const Mat2& A) {
    Kernel k = isotropic(dim);
    if (dim == 2 && std::abs(A[1] - A[2]) > 1e-12 * std::max(1.0, std::abs(A[1])))
        throw ConfigError("kernel matrix must be symmetric");
    if (min_eigenvalue_sym(A, dim) < 1.0 - 1e-12)
        throw ConfigError("kernel matrix must have smallest eigenvalue >= 1");
    k.A_ = dim == 1 ? Mat2{A[0], 0, 0, 1} : A;
    k.det_ = dim == 1 ? A[0] : A[0] * A[3] - A[1] * A[2];
    if (dim == 1) {
        k.Ainv_ = {1.0 / A[0], 0, 0, 1};
    } else {
        k.Ainv_ = {A[3] / k.det_, -A[1] / k.det_, -A[2] / k.det_, A[0] / k.det_};
    }
    k.isotropic_ = std::abs(k.A_[0] - 1.0) < 1e-15 && std::abs(k.A_[3] - 1.0) < 1e-15 &&
                   k.A_[1] == 0.0 && k.A_[2] == 0.0;
    return k;
}

Kernel Kernel::aligned(int dim, const Vec2& n, double aspect) {
    if (aspect < 1.0) throw ConfigError("aspect ratio must be >= 1");
    if (dim == 1) return anisotropic(1, {aspect, 0, 0, 1});
    const double len = std::hypot(n[0], n[1]);
    if (len == 0.0) throw ConfigError("alignment direction must be nonzero");
    const double u = n[0] / len, v = n[1] / len;
    const double a1 = aspect - 1.0;
    return anisotropic(2, {1.0 + a1 * u * u, a1 * u * v, a1 * u * v, 1.0 + a1 * v * v});
}

double Kernel::value(const Vec2& z) const {
    return det_ * base_profile(apply(A_, z, dim_), dim_, c_).first;
}

std::pair<double, Vec2> Kernel::value_and_grad(const Vec2& z) const {
    auto [v, g] = base_profile(apply(A_, z, dim_), dim_, c_);
    // grad_z theta(A z) = A^T grad theta(A z); A is symmetric.
    const Vec2 gz = apply(A_, g, dim_);
    return {det_ * v, {det_ * gz[0], det_ * gz[1]}};
}

double Kernel::value_eps(const Vec2& z, double eps) const {
    const double s = dim_ == 1 ? 1.0 / eps : 1.0 / (eps * eps);
    return s * value({z[0] / eps, z[1] / eps});
}

Vec2 Kernel::grad_eps(const Vec2& z, double eps) const {
    const double s = dim_ == 1 ? 1.0 / (eps * eps) : 1.0 / (eps * eps * eps);
    const Vec2 g = value_and_grad({z[0] / eps, z[1] / eps}).second;
    return {s * g[0], s * g[1]};
}

nlohmann::json Kernel::descriptor() const {
    nlohmann::json j;
    j["dim"] = dim_;
    j["shape"] = isotropic_ ? "isotropic-bump" : "anisotropic";
    if (dim_ == 1)
        j["A"] = {A_[0]};
    else
        j["A"] = {A_[0], A_[1], A_[2], A_[3]};
    j["normalization"] = c_;
    return j;
}

Kernel Kernel::from_descriptor(const nlohmann::json& j) {
    const int dim = j.at("dim").get<int>();
    const auto a = j.at("A").get<std::vector<double>>();
    if (dim == 1) {
        if (a.size() != 1) throw ConfigError("1D kernel descriptor needs one matrix entry");
        return anisotropic(1, {a[0], 0, 0, 1});
    }
    if (a.size() != 4) throw ConfigError("2D kernel descriptor needs four matrix entries");
    return anisotropic(2, {a[0], a[1], a[2], a[3]});
}

std::pair<double, Vec2> eval_and_grad(const Kernel& kernel, const Vec2& z) { return kernel.value_and_grad(z); }

double kernel_mass(const Kernel& kernel) {
    // Change of variables w = A z: int det(A) theta(A z) dz = int theta(w) dw.
    const auto& q = quadrature(kernel.dim());
    double s = 0.0;
    for (double v : q.value) s += v;
    return s * q.cell;
}

double i_functional(const Kernel& kernel) {
    // With w = A z: I = int |A^-1 w| |A grad theta(w)| dw.
    const auto& q = quadrature(kernel.dim());
    const int d = kernel.dim();
    double s = 0.0;
    for (std::size_t i = 0; i < q.w.size(); ++i) {
        const Vec2 z = apply(kernel.inverse(), q.w[i], d);
        const Vec2 g = apply(kernel.matrix(), q.grad[i], d);
        s += norm(z, d) * norm(g, d);
    }
    return s * q.cell;
}

double lambda_functional(const Mat2& M, const Kernel& kernel) {
    // With w = A z: Lambda = int |<M A^-1 w, A grad theta(w)>| dw
    //                      = int |<A M A^-1 w, grad theta(w)>| dw.
    const auto& q = quadrature(kernel.dim());
    const int d = kernel.dim();
    const Mat2 B = d == 1 ? Mat2{M[0], 0, 0, 0} : matmul(matmul(kernel.matrix(), M), kernel.inverse());
    double s = 0.0;
    for (std::size_t i = 0; i < q.w.size(); ++i) s += std::abs(dot(apply(B, q.w[i], d), q.grad[i], d));
    return s * q.cell;
}

RankOneSearch minimize_lambda_rank_one(const Vec2& eta, const Vec2& zeta, int budget) {
    if (budget < 1) throw ConfigError("budget must be >= 1");
    const Mat2 M = outer(eta, zeta);
    // Compressing along n (the part of zeta orthogonal to eta) scales the
    // orthogonal part of the rank-one matrix by 1/aspect and fixes eta.
    const double ee = eta[0] * eta[0] + eta[1] * eta[1];
    Vec2 n = zeta;
    if (ee > 0.0) {
        const double p = (eta[0] * zeta[0] + eta[1] * zeta[1]) / ee;
        n = {zeta[0] - p * eta[0], zeta[1] - p * eta[1]};
    }
    if (std::hypot(n[0], n[1]) < 1e-12) n = std::hypot(zeta[0], zeta[1]) > 0 ? zeta : Vec2{1.0, 0.0};

    RankOneSearch best{Kernel::isotropic(2), lambda_functional(M, Kernel::isotropic(2)), 1.0};
    double aspect = 1.0;
    for (int k = 1; k < budget; ++k) {
        aspect *= kAspectLadderRatio;
        Kernel cand = Kernel::aligned(2, n, aspect);
        const double lam = lambda_functional(M, cand);
        if (lam < best.lambda * (1.0 - 1e-12)) best = {cand, lam, aspect};
    }
    return best;
}

AuxKernelRho::AuxKernelRho(Kernel theta, double eps) : theta_(std::move(theta)), eps_(eps) {
    if (!(eps > 0.0)) throw ConfigError("rho kernel eps must be positive");
}

double AuxKernelRho::rho_prime(double r) const {
    if (r >= eps_) return 0.0;
    const int d = theta_.dim();
    double raw;
    if (r <= 0.0) {
        raw = std::numeric_limits<double>::infinity();
    } else if (d == 1) {
        raw = std::log(eps_ / r) / eps_;
    } else {
        raw = (1.0 / r - 1.0 / eps_) / eps_;
    }
    return raw / unit_ball_volume(d);
}

double AuxKernelRho::value(const Vec2& z) const {
    return 0.5 * (theta_.value_eps(z, eps_) + rho_prime(norm(z, theta_.dim())));
}

}  // namespace stochtr
