#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stochtr/core.hpp"

namespace stochtr {

/// Codimension-one jump set {x_axis = position} carrying |Db| mass `magnitude`
/// per unit of transverse (d-1)-dimensional measure.
struct JumpPlane {
    int axis = 0;
    double position = 0.0;
    double magnitude = 0.0;
};

/// Closed-form total-variation data |Db| = sum of jump atoms + density * Lebesgue.
struct BvData {
    int dim = 1;
    std::vector<JumpPlane> jumps;
    std::function<double(const Vec2&)> ac_density;
    std::function<double(const Box&)> ac_mass;
    /// int_{|x| >= R} (1+|x|)^-N d|Db|; throws ConfigError where it diverges.
    std::function<double(double N, double R)> weighted_tail;

    double singular(const Box& q) const;
    double absolutely_continuous(const Box& q) const { return ac_mass(q); }
    double total(const Box& q) const { return singular(q) + absolutely_continuous(q); }
};

/// Autonomous drift b with divergence, singular-set description and BV data.
struct DriftSpec {
    std::string name;
    int dim = 1;
    /// b(x), with `tiebreak` used in place of sign(0) on the singular set.
    std::function<Vec2(const Vec2&, double tiebreak)> field;
    /// div b off the singular set; NaN on it.
    std::function<double(const Vec2&)> divergence;
    /// Hyperplanes where b jumps or div b is undefined.
    std::vector<JumpPlane> singular_set;
    std::optional<BvData> bv;
    /// sup |b| when b is bounded.
    std::optional<double> sup_norm;
    /// Exact departure from the singular set along the branch with sign s over
    /// a step dt; empty for drifts with unique characteristics.
    std::function<Vec2(const Vec2&, double dt, double s)> branch_step;

    Vec2 eval(const Vec2& x) const { return field(x, 0.0); }
    Vec2 eval(const Vec2& x, double tiebreak) const { return field(x, tiebreak); }
    double div(const Vec2& x) const { return divergence(x); }
    bool near_singular_set(const Vec2& x, double tol) const;
};

/// Catalog names: shear_flow, sqrt_1d, sign_1d, smooth_sin, constant.
/// `params` only applies to constant (the vector c; its length sets dim).
DriftSpec catalog(const std::string& name, const std::vector<double>& params = {});
std::vector<std::string> catalog_names();

struct DriftSplit {
    DriftSpec b1;
    DriftSpec b2;
    std::optional<double> b1_sup;        // ||b1||_inf
    std::optional<double> b2_growth;     // ||b2 / (1+|x|)||_inf
    std::optional<double> div_b2_sup;    // ||div b2||_inf
};

/// Shear flow split b1 = sign(y)(1, 2 sqrt(|y| ^ threshold)), b2 = b - b1.
DriftSplit split_shear(double threshold = 1.0);
/// Catalog split: shear_flow and sqrt_1d truncate at `threshold`; bounded drifts use b2 = 0.
DriftSplit split_for(const DriftSpec& b, double threshold = 1.0);

/// alpha = ||b1||^2 + ||b2/(1+|x|)||^2 + ||div b2||. Throws ConfigError if a norm is missing.
double alpha_rate(const DriftSplit& split);

struct ProdiSerrin {
    double norm;     // T^(1/q) ||b||_{L^p(region)}
    bool condition;  // 2/q + d/p <= 1
};

/// Midpoint quadrature with `cells` cells per axis (offset from node lattices).
ProdiSerrin prodi_serrin_norm(const DriftSpec& b, double p, double q, const Box& region, double horizon,
                              int cells = 0);

}  // namespace stochtr
