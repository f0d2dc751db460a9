#pragma once

#include <iosfwd>
#include <vector>

#include "stochtr/drift.hpp"
#include "stochtr/fields.hpp"
#include "stochtr/mollifier.hpp"

namespace stochtr {

/// r_eps(x) = int u(y) (b(x) - b(y)) . grad theta_eps(x - y) dy + int u(y) div b(y) theta_eps(x - y) dy,
/// the distribution-free form of b . grad(u * theta_eps) - (b . grad u) * theta_eps.
///
/// Midpoint quadrature over grid nodes; evaluated on the interior sub-grid where
/// the stencil fits. Nodes where div b is undefined are skipped and counted in
/// `skipped` (and logged when STOCHTR_VERBOSE is set).
GridFunction commutator_field(const GridFunction& u, const DriftSpec& b, const Kernel& kernel, double eps,
                              std::size_t* skipped = nullptr);

/// (|Db| * rho_eps)(x) from closed-form atoms plus quadrature of the density.
double tv_mollified(const BvData& bv, const AuxKernelRho& rho, const Vec2& x);

struct CommutatorReport {
    Box region;
    double horizon = 1.0;  // autonomous drifts: time integrals are horizon * spatial integral
    double sup_u = 0.0;    // L
    double i_theta = 0.0;
    std::vector<double> eps_ladder;
    std::vector<double> l1_values;
    std::vector<double> bound_bv;  // L I(theta) |D^s b|(Q_eps)
    std::vector<double> bound_ac;  // L (d + I(theta)) |D^a b|(Q_eps)
    std::vector<double> ratio_sup; // empty unless a pointwise study ran
    std::vector<double> decay;     // l1(eps_{k+1}) / l1(eps_k), W^{1,1} drifts only
    std::size_t skipped_nodes = 0;
    bool trivially_satisfied = false;

    /// l1 <= slack * (bound_bv + bound_ac) for every eps.
    bool l1_bound_holds(double slack = 1.1) const;
    /// ratio_sup(eps) <= factor * ratio_sup(eps_0) for every eps.
    bool ratio_stable(double factor = 2.0) const;
    void write_csv(std::ostream& os) const;
};

/// Throws UnsupportedError when b lacks BV data, ConfigError for a ladder that
/// is not strictly decreasing, DomainError when region + eps leaves the grid interior.
CommutatorReport l1_estimate_study(const GridFunction& u, const DriftSpec& b, const Kernel& kernel,
                                   const std::vector<double>& eps_ladder, const Box& region);

/// As l1_estimate_study, additionally filling ratio_sup with
/// sup_x |r_eps(x)| / (||u||_{L^inf(B(x,eps))} (|Db| * rho_eps)(x)) over nodes
/// where the denominator exceeds 1e-12.
CommutatorReport pointwise_bound_study(const GridFunction& u, const DriftSpec& b, const Kernel& kernel,
                                       const std::vector<double>& eps_ladder, const Box& region);

}  // namespace stochtr
