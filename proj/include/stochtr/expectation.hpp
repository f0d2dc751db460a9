#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stochtr/parabolic.hpp"
#include "stochtr/transport.hpp"

namespace stochtr {

struct McEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;  // sample std / sqrt(n_paths - escaped)
    std::size_t n_paths = 0;
    std::size_t escaped = 0;
    bool unreliable = false;  // more than 1% of paths escaped
    std::string fingerprint;
};

struct McOptions {
    double tiebreak = 0.0;     // drift value of sign(0) on the singular set
    std::optional<Box> box;    // escape box; escaped paths are dropped and counted
};

/// Mean of beta(u0(X_t)) over paths of dX = -b(X) ds + dW, X_0 = x. Path i uses
/// the counter stream (seed, i), so estimates at different points share paths.
/// Throws ConfigError for n_paths < 100 or t <= 0.
McEstimate feynman_kac(const DriftSpec& b, const InitialDatum& u0, const Renormalization& beta, double t,
                       const Vec2& x, std::size_t n_paths, double dt, std::uint64_t seed, const McOptions& opt = {});

struct SelectionPoint {
    Vec2 x;
    std::vector<McEstimate> estimates;  // one per tie-break
    double max_gap = 0.0;               // |mean_a - mean_b| for the pair with the largest gap / tolerance
    double tolerance = 0.0;             // 3 (se_a + se_b) for that pair
    bool pass = true;
    double det_up = 0.0, det_down = 0.0;  // beta o deterministic up/down-fill solutions
};

struct SelectionReport {
    std::vector<double> tiebreaks;
    std::vector<SelectionPoint> points;
    bool all_pass() const;
    /// max |det_up - det_down| over points inside |y| < t^2.
    double deterministic_gap(double t) const;
    void write_csv(std::ostream& os) const;
};

/// Compares feynman_kac under each tie-break with the same paths, next to the
/// deterministic up/down-fill solutions at the same points. b must be shear_flow.
SelectionReport selection_invariance(const DriftSpec& b, const InitialDatum& u0, const Renormalization& beta, double t,
                                     const std::vector<Vec2>& points, const std::vector<double>& tiebreaks,
                                     std::size_t n_paths, double dt, std::uint64_t seed);

struct FdSetup {
    Box box;                         // truncated domain
    std::vector<double> resolutions; // h, coarse to fine (at least two)
    Scheme scheme = Scheme::explicit_upwind;
    Boundary boundary = Boundary::copy_out;
    std::optional<double> dt;        // FD step; default min(stable_dt, h) per grid
};

struct McFdRow {
    Vec2 x;
    double mc_mean = 0.0, mc_stderr = 0.0;
    double fd_value = 0.0;  // finest resolution
    double fd_error = 0.0;  // |v_h - v_{h/2}| between the two finest resolutions
    double gap = 0.0, tol = 0.0;
    bool pass = false;
    bool unreliable = false;
};

struct McFdReport {
    std::vector<McFdRow> rows;
    double boundary_reach = 0.0;
    bool all_pass() const;
    /// x[,y], mc_mean, mc_stderr, fd_value, gap, tol, pass
    void write_csv(std::ostream& os, int dim) const;
};

/// FD solutions of the expectation equation at several resolutions.
struct FdReference {
    FdSetup setup;
    double t = 0.0;
    std::vector<GridSpec> grids;
    std::vector<GridFunction> finals;

    /// Finest-resolution value, interpolated.
    double value(const Vec2& x) const;
    /// |v_h - v_{h/2}| between the two finest resolutions.
    double error(const Vec2& x) const;
    /// Influence radius sup|b| t + 6 sqrt(t), with sup|b| over the probe hull widened
    /// by the radius. Throws DomainError when a point is closer than radius + 2h to the box edge.
    double check_reach(const DriftSpec& b, const std::vector<Vec2>& points) const;
};

/// beta o u0 sampled on each grid, solved to time t; asserts the maximum principle.
FdReference fd_reference(const DriftSpec& b, const InitialDatum& u0, const Renormalization& beta, double t,
                         const FdSetup& fd);

McFdReport mc_vs_fd(const DriftSpec& b, const InitialDatum& u0, const Renormalization& beta, double t,
                    const std::vector<Vec2>& points, const FdReference& ref, std::size_t n_paths, double dt,
                    std::uint64_t seed);

/// |MC - FD| <= 3 stderr + FD self-convergence error at every point. The FD datum
/// is beta o u0 sampled on grids of spacing h over fd.box. Throws DomainError when
/// a point lies closer than boundary_reach to the box edge.
McFdReport mc_vs_fd(const DriftSpec& b, const InitialDatum& u0, const Renormalization& beta, double t,
                    const std::vector<Vec2>& points, const FdSetup& fd, std::size_t n_paths, double dt,
                    std::uint64_t seed);

/// Bilinear (linear in 1D) interpolation of a grid function.
double interpolate(const GridFunction& f, const Vec2& x);

}  // namespace stochtr
