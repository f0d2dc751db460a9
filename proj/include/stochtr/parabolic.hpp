#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stochtr/drift.hpp"
#include "stochtr/fields.hpp"

namespace stochtr {

enum class Scheme { explicit_upwind, implicit_diffusion };
enum class Boundary { dirichlet_zero, copy_out };
Scheme parse_scheme(const std::string& s);
Boundary parse_boundary(const std::string& s);
std::string to_string(Scheme s);
std::string to_string(Boundary b);

struct ParabolicConfig {
    GridSpec grid;
    double dt = 0.0;
    Scheme scheme = Scheme::explicit_upwind;
    Boundary boundary = Boundary::dirichlet_zero;
    /// Snapshot every `store_stride` steps; 0 keeps only the first and last.
    int store_stride = 0;
    /// When set, E = int phi_N v^2 and G = int phi_N |grad v|^2 are recorded every step.
    std::optional<double> energy_N;
};

/// Largest admissible step: 0.9 / max_x sum_k (|b_k(x)| / h_k + 1 / h_k^2) for the
/// explicit scheme, 0.9 / max_x sum_k |b_k(x)| / h_k when diffusion is implicit
/// (infinity for b = 0).
double stable_dt(const DriftSpec& b, const GridSpec& grid, Scheme scheme);

struct ParabolicSeries {
    std::vector<double> snapshot_times;
    std::vector<GridFunction> snapshots;
    std::vector<double> times;  // every step, including t = 0
    std::vector<double> min, max;
    std::vector<double> energy, grad_energy;  // filled when energy_N was set
    std::optional<double> energy_N;
    double dt = 0.0;
    int steps = 0;
    double lower = 0.0, upper = 0.0;  // maximum-principle bounds from the data
    std::size_t violations = 0;       // steps breaking the bounds
    double boundary_reach = 0.0;      // sup|b| T + 6 sqrt(T)

    bool max_principle_holds() const { return violations == 0; }
    const GridFunction& final() const { return snapshots.back(); }
    /// t, E, gradE, min, max per step.
    void write_csv(std::ostream& os) const;
};

/// Solves dv/dt + b . grad v = 1/2 Laplacian v on cfg.grid up to T. Upwind
/// advection per node and component, centred diffusion (explicit or backward
/// Euler line by line). The step is T / ceil(T / cfg.dt). Throws ConfigError
/// when cfg.dt exceeds stable_dt or the grid dimension differs from b.
ParabolicSeries solve_fd(const DriftSpec& b, const GridFunction& v0, double T, const ParabolicConfig& cfg);

/// Heat semigroup T_t v0 with v0 extended by zero: separable node-sum convolution
/// with the Gaussian of variance t per coordinate, the discrete kernel scaled to
/// unit mass. Throws ConfigError for t <= 0.
GridFunction heat_exact(const GridFunction& v0, double t);

/// phi_N(x) = (1 + |x|)^-N and its gradient (zero at the origin).
double weight(const Vec2& x, int dim, double N);
Vec2 weight_grad(const Vec2& x, int dim, double N);
/// max over nodes of (1+|x|)|grad phi_N| - N phi_N, relative to N phi_N.
double weight_identity_excess(const GridSpec& grid, double N);

struct EnergyReport {
    double N = 0.0;
    double alpha = 0.0;
    double c_n = 0.0;
    std::vector<double> times, energy, grad_energy, envelope;
    bool envelope_holds = true;
    double max_increase = 0.0;  // max_k (E_{k+1} - E_k) / E_0, 0 for E_0 = 0
};

/// Gronwall envelope E(t) <= E(0) exp(C_N alpha t). Throws ConfigError when the
/// series carries no energy record or was recorded for another N.
EnergyReport weighted_energy_check(const ParabolicSeries& series, const DriftSplit& split, double N,
                                   double c_n = 10.0);

/// T int_{|x| >= R} (1+|x|)^-N d|Db| from closed-form BV data. Throws
/// UnsupportedError without BV data, ConfigError where the integral diverges.
double bv_tail(const DriftSpec& b, double N, double R, double T = 1.0);

struct DuhamelW11 {
    GridFunction w;      // int_0^t T_{t-s} g ds
    double w11 = 0.0;    // ||w||_L1 + ||grad w||_L1
    double g_l1 = 0.0;
    double constant = 0.0;  // w11 / (2 sqrt(t) ||g||_L1)
};

/// Smoothing of the heat semigroup on a time-constant source, time integral by
/// `nodes`-point Gauss-Legendre.
DuhamelW11 duhamel_w11(const GridFunction& g, double t, int nodes = 16);

/// Influence radius of the truncated box for speed bound `b_sup` over [0, T].
inline double boundary_reach(double b_sup, double T) { return b_sup * T + 6.0 * std::sqrt(T); }

}  // namespace stochtr
