#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "stochtr/characteristics.hpp"
#include "stochtr/drift.hpp"

namespace stochtr {

struct InitialDatum {
    std::string name;
    int dim = 1;
    std::function<double(const Vec2&)> u0;
    double sup_norm = 0.0;

    double operator()(const Vec2& x) const { return u0(x); }
    static InitialDatum constant(int dim, double c);
    /// 1 for x_axis > 0, else 0.
    static InitialDatum indicator_positive(int dim, int axis);
    /// sign(x_axis) with sign(0) = 0.
    static InitialDatum sign(int dim, int axis);
    /// exp(-|x - c|^2 / (2 w^2)).
    static InitialDatum gaussian(int dim, const Vec2& center, double width);
    /// sin(x_0).
    static InitialDatum sine(int dim);
};

/// Names: constant (params {c}), indicator_y_pos, indicator_x_pos, sign_x, sign_y,
/// gaussian (params {width[, cx, cy]}), sin, tilted_step_y = 1{y > 0} (1 + tanh(x) / 2).
InitialDatum datum_catalog(const std::string& name, int dim, const std::vector<double>& params = {});

struct Renormalization {
    std::string tag;
    std::function<double(double)> beta;
    std::function<double(double)> beta_prime;

    double operator()(double s) const { return beta(s); }
    static Renormalization identity();
    static Renormalization square();
    static Renormalization cube();
    /// Throws LookupError for unknown tags.
    static Renormalization from_name(const std::string& tag);
};

using Evaluator = std::function<double(double t, const Vec2& x)>;

/// beta o u.
Evaluator renormalize(const Evaluator& u, const Renormalization& beta);

/// How the region |y| < t^2 that no off-line characteristic reaches is filled.
struct VacuumFill {
    enum class Kind { transported, constant };
    Kind kind = Kind::transported;
    double value = 0.0;  // constant only

    static VacuumFill transported() { return {Kind::transported, 0.0}; }
    static VacuumFill constant(double c) { return {Kind::constant, c}; }
};

/// Weak solution of u_t + b . grad u = 0 for the shear flow built from characteristics.
/// Outside |y| <= t^2 the value is u0 at the closed-form backward characteristic.
/// Inside, a transported fill is constant along the delayed branches: with
/// x' = x - sign(y) sqrt|y|, the half-cone on the rule's side takes the one-sided
/// trace u0(x', 0+) (up) or u0(x', 0-) (down), the other half takes u0(x', 0).
/// Points on the line take the rule's one-sided trace.
class DeterministicSolution {
public:
    /// Throws UnsupportedError for drifts other than shear_flow and ConfigError for a
    /// transported fill with the stay rule.
    DeterministicSolution(const DriftSpec& b, InitialDatum u0, SelectionRule rule, VacuumFill fill);
    double operator()(double t, const Vec2& x) const;
    Evaluator evaluator() const;
    /// True where the value comes from the fill.
    static bool in_vacuum(double t, const Vec2& x) { return std::abs(x[1]) < t * t; }
    /// Backward characteristic foot for points outside the vacuum region.
    static Vec2 backtrace(double t, const Vec2& x);

private:
    InitialDatum u0_;
    SelectionRule rule_;
    VacuumFill fill_;
};

/// Pathwise solution u(t, x) = u0(phi_t^-1(x)) for one Brownian path with
/// increments dW_0..dW_{n-1} on a uniform grid of step dt. The inverse flow is
/// Euler-Maruyama for dY = -b(Y) ds + dW^, W^_s = W_{t-s} - W_t, Y_0 = x.
class StochasticSolution {
public:
    StochasticSolution(const DriftSpec& b, InitialDatum u0, std::vector<Vec2> increments, double dt);
    /// t must lie on the time grid (t = j dt, j <= n).
    Vec2 inverse_flow(double t, const Vec2& x) const;
    double operator()(double t, const Vec2& x) const { return u0_(inverse_flow(t, x)); }
    Evaluator evaluator() const;
    StochasticSolution with_datum(InitialDatum u0) const;
    const std::vector<Vec2>& increments() const { return dw_; }
    double dt() const { return dt_; }
    const InitialDatum& datum() const { return u0_; }

private:
    DriftSpec b_;
    InitialDatum u0_;
    std::vector<Vec2> dw_;
    double dt_;
};

/// u0(Y_t) for the backward characteristic driven by the reversed increments of `path`.
double stochastic_solution_sample(const DriftSpec& b, const InitialDatum& u0, const SdePath& path, double t,
                                  const Vec2& x);

/// phi(x) = prod_k (1 - s_k^2)^4, s_k = (x_k - c_k) / r_k, supported on the box c +- r.
class TestFunction {
public:
    TestFunction(int dim, const Vec2& center, const Vec2& radius);
    int dim() const { return dim_; }
    Box support() const;
    double value(const Vec2& x) const;
    Vec2 grad(const Vec2& x) const;
    /// d^2 phi / dx_k^2
    double second(const Vec2& x, int k) const;
    double laplacian(const Vec2& x) const { return second(x, 0) + (dim_ == 2 ? second(x, 1) : 0.0); }
    /// d^2 phi / dx dy (zero in 1D)
    double mixed(const Vec2& x) const;

private:
    int dim_;
    Vec2 c_, r_;
};

enum class WeakMode { deterministic, stratonovich, ito };
WeakMode parse_weak_mode(const std::string& s);
std::string to_string(WeakMode m);

struct WeakResidual {
    double residual = 0.0;   // |lhs - rhs|
    double lhs_u_t = 0.0;    // int u_t phi
    double rhs_u0 = 0.0;     // int u_0 phi
    double drift_term = 0.0; // int_0^t int u B* phi ds
    double noise_term = 0.0; // stochastic integral of int u C_k* phi (mode convention)
    double ito_correction = 0.0; // 1/2 int_0^t int u Laplacian phi ds (ito only)
};

/// Weak identity of the transport equation tested against phi on a cell grid of
/// spacing ~h over supp phi, time step dt (t must be a multiple of dt). The drift
/// term uses the flux form int_cell u B* phi = -u_c oint phi b . n, so div b is
/// never evaluated. Stochastic modes need the Brownian increments on the same
/// time grid. Cells tile supp phi exactly, so a jump that sits on a cell edge costs
/// no O(h) sampling error. Ito mode adds the Milstein term to the left-point sum.
/// Throws DomainError if supp phi is not inside `domain`.
WeakResidual weak_form_residual(const Evaluator& u, const DriftSpec& b, const TestFunction& phi, double t,
                                WeakMode mode, double h, double dt, const Box& domain,
                                const std::vector<Vec2>* increments = nullptr);

/// Partition-sum covariation [int u C_k* phi, W^k] summed over k against the
/// compensator -int_0^t int u Laplacian phi ds.
struct Covariation {
    double partition_sum = 0.0;
    double compensator = 0.0;
    double stderr_ = 0.0;  // sqrt(sum_j (dF_j dW_j)^2)
    double gap() const { return partition_sum - compensator; }
};
Covariation quadratic_covariation(const Evaluator& u, const TestFunction& phi, double t, double h, double dt,
                                  const std::vector<Vec2>& increments);

/// Stratonovich and Ito residuals plus the covariation from one evaluation pass.
struct StochasticWeakForm {
    WeakResidual stratonovich;
    WeakResidual ito;
    Covariation covariation;
};
StochasticWeakForm stochastic_weak_form(const Evaluator& u, const DriftSpec& b, const TestFunction& phi, double t,
                                        double h, double dt, const Box& domain, const std::vector<Vec2>& increments);

/// Residual study rows: mode, h, dt, t, residual.
struct ResidualRow {
    WeakMode mode;
    double h, dt, t, residual;
};
void write_residual_csv(std::ostream& os, const std::vector<ResidualRow>& rows);

}  // namespace stochtr
