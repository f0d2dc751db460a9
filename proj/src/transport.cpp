#include "stochtr/transport.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "stochtr/parallel.hpp"

namespace stochtr {

namespace {

constexpr double kTiny = std::numeric_limits<double>::min();

int time_steps(double t, double dt) {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    const long n = std::lround(t / dt);
    if (n < 1 || std::abs(n * dt - t) > 1e-9 * std::max(1.0, t)) throw ConfigError("t must be a positive multiple of dt");
    return static_cast<int>(n);
}

// 4-point Gauss-Legendre on [-1, 1]
constexpr double kGx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
constexpr double kGw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};

double profile(double s) {
    if (std::abs(s) >= 1.0) return 0.0;
    const double q = 1.0 - s * s;
    return q * q * q * q;
}
double profile_d1(double s) {
    if (std::abs(s) >= 1.0) return 0.0;
    const double q = 1.0 - s * s;
    return -8.0 * s * q * q * q;
}
double profile_d2(double s) {
    if (std::abs(s) >= 1.0) return 0.0;
    const double q = 1.0 - s * s;
    return -8.0 * q * q * q + 48.0 * s * s * q * q;
}

}  // namespace

InitialDatum InitialDatum::constant(int dim, double c) {
    return {"constant", dim, [c](const Vec2&) { return c; }, std::abs(c)};
}

InitialDatum InitialDatum::indicator_positive(int dim, int axis) {
    return {axis == 0 ? "indicator_x_pos" : "indicator_y_pos", dim,
            [axis](const Vec2& x) { return x[axis] > 0.0 ? 1.0 : 0.0; }, 1.0};
}

InitialDatum InitialDatum::sign(int dim, int axis) {
    return {axis == 0 ? "sign_x" : "sign_y", dim, [axis](const Vec2& x) { return sign0(x[axis]); }, 1.0};
}

InitialDatum InitialDatum::gaussian(int dim, const Vec2& center, double width) {
    if (!(width > 0.0)) throw ConfigError("gaussian width must be positive");
    return {"gaussian", dim,
            [=](const Vec2& x) {
                const double dx = x[0] - center[0], dy = dim == 2 ? x[1] - center[1] : 0.0;
                return std::exp(-(dx * dx + dy * dy) / (2.0 * width * width));
            },
            1.0};
}

InitialDatum InitialDatum::sine(int dim) {
    return {"sin", dim, [](const Vec2& x) { return std::sin(x[0]); }, 1.0};
}

InitialDatum datum_catalog(const std::string& name, int dim, const std::vector<double>& params) {
    if (dim != 1 && dim != 2) throw ConfigError("datum dim must be 1 or 2");
    if (name == "constant") return InitialDatum::constant(dim, params.empty() ? 1.0 : params[0]);
    if (name == "indicator_x_pos") return InitialDatum::indicator_positive(dim, 0);
    if (name == "sign_x") return InitialDatum::sign(dim, 0);
    if (name == "sin") return InitialDatum::sine(dim);
    if (name == "gaussian") {
        const double w = params.empty() ? 0.25 : params[0];
        const Vec2 c{params.size() > 1 ? params[1] : 0.0, params.size() > 2 ? params[2] : 0.0};
        return InitialDatum::gaussian(dim, c, w);
    }
    if (dim == 2 && name == "indicator_y_pos") return InitialDatum::indicator_positive(2, 1);
    if (dim == 2 && name == "sign_y") return InitialDatum::sign(2, 1);
    if (dim == 2 && name == "tilted_step_y")
        return {"tilted_step_y", 2,
                [](const Vec2& x) { return (x[1] > 0.0 ? 1.0 : 0.0) * (1.0 + 0.5 * std::tanh(x[0])); }, 1.5};
    throw LookupError("unknown initial datum '" + name + "' for dim " + std::to_string(dim));
}

Renormalization Renormalization::identity() {
    return {"identity", [](double s) { return s; }, [](double) { return 1.0; }};
}
Renormalization Renormalization::square() {
    return {"square", [](double s) { return s * s; }, [](double s) { return 2.0 * s; }};
}
Renormalization Renormalization::cube() {
    return {"cube", [](double s) { return s * s * s; }, [](double s) { return 3.0 * s * s; }};
}
Renormalization Renormalization::from_name(const std::string& tag) {
    if (tag == "identity") return identity();
    if (tag == "square") return square();
    if (tag == "cube") return cube();
    throw LookupError("unknown renormalization '" + tag + "'");
}

Evaluator renormalize(const Evaluator& u, const Renormalization& beta) {
    return [u, f = beta.beta](double t, const Vec2& x) { return f(u(t, x)); };
}

DeterministicSolution::DeterministicSolution(const DriftSpec& b, InitialDatum u0, SelectionRule rule, VacuumFill fill)
    : u0_(std::move(u0)), rule_(rule), fill_(fill) {
    if (b.name != "shear_flow") throw UnsupportedError("deterministic solutions are built for shear_flow only");
    if (fill_.kind == VacuumFill::Kind::transported && rule_.departure_sign() == 0.0)
        throw ConfigError("a transported fill needs a rule that leaves the line");
}

Vec2 DeterministicSolution::backtrace(double t, const Vec2& x) {
    const double s = sign0(x[1]);
    const double r = std::sqrt(std::abs(x[1])) - t;
    return {x[0] - s * t, s * r * r};
}

double DeterministicSolution::operator()(double t, const Vec2& x) const {
    if (t <= 0.0) return u0_(x);
    if (!in_vacuum(t, x)) return u0_(backtrace(t, x));
    if (fill_.kind == VacuumFill::Kind::constant) return fill_.value;
    // Delayed branch through x left the line at x' = x - sign(y) sqrt|y|.
    const double side = sign0(x[1]);
    const double xl = x[0] - side * std::sqrt(std::abs(x[1]));
    // The rule's half-cone (and the line, about to be left on the rule's side)
    // carries the one-sided trace; the other half is never reached and keeps the line value.
    const double s = rule_.departure_sign();
    if (side == s || side == 0.0) return u0_({xl, s * kTiny});
    return u0_({xl, 0.0});
}

Evaluator DeterministicSolution::evaluator() const {
    return [self = *this](double t, const Vec2& x) { return self(t, x); };
}

StochasticSolution::StochasticSolution(const DriftSpec& b, InitialDatum u0, std::vector<Vec2> increments, double dt)
    : b_(b), u0_(std::move(u0)), dw_(std::move(increments)), dt_(dt) {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
}

Vec2 StochasticSolution::inverse_flow(double t, const Vec2& x) const {
    const long j = std::lround(t / dt_);
    if (j < 0 || static_cast<std::size_t>(j) > dw_.size() || std::abs(j * dt_ - t) > 1e-9 * std::max(1.0, t))
        throw ConfigError("evaluation time must lie on the path's time grid");
    Vec2 y = x;
    for (long s = 0; s < j; ++s) {
        const Vec2 v = b_.eval(y);
        const Vec2& w = dw_[j - 1 - s];
        y = {y[0] - v[0] * dt_ - w[0], b_.dim == 1 ? 0.0 : y[1] - v[1] * dt_ - w[1]};
    }
    return y;
}

Evaluator StochasticSolution::evaluator() const {
    return [self = *this](double t, const Vec2& x) { return self(t, x); };
}

StochasticSolution StochasticSolution::with_datum(InitialDatum u0) const {
    return StochasticSolution(b_, std::move(u0), dw_, dt_);
}

double stochastic_solution_sample(const DriftSpec& b, const InitialDatum& u0, const SdePath& path, double t,
                                  const Vec2& x) {
    if (path.escaped) throw DomainError("path escaped its box; the flow is not defined on [0, t]");
    if (path.times.size() < 2) throw ConfigError("path has no steps");
    const double dt = path.times[1] - path.times[0];
    return StochasticSolution(b, u0, path.increments, dt)(t, x);
}

TestFunction::TestFunction(int dim, const Vec2& center, const Vec2& radius) : dim_(dim), c_(center), r_(radius) {
    if (!(radius[0] > 0.0) || (dim == 2 && !(radius[1] > 0.0))) throw ConfigError("test function radius must be positive");
    if (dim == 1) {
        c_[1] = 0.0;
        r_[1] = 1.0;
    }
}

Box TestFunction::support() const {
    return Box{dim_, {c_[0] - r_[0], dim_ == 2 ? c_[1] - r_[1] : 0.0}, {c_[0] + r_[0], dim_ == 2 ? c_[1] + r_[1] : 0.0}};
}

double TestFunction::value(const Vec2& x) const {
    const double a = profile((x[0] - c_[0]) / r_[0]);
    return dim_ == 1 ? a : a * profile((x[1] - c_[1]) / r_[1]);
}

Vec2 TestFunction::grad(const Vec2& x) const {
    const double sx = (x[0] - c_[0]) / r_[0];
    if (dim_ == 1) return {profile_d1(sx) / r_[0], 0.0};
    const double sy = (x[1] - c_[1]) / r_[1];
    return {profile_d1(sx) / r_[0] * profile(sy), profile(sx) * profile_d1(sy) / r_[1]};
}

double TestFunction::second(const Vec2& x, int k) const {
    const double sx = (x[0] - c_[0]) / r_[0];
    if (dim_ == 1) return k == 0 ? profile_d2(sx) / (r_[0] * r_[0]) : 0.0;
    const double sy = (x[1] - c_[1]) / r_[1];
    return k == 0 ? profile_d2(sx) / (r_[0] * r_[0]) * profile(sy) : profile(sx) * profile_d2(sy) / (r_[1] * r_[1]);
}

double TestFunction::mixed(const Vec2& x) const {
    if (dim_ == 1) return 0.0;
    return profile_d1((x[0] - c_[0]) / r_[0]) / r_[0] * profile_d1((x[1] - c_[1]) / r_[1]) / r_[1];
}

WeakMode parse_weak_mode(const std::string& s) {
    if (s == "deterministic") return WeakMode::deterministic;
    if (s == "stratonovich") return WeakMode::stratonovich;
    if (s == "ito") return WeakMode::ito;
    throw ConfigError("unknown weak-form mode '" + s + "'");
}

std::string to_string(WeakMode m) {
    switch (m) {
        case WeakMode::deterministic: return "deterministic";
        case WeakMode::stratonovich: return "stratonovich";
        case WeakMode::ito: return "ito";
    }
    return "";
}

namespace {

// Cell grid over supp phi with per-cell quadrature weights for every tested functional.
struct CellQuadrature {
    int dim = 1;
    int nx = 0, ny = 1;
    std::vector<Vec2> centers;
    std::vector<double> w_phi;       // phi(x_c) |cell|
    std::vector<double> w_drift;     // -oint_cell phi b . n
    std::array<std::vector<double>, 2> w_noise;  // -d_k phi(x_c) |cell|
    std::vector<double> w_lap;       // Laplacian phi(x_c) |cell|
    std::array<std::vector<double>, 3> w_hess;  // phi_xx, phi_yy, phi_xy times |cell|
};

CellQuadrature build_cells(const TestFunction& phi, const DriftSpec* b, double h) {
    if (!(h > 0.0)) throw ConfigError("cell size must be positive");
    CellQuadrature q;
    q.dim = phi.dim();
    const Box s = phi.support();
    q.nx = std::max(8, static_cast<int>(std::lround((s.hi[0] - s.lo[0]) / h)));
    q.ny = q.dim == 1 ? 1 : std::max(8, static_cast<int>(std::lround((s.hi[1] - s.lo[1]) / h)));
    const double hx = (s.hi[0] - s.lo[0]) / q.nx;
    const double hy = q.dim == 1 ? 1.0 : (s.hi[1] - s.lo[1]) / q.ny;
    const double vol = hx * hy;
    const std::size_t nc = static_cast<std::size_t>(q.nx) * q.ny;
    q.centers.resize(nc);
    q.w_phi.resize(nc);
    q.w_lap.resize(nc);
    for (auto& w : q.w_hess) w.assign(nc, 0.0);
    q.w_noise[0].resize(nc);
    q.w_noise[1].assign(nc, 0.0);
    for (int j = 0; j < q.ny; ++j)
        for (int i = 0; i < q.nx; ++i) {
            const std::size_t c = static_cast<std::size_t>(j) * q.nx + i;
            const Vec2 x{s.lo[0] + (i + 0.5) * hx, q.dim == 1 ? 0.0 : s.lo[1] + (j + 0.5) * hy};
            q.centers[c] = x;
            q.w_phi[c] = phi.value(x) * vol;
            q.w_lap[c] = phi.laplacian(x) * vol;
            q.w_hess[0][c] = phi.second(x, 0) * vol;
            if (q.dim == 2) {
                q.w_hess[1][c] = phi.second(x, 1) * vol;
                q.w_hess[2][c] = phi.mixed(x) * vol;
            }
            const Vec2 g = phi.grad(x);
            q.w_noise[0][c] = -g[0] * vol;
            if (q.dim == 2) q.w_noise[1][c] = -g[1] * vol;
        }
    if (!b) return q;

    // Face fluxes of phi b. Faces on the support boundary carry phi = 0.
    q.w_drift.assign(nc, 0.0);
    auto fx = [&](double x, double y0, double y1) {  // int phi b_x dy along a vertical face
        if (q.dim == 1) return phi.value({x, 0.0}) * b->eval({x, 0.0})[0];
        double acc = 0.0;
        for (int g = 0; g < 4; ++g) {
            const Vec2 p{x, 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * kGx[g]};
            acc += kGw[g] * phi.value(p) * b->eval(p)[0];
        }
        return 0.5 * (y1 - y0) * acc;
    };
    auto fy = [&](double y, double x0, double x1) {  // int phi b_y dx along a horizontal face
        double acc = 0.0;
        for (int g = 0; g < 4; ++g) {
            const Vec2 p{0.5 * (x0 + x1) + 0.5 * (x1 - x0) * kGx[g], y};
            acc += kGw[g] * phi.value(p) * b->eval(p)[1];
        }
        return 0.5 * (x1 - x0) * acc;
    };
    std::vector<double> vf(static_cast<std::size_t>(q.nx + 1) * q.ny, 0.0);
    for (int j = 0; j < q.ny; ++j)
        for (int i = 1; i < q.nx; ++i) {
            const double y0 = s.lo[1] + j * hy;
            vf[static_cast<std::size_t>(j) * (q.nx + 1) + i] = fx(s.lo[0] + i * hx, y0, y0 + hy);
        }
    std::vector<double> hf;
    if (q.dim == 2) {
        hf.assign(static_cast<std::size_t>(q.nx) * (q.ny + 1), 0.0);
        for (int j = 1; j < q.ny; ++j)
            for (int i = 0; i < q.nx; ++i) {
                const double x0 = s.lo[0] + i * hx;
                hf[static_cast<std::size_t>(j) * q.nx + i] = fy(s.lo[1] + j * hy, x0, x0 + hx);
            }
    }
    for (int j = 0; j < q.ny; ++j)
        for (int i = 0; i < q.nx; ++i) {
            const std::size_t c = static_cast<std::size_t>(j) * q.nx + i;
            const std::size_t v = static_cast<std::size_t>(j) * (q.nx + 1) + i;
            double out = vf[v + 1] - vf[v];
            if (q.dim == 2) out += hf[c + q.nx] - hf[c];
            q.w_drift[c] = -out;
        }
    return q;
}

// Per-time functionals of u on the cells.
struct Snapshot {
    double phi = 0.0, drift = 0.0, lap = 0.0;
    std::array<double, 2> noise{0.0, 0.0};
    std::array<double, 3> hess{0.0, 0.0, 0.0};
};

Snapshot snapshot(const Evaluator& u, const CellQuadrature& q, double t) {
    const std::size_t nc = q.centers.size();
    std::vector<double> uv(nc);
    parallel_for(nc, [&](std::size_t c) { uv[c] = u(t, q.centers[c]); });
    std::vector<double> tmp(nc);
    auto dotw = [&](const std::vector<double>& w) {
        if (w.empty()) return 0.0;
        for (std::size_t c = 0; c < nc; ++c) tmp[c] = uv[c] * w[c];
        return pairwise_sum(tmp);
    };
    Snapshot s;
    s.phi = dotw(q.w_phi);
    s.drift = dotw(q.w_drift);
    s.lap = dotw(q.w_lap);
    s.noise[0] = dotw(q.w_noise[0]);
    s.hess[0] = dotw(q.w_hess[0]);
    if (q.dim == 2) {
        s.noise[1] = dotw(q.w_noise[1]);
        s.hess[1] = dotw(q.w_hess[1]);
        s.hess[2] = dotw(q.w_hess[2]);
    }
    return s;
}

}  // namespace

namespace {

struct Snapshots {
    CellQuadrature q;
    std::vector<Snapshot> s;
    int n = 0;
};

Snapshots take_snapshots(const Evaluator& u, const DriftSpec* b, const TestFunction& phi, double t, double h,
                         double dt, const Box* domain) {
    if (domain) {
        const Box s = phi.support();
        for (int k = 0; k < s.dim; ++k)
            if (!(s.lo[k] > domain->lo[k] && s.hi[k] < domain->hi[k]))
                throw DomainError("test function support must lie strictly inside the domain");
    }
    Snapshots out;
    out.n = time_steps(t, dt);
    out.q = build_cells(phi, b, h);
    out.s.resize(out.n + 1);
    for (int j = 0; j <= out.n; ++j) out.s[j] = snapshot(u, out.q, j * dt);
    return out;
}

WeakResidual assemble(const Snapshots& sn, WeakMode mode, double dt, const std::vector<Vec2>* increments) {
    const int n = sn.n;
    const auto& snaps = sn.s;
    const bool noisy = mode != WeakMode::deterministic;
    if (noisy && (!increments || increments->size() < static_cast<std::size_t>(n)))
        throw ConfigError("stochastic weak form needs Brownian increments covering [0, t]");
    WeakResidual r;
    r.lhs_u_t = snaps[n].phi;
    r.rhs_u0 = snaps[0].phi;
    std::vector<double> drift(n), noise(n, 0.0), lap(n);
    for (int j = 0; j < n; ++j) {
        drift[j] = 0.5 * dt * (snaps[j].drift + snaps[j + 1].drift);
        lap[j] = 0.5 * dt * (snaps[j].lap + snaps[j + 1].lap);
        if (noisy) {
            const Vec2& w = (*increments)[j];
            double acc = 0.0;
            for (int k = 0; k < sn.q.dim; ++k) {
                const double f = mode == WeakMode::stratonovich ? 0.5 * (snaps[j].noise[k] + snaps[j + 1].noise[k])
                                                                : snaps[j].noise[k];
                acc += f * w[k];
            }
            if (mode == WeakMode::ito) {
                // Left-point sum plus the Milstein term. The noise is commutative:
                // d(int u C_k* phi) has dW^l coefficient -int u d_k d_l phi.
                const auto& hs = snaps[j].hess;
                double m = hs[0] * (w[0] * w[0] - dt);
                if (sn.q.dim == 2) m += hs[1] * (w[1] * w[1] - dt) + 2.0 * hs[2] * w[0] * w[1];
                acc -= 0.5 * m;
            }
            noise[j] = acc;
        }
    }
    r.drift_term = pairwise_sum(drift);
    if (noisy) r.noise_term = pairwise_sum(noise);
    if (mode == WeakMode::ito) r.ito_correction = 0.5 * pairwise_sum(lap);
    r.residual = std::abs(r.lhs_u_t + r.drift_term + r.noise_term - r.rhs_u0 - r.ito_correction);
    return r;
}

Covariation covariation_of(const Snapshots& sn, double dt, const std::vector<Vec2>& increments) {
    const int n = sn.n;
    if (increments.size() < static_cast<std::size_t>(n))
        throw ConfigError("covariation needs Brownian increments covering [0, t]");
    const auto& snaps = sn.s;
    std::vector<double> sum(n), sq(n), comp(n);
    for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int k = 0; k < sn.q.dim; ++k) acc += (snaps[j + 1].noise[k] - snaps[j].noise[k]) * increments[j][k];
        sum[j] = acc;
        sq[j] = acc * acc;
        comp[j] = -0.5 * dt * (snaps[j].lap + snaps[j + 1].lap);
    }
    Covariation c;
    c.partition_sum = pairwise_sum(sum);
    c.compensator = pairwise_sum(comp);
    c.stderr_ = std::sqrt(pairwise_sum(sq));
    return c;
}

}  // namespace

WeakResidual weak_form_residual(const Evaluator& u, const DriftSpec& b, const TestFunction& phi, double t,
                                WeakMode mode, double h, double dt, const Box& domain,
                                const std::vector<Vec2>* increments) {
    if (b.dim != phi.dim()) throw ConfigError("test function and drift dimensions differ");
    if (mode != WeakMode::deterministic && (!increments || increments->size() < static_cast<std::size_t>(time_steps(t, dt))))
        throw ConfigError("stochastic weak form needs Brownian increments covering [0, t]");
    return assemble(take_snapshots(u, &b, phi, t, h, dt, &domain), mode, dt, increments);
}

Covariation quadratic_covariation(const Evaluator& u, const TestFunction& phi, double t, double h, double dt,
                                  const std::vector<Vec2>& increments) {
    return covariation_of(take_snapshots(u, nullptr, phi, t, h, dt, nullptr), dt, increments);
}

StochasticWeakForm stochastic_weak_form(const Evaluator& u, const DriftSpec& b, const TestFunction& phi, double t,
                                        double h, double dt, const Box& domain, const std::vector<Vec2>& increments) {
    if (b.dim != phi.dim()) throw ConfigError("test function and drift dimensions differ");
    const Snapshots sn = take_snapshots(u, &b, phi, t, h, dt, &domain);
    return {assemble(sn, WeakMode::stratonovich, dt, &increments), assemble(sn, WeakMode::ito, dt, &increments),
            covariation_of(sn, dt, increments)};
}

void write_residual_csv(std::ostream& os, const std::vector<ResidualRow>& rows) {
    os << std::setprecision(17);
    os << "mode,h,dt,t,residual\n";
    for (const auto& r : rows) os << to_string(r.mode) << ',' << r.h << ',' << r.dt << ',' << r.t << ',' << r.residual << '\n';
}

}  // namespace stochtr
