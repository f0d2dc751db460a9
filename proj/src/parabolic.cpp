#include "stochtr/parabolic.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <limits>
#include <ostream>

#include "stochtr/parallel.hpp"

namespace stochtr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool verbose() { return std::getenv("STOCHTR_VERBOSE") != nullptr; }

std::vector<Vec2> drift_at_nodes(const DriftSpec& b, const GridSpec& g) {
    std::vector<Vec2> out(g.size());
    parallel_for(g.size(), [&](std::size_t i) { out[i] = b.eval(g.node_at(i)); });
    return out;
}

double max_rate(const std::vector<Vec2>& bv, const GridSpec& g, bool with_diffusion) {
    double m = 0.0;
    for (const Vec2& v : bv) {
        double r = 0.0;
        for (int k = 0; k < g.dim; ++k) {
            r += std::abs(v[k]) / g.h(k);
            if (with_diffusion) r += 1.0 / (g.h(k) * g.h(k));
        }
        m = std::max(m, r);
    }
    return m;
}

int ny_of(const GridSpec& g) { return g.dim == 1 ? 1 : g.n[1]; }

bool on_boundary(const GridSpec& g, int i, int j) {
    if (i == 0 || i == g.n[0] - 1) return true;
    return g.dim == 2 && (j == 0 || j == g.n[1] - 1);
}

void apply_boundary(std::vector<double>& v, const GridSpec& g, Boundary bc) {
    const int nx = g.n[0], ny = ny_of(g);
    if (bc == Boundary::dirichlet_zero) {
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                if (on_boundary(g, i, j)) v[g.index(i, j)] = 0.0;
        return;
    }
    for (int j = 0; j < ny; ++j) {
        v[g.index(0, j)] = v[g.index(1, j)];
        v[g.index(nx - 1, j)] = v[g.index(nx - 2, j)];
    }
    if (g.dim == 2)
        for (int i = 0; i < nx; ++i) {
            v[g.index(i, 0)] = v[g.index(i, 1)];
            v[g.index(i, ny - 1)] = v[g.index(i, ny - 2)];
        }
}

// One explicit step of -b . grad v (+ 1/2 Laplacian v when `diffuse`) on interior nodes.
void explicit_step(const std::vector<double>& v, std::vector<double>& out, const std::vector<Vec2>& bv,
                   const GridSpec& g, double dt, bool diffuse) {
    const int nx = g.n[0], ny = ny_of(g);
    const std::size_t stride[2] = {1, static_cast<std::size_t>(nx)};
    parallel_for(static_cast<std::size_t>(ny), [&](std::size_t jr) {
        const int j = static_cast<int>(jr);
        for (int i = 0; i < nx; ++i) {
            const std::size_t c = g.index(i, j);
            if (on_boundary(g, i, j)) {
                out[c] = v[c];
                continue;
            }
            double rate = 0.0;
            for (int k = 0; k < g.dim; ++k) {
                const double h = g.h(k);
                const double vm = v[c - stride[k]], vp = v[c + stride[k]];
                const double bk = bv[c][k];
                rate += bk > 0.0 ? -bk * (v[c] - vm) / h : -bk * (vp - v[c]) / h;
                if (diffuse) rate += 0.5 * (vp - 2.0 * v[c] + vm) / (h * h);
            }
            out[c] = v[c] + dt * rate;
        }
    });
}

// Backward Euler for 1/2 d_k^2 along every grid line of axis k.
void implicit_diffusion(std::vector<double>& v, const GridSpec& g, int k, double dt, Boundary bc) {
    const int nx = g.n[0], ny = ny_of(g);
    const int len = g.n[k];
    const int lines = k == 0 ? ny : nx;
    const double r = 0.5 * dt / (g.h(k) * g.h(k));
    parallel_for(static_cast<std::size_t>(lines), [&](std::size_t l) {
        auto idx = [&](int m) { return k == 0 ? g.index(m, static_cast<int>(l)) : g.index(static_cast<int>(l), m); };
        // Thomas algorithm; rows 0 and len-1 carry the boundary condition.
        std::vector<double> a(len, -r), bd(len, 1.0 + 2.0 * r), cu(len, -r), d(len);
        for (int m = 0; m < len; ++m) d[m] = v[idx(m)];
        a[0] = 0.0;
        cu[len - 1] = 0.0;
        bd[0] = bd[len - 1] = 1.0;
        if (bc == Boundary::dirichlet_zero) {
            cu[0] = 0.0;
            a[len - 1] = 0.0;
            d[0] = d[len - 1] = 0.0;
        } else {
            cu[0] = -1.0;
            a[len - 1] = -1.0;
            d[0] = d[len - 1] = 0.0;
        }
        for (int m = 1; m < len; ++m) {
            const double w = a[m] / bd[m - 1];
            bd[m] -= w * cu[m - 1];
            d[m] -= w * d[m - 1];
        }
        d[len - 1] /= bd[len - 1];
        for (int m = len - 2; m >= 0; --m) d[m] = (d[m] - cu[m] * d[m + 1]) / bd[m];
        for (int m = 0; m < len; ++m) v[idx(m)] = d[m];
    });
}

std::pair<double, double> weighted_energies(const std::vector<double>& v, const GridSpec& g,
                                            const std::vector<double>& phi) {
    const GridFunction f(g, v);
    const auto grad = grad_fd(f);
    std::vector<double> e(v.size()), ge(v.size());
    for (std::size_t c = 0; c < v.size(); ++c) {
        e[c] = phi[c] * v[c] * v[c];
        double s = 0.0;
        for (const auto& gk : grad) s += gk.at(c) * gk.at(c);
        ge[c] = phi[c] * s;
    }
    const double vol = g.cell_volume();
    return {vol * pairwise_sum(e), vol * pairwise_sum(ge)};
}

}  // namespace

Scheme parse_scheme(const std::string& s) {
    if (s == "explicit-upwind") return Scheme::explicit_upwind;
    if (s == "implicit-diffusion-explicit-advection" || s == "implicit-diffusion") return Scheme::implicit_diffusion;
    throw ConfigError("unknown scheme '" + s + "'");
}

Boundary parse_boundary(const std::string& s) {
    if (s == "dirichlet-zero") return Boundary::dirichlet_zero;
    if (s == "copy-out") return Boundary::copy_out;
    throw ConfigError("unknown boundary '" + s + "'");
}

std::string to_string(Scheme s) {
    return s == Scheme::explicit_upwind ? "explicit-upwind" : "implicit-diffusion-explicit-advection";
}
std::string to_string(Boundary b) { return b == Boundary::dirichlet_zero ? "dirichlet-zero" : "copy-out"; }

double stable_dt(const DriftSpec& b, const GridSpec& grid, Scheme scheme) {
    if (b.dim != grid.dim) throw ConfigError("drift and grid dimensions differ");
    const double rate = max_rate(drift_at_nodes(b, grid), grid, scheme == Scheme::explicit_upwind);
    return rate > 0.0 ? 0.9 / rate : kInf;
}

ParabolicSeries solve_fd(const DriftSpec& b, const GridFunction& v0, double T, const ParabolicConfig& cfg) {
    const GridSpec& g = cfg.grid;
    if (b.dim != g.dim) throw ConfigError("drift and grid dimensions differ");
    if (v0.spec().size() != g.size() || v0.spec().dim != g.dim) throw ConfigError("initial data is not on the solver grid");
    if (!(T > 0.0)) throw ConfigError("T must be positive");
    if (!(cfg.dt > 0.0)) throw ConfigError("dt must be positive");
    if (cfg.store_stride < 0) throw ConfigError("store_stride must be >= 0");
    const auto bv = drift_at_nodes(b, g);
    const bool expl = cfg.scheme == Scheme::explicit_upwind;
    const double rate = max_rate(bv, g, expl);
    if (cfg.dt * rate > 0.9 * (1.0 + 1e-12))
        throw ConfigError("dt exceeds the stability bound " + std::to_string(rate > 0 ? 0.9 / rate : kInf));

    ParabolicSeries s;
    s.steps = static_cast<int>(std::ceil(T / cfg.dt - 1e-9));
    s.dt = T / s.steps;
    double bsup = 0.0;
    for (const Vec2& v : bv) bsup = std::max(bsup, norm(v, g.dim));
    s.boundary_reach = boundary_reach(bsup, T);
    if (verbose())
        std::clog << "[stochtr] parabolic boundary-influence radius " << s.boundary_reach << '\n';

    std::vector<double> v = v0.values(), next(v.size());
    apply_boundary(v, g, cfg.boundary);
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    s.lower = *lo;
    s.upper = *hi;
    const double tol = 1e-12 * std::max({1.0, std::abs(s.lower), std::abs(s.upper)});

    std::vector<double> phi;
    s.energy_N = cfg.energy_N;
    if (cfg.energy_N) {
        phi.resize(g.size());
        for (std::size_t c = 0; c < phi.size(); ++c) phi[c] = weight(g.node_at(c), g.dim, *cfg.energy_N);
    }
    auto record = [&](int step) {
        const double t = step * s.dt;
        s.times.push_back(t);
        const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
        s.min.push_back(*mn);
        s.max.push_back(*mx);
        if (*mn < s.lower - tol || *mx > s.upper + tol) ++s.violations;
        if (cfg.energy_N) {
            const auto [e, ge] = weighted_energies(v, g, phi);
            s.energy.push_back(e);
            s.grad_energy.push_back(ge);
        }
        const bool keep = step == 0 || step == s.steps || (cfg.store_stride > 0 && step % cfg.store_stride == 0);
        if (keep) {
            s.snapshot_times.push_back(t);
            s.snapshots.emplace_back(g, v);
        }
    };

    record(0);
    for (int step = 1; step <= s.steps; ++step) {
        explicit_step(v, next, bv, g, s.dt, expl);
        std::swap(v, next);
        if (!expl)
            for (int k = 0; k < g.dim; ++k) implicit_diffusion(v, g, k, s.dt, cfg.boundary);
        apply_boundary(v, g, cfg.boundary);
        record(step);
    }
    return s;
}

void ParabolicSeries::write_csv(std::ostream& os) const {
    os << std::setprecision(17) << "t,E,gradE,min,max\n";
    for (std::size_t k = 0; k < times.size(); ++k) {
        os << times[k] << ',';
        if (k < energy.size())
            os << energy[k] << ',' << grad_energy[k];
        else
            os << ',';
        os << ',' << min[k] << ',' << max[k] << '\n';
    }
}

GridFunction heat_exact(const GridFunction& v0, double t) {
    if (!(t > 0.0)) throw ConfigError("heat_exact needs t > 0");
    const GridSpec& g = v0.spec();
    std::vector<double> v = v0.values();
    const int nx = g.n[0], ny = ny_of(g);
    for (int k = 0; k < g.dim; ++k) {
        const double h = g.h(k);
        const int len = g.n[k];
        const int reach = std::min(len - 1, static_cast<int>(std::ceil(12.0 * std::sqrt(t) / h)) + 1);
        std::vector<double> w(reach + 1);
        double mass = 0.0;
        for (int m = 0; m <= reach; ++m) {
            w[m] = std::exp(-0.5 * (m * h) * (m * h) / t);
            mass += m == 0 ? w[m] : 2.0 * w[m];
        }
        for (double& x : w) x /= mass;
        const int lines = k == 0 ? ny : nx;
        std::vector<double> out(v.size());
        parallel_for(static_cast<std::size_t>(lines), [&](std::size_t l) {
            auto idx = [&](int m) { return k == 0 ? g.index(m, static_cast<int>(l)) : g.index(static_cast<int>(l), m); };
            for (int m = 0; m < len; ++m) {
                double s = 0.0;
                const int a = std::max(0, m - reach), b = std::min(len - 1, m + reach);
                for (int q = a; q <= b; ++q) s += w[std::abs(q - m)] * v[idx(q)];
                out[idx(m)] = s;
            }
        });
        v.swap(out);
    }
    return {g, std::move(v)};
}

double weight(const Vec2& x, int dim, double N) { return std::pow(1.0 + norm(x, dim), -N); }

Vec2 weight_grad(const Vec2& x, int dim, double N) {
    const double r = norm(x, dim);
    if (r == 0.0) return {0.0, 0.0};
    const double f = -N * std::pow(1.0 + r, -N - 1.0) / r;
    return {f * x[0], dim == 1 ? 0.0 : f * x[1]};
}

double weight_identity_excess(const GridSpec& grid, double N) {
    double worst = -kInf;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        const Vec2 x = grid.node_at(c);
        const double lhs = (1.0 + norm(x, grid.dim)) * norm(weight_grad(x, grid.dim, N), grid.dim);
        const double rhs = N * weight(x, grid.dim, N);
        worst = std::max(worst, (lhs - rhs) / rhs);
    }
    return worst;
}

EnergyReport weighted_energy_check(const ParabolicSeries& series, const DriftSplit& split, double N, double c_n) {
    if (series.energy.empty() || series.grad_energy.size() != series.energy.size())
        throw ConfigError("series has no weighted-energy record; solve with energy_N set");
    if (!series.energy_N || *series.energy_N != N) throw ConfigError("series energy was recorded for another N");
    EnergyReport r;
    r.N = N;
    r.alpha = alpha_rate(split);
    r.c_n = c_n;
    r.times = series.times;
    r.energy = series.energy;
    r.grad_energy = series.grad_energy;
    const double e0 = r.energy.front();
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        r.envelope.push_back(e0 * std::exp(c_n * r.alpha * r.times[k]));
        if (r.energy[k] > r.envelope[k] * (1.0 + 1e-12)) r.envelope_holds = false;
        if (k > 0 && e0 > 0.0) r.max_increase = std::max(r.max_increase, (r.energy[k] - r.energy[k - 1]) / e0);
    }
    return r;
}

double bv_tail(const DriftSpec& b, double N, double R, double T) {
    if (!b.bv) throw UnsupportedError("drift '" + b.name + "' has no BV data");
    if (!(T > 0.0)) throw ConfigError("T must be positive");
    return T * b.bv->weighted_tail(N, R);
}

DuhamelW11 duhamel_w11(const GridFunction& g, double t, int nodes) {
    if (!(t > 0.0)) throw ConfigError("t must be positive");
    std::vector<double> abscissa, weights;
    auto take = [&](const auto& a, const auto& w) {
        // boost stores the non-negative half of the symmetric rule
        for (std::size_t i = 0; i < a.size(); ++i) {
            abscissa.push_back(a[i]);
            weights.push_back(w[i]);
            if (a[i] != 0.0) {
                abscissa.push_back(-a[i]);
                weights.push_back(w[i]);
            }
        }
    };
    using boost::math::quadrature::gauss;
    switch (nodes) {
        case 8: take(gauss<double, 8>::abscissa(), gauss<double, 8>::weights()); break;
        case 16: take(gauss<double, 16>::abscissa(), gauss<double, 16>::weights()); break;
        case 32: take(gauss<double, 32>::abscissa(), gauss<double, 32>::weights()); break;
        default: throw ConfigError("duhamel_w11 supports 8, 16 or 32 nodes");
    }
    const GridSpec& gs = g.spec();
    std::vector<double> acc(gs.size(), 0.0);
    for (std::size_t q = 0; q < abscissa.size(); ++q) {
        const double tau = 0.5 * t * (abscissa[q] + 1.0);
        const GridFunction f = heat_exact(g, tau);
        for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += 0.5 * t * weights[q] * f.at(c);
    }
    DuhamelW11 out{GridFunction(gs, std::move(acc))};
    const Box whole = gs.domain();
    out.w11 = norm_l1_region(out.w, whole);
    for (const auto& d : grad_fd(out.w)) out.w11 += norm_l1_region(d, whole);
    out.g_l1 = norm_l1_region(g, whole);
    out.constant = out.w11 / (2.0 * std::sqrt(t) * out.g_l1);
    return out;
}

}  // namespace stochtr
