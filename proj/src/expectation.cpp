#include "stochtr/expectation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "stochtr/characteristics.hpp"
#include "stochtr/parallel.hpp"

namespace stochtr {

namespace {

std::string fingerprint(const DriftSpec& b, const InitialDatum& u0, const Renormalization& beta, double t,
                        const Vec2& x, std::size_t n, double dt, std::uint64_t seed, double tiebreak) {
    std::ostringstream os;
    os << std::setprecision(17) << "drift=" << b.name << ";datum=" << u0.name << ";beta=" << beta.tag << ";t=" << t
       << ";x=" << x[0];
    if (b.dim == 2) os << ',' << x[1];
    os << ";n=" << n << ";dt=" << dt << ";seed=" << seed << ";tiebreak=" << tiebreak;
    return os.str();
}

}  // namespace

McEstimate feynman_kac(const DriftSpec& b, const InitialDatum& u0, const Renormalization& beta, double t,
                       const Vec2& x, std::size_t n_paths, double dt, std::uint64_t seed, const McOptions& opt) {
    if (!(t > 0.0)) throw ConfigError("feynman_kac needs t > 0");
    if (n_paths < 100) throw ConfigError("feynman_kac needs at least 100 paths");
    if (u0.dim != b.dim) throw ConfigError("datum and drift dimensions differ");
    std::vector<double> val(n_paths), sq(n_paths);
    std::vector<char> esc(n_paths, 0);
    parallel_for(n_paths, [&](std::size_t i) {
        bool e = false;
        const Vec2 y = sde_endpoint(b, Direction::backward, x, t, dt, seed, i, opt.tiebreak, opt.box, &e);
        if (e) {
            esc[i] = 1;
            val[i] = sq[i] = 0.0;
            return;
        }
        val[i] = beta(u0(y));
        sq[i] = val[i] * val[i];
    });
    McEstimate m;
    m.n_paths = n_paths;
    m.escaped = static_cast<std::size_t>(std::count(esc.begin(), esc.end(), 1));
    m.unreliable = m.escaped * 100 > n_paths;
    const double n = static_cast<double>(n_paths - m.escaped);
    if (n < 2) {
        m.unreliable = true;
        return m;
    }
    m.mean = pairwise_sum(val) / n;
    const double var = std::max(0.0, (pairwise_sum(sq) - n * m.mean * m.mean) / (n - 1.0));
    m.stderr_ = std::sqrt(var / n);
    m.fingerprint = fingerprint(b, u0, beta, t, x, n_paths, dt, seed, opt.tiebreak);
    return m;
}

bool SelectionReport::all_pass() const {
    return std::all_of(points.begin(), points.end(), [](const SelectionPoint& p) { return p.pass; });
}

double SelectionReport::deterministic_gap(double t) const {
    double g = 0.0;
    for (const auto& p : points)
        if (DeterministicSolution::in_vacuum(t, p.x)) g = std::max(g, std::abs(p.det_up - p.det_down));
    return g;
}

void SelectionReport::write_csv(std::ostream& os) const {
    os << std::setprecision(17) << "x,y";
    for (double tb : tiebreaks) os << ",mean_tb" << tb << ",stderr_tb" << tb;
    os << ",max_gap,tol,pass,det_up,det_down\n";
    for (const auto& p : points) {
        os << p.x[0] << ',' << p.x[1];
        for (const auto& e : p.estimates) os << ',' << e.mean << ',' << e.stderr_;
        os << ',' << p.max_gap << ',' << p.tolerance << ',' << (p.pass ? 1 : 0) << ',' << p.det_up << ','
           << p.det_down << '\n';
    }
}

SelectionReport selection_invariance(const DriftSpec& b, const InitialDatum& u0, const Renormalization& beta, double t,
                                     const std::vector<Vec2>& points, const std::vector<double>& tiebreaks,
                                     std::size_t n_paths, double dt, std::uint64_t seed) {
    if (b.name != "shear_flow") throw UnsupportedError("selection invariance is defined for shear_flow");
    if (tiebreaks.size() < 2) throw ConfigError("selection invariance needs at least two tie-break conventions");
    const DeterministicSolution up(b, u0, SelectionRule::up(), VacuumFill::transported());
    const DeterministicSolution down(b, u0, SelectionRule::down(), VacuumFill::transported());
    SelectionReport r;
    r.tiebreaks = tiebreaks;
    for (const Vec2& x : points) {
        SelectionPoint p;
        p.x = x;
        for (double tb : tiebreaks) {
            McOptions o;
            o.tiebreak = tb;
            p.estimates.push_back(feynman_kac(b, u0, beta, t, x, n_paths, dt, seed, o));
        }
        for (std::size_t a = 0; a < p.estimates.size(); ++a)
            for (std::size_t c = a + 1; c < p.estimates.size(); ++c) {
                const double gap = std::abs(p.estimates[a].mean - p.estimates[c].mean);
                const double tol = 3.0 * (p.estimates[a].stderr_ + p.estimates[c].stderr_);
                if (gap > tol) p.pass = false;
                if (p.tolerance == 0.0 || gap * p.tolerance > p.max_gap * tol) {
                    p.max_gap = gap;
                    p.tolerance = tol;
                }
            }
        for (const auto& e : p.estimates)
            if (e.unreliable) p.pass = false;
        p.det_up = beta(up(t, x));
        p.det_down = beta(down(t, x));
        r.points.push_back(std::move(p));
    }
    return r;
}

double interpolate(const GridFunction& f, const Vec2& x) {
    const GridSpec& g = f.spec();
    if (!g.domain().contains(x)) throw DomainError("interpolation point outside the grid");
    int idx[2] = {0, 0};
    double w[2] = {0.0, 0.0};
    for (int k = 0; k < g.dim; ++k) {
        const double s = (x[k] - g.lo[k]) / g.h(k);
        idx[k] = std::clamp(static_cast<int>(std::floor(s)), 0, g.n[k] - 2);
        w[k] = s - idx[k];
    }
    if (g.dim == 1) return (1 - w[0]) * f(idx[0]) + w[0] * f(idx[0] + 1);
    return (1 - w[0]) * (1 - w[1]) * f(idx[0], idx[1]) + w[0] * (1 - w[1]) * f(idx[0] + 1, idx[1]) +
           (1 - w[0]) * w[1] * f(idx[0], idx[1] + 1) + w[0] * w[1] * f(idx[0] + 1, idx[1] + 1);
}

bool McFdReport::all_pass() const {
    return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const McFdRow& r) { return r.pass; });
}

void McFdReport::write_csv(std::ostream& os, int dim) const {
    os << std::setprecision(17) << (dim == 1 ? "x" : "x,y") << ",mc_mean,mc_stderr,fd_value,gap,tol,pass\n";
    for (const auto& r : rows) {
        os << r.x[0];
        if (dim == 2) os << ',' << r.x[1];
        os << ',' << r.mc_mean << ',' << r.mc_stderr << ',' << r.fd_value << ',' << r.gap << ',' << r.tol << ','
           << (r.pass ? 1 : 0) << '\n';
    }
}

FdReference fd_reference(const DriftSpec& b, const InitialDatum& u0, const Renormalization& beta, double t,
                         const FdSetup& fd) {
    if (fd.resolutions.size() < 2) throw ConfigError("FD reference needs at least two resolutions");
    if (fd.box.dim != b.dim) throw ConfigError("FD box and drift dimensions differ");
    FdReference ref;
    ref.setup = fd;
    ref.t = t;
    for (double h : fd.resolutions) {
        std::array<int, 2> n{1, 1};
        for (int k = 0; k < b.dim; ++k) {
            const double len = fd.box.hi[k] - fd.box.lo[k];
            n[k] = static_cast<int>(std::lround(len / h)) + 1;
            if (std::abs((n[k] - 1) * h - len) > 1e-9 * len) throw ConfigError("FD box is not a multiple of h");
        }
        ref.grids.push_back(GridSpec::with_spacing(b.dim, fd.box.lo, h, n));
    }
    for (const GridSpec& g : ref.grids) {
        const auto v0 = GridFunction::sample(g, [&](const Vec2& x) { return beta(u0(x)); });
        ParabolicConfig cfg;
        cfg.grid = g;
        cfg.scheme = fd.scheme;
        cfg.boundary = fd.boundary;
        cfg.dt = fd.dt ? *fd.dt : std::min(stable_dt(b, g, fd.scheme), g.h(0));
        auto s = solve_fd(b, v0, t, cfg);
        if (!s.max_principle_holds()) throw DomainError("FD solution violated the maximum principle");
        ref.finals.push_back(s.final());
    }
    return ref;
}

double FdReference::value(const Vec2& x) const { return interpolate(finals.back(), x); }

double FdReference::error(const Vec2& x) const {
    return std::abs(interpolate(finals[finals.size() - 2], x) - value(x));
}

double FdReference::check_reach(const DriftSpec& b, const std::vector<Vec2>& points) const {
    if (points.empty()) throw ConfigError("no probe points");
    // Speed bound over the probe hull widened by the radius itself, iterated to a fixed point.
    Box hull{b.dim, points.front(), points.front()};
    for (const Vec2& x : points)
        for (int k = 0; k < b.dim; ++k) {
            hull.lo[k] = std::min(hull.lo[k], x[k]);
            hull.hi[k] = std::max(hull.hi[k], x[k]);
        }
    const GridSpec& g = grids.front();
    double reach = boundary_reach(0.0, t);
    for (int it = 0; it < 16; ++it) {
        const Box zone = hull.enlarged(reach);
        double bsup = 0.0;
        for (std::size_t c = 0; c < g.size(); ++c) {
            const Vec2 y = g.node_at(c);
            if (zone.contains(y)) bsup = std::max(bsup, norm(b.eval(y), b.dim));
        }
        const double next = boundary_reach(bsup, t);
        if (next <= reach * (1.0 + 1e-9)) break;
        reach = next;
    }
    const double margin = reach + 2.0 * grids.front().max_h();
    const Box& box = setup.box;
    for (int k = 0; k < b.dim; ++k)
        if (hull.lo[k] - margin < box.lo[k] || hull.hi[k] + margin > box.hi[k])
            throw DomainError("probe point within the boundary-influence radius of the FD box");
    return reach;
}

McFdReport mc_vs_fd(const DriftSpec& b, const InitialDatum& u0, const Renormalization& beta, double t,
                    const std::vector<Vec2>& points, const FdReference& ref, std::size_t n_paths, double dt,
                    std::uint64_t seed) {
    if (std::abs(ref.t - t) > 1e-12) throw ConfigError("FD reference was computed for another time");
    McFdReport rep;
    rep.boundary_reach = ref.check_reach(b, points);
    for (const Vec2& x : points) {
        McFdRow r;
        r.x = x;
        const auto m = feynman_kac(b, u0, beta, t, x, n_paths, dt, seed);
        r.mc_mean = m.mean;
        r.mc_stderr = m.stderr_;
        r.unreliable = m.unreliable;
        r.fd_value = ref.value(x);
        r.fd_error = ref.error(x);
        r.gap = std::abs(r.mc_mean - r.fd_value);
        r.tol = 3.0 * r.mc_stderr + r.fd_error;
        r.pass = !r.unreliable && r.gap <= r.tol;
        rep.rows.push_back(r);
    }
    return rep;
}

McFdReport mc_vs_fd(const DriftSpec& b, const InitialDatum& u0, const Renormalization& beta, double t,
                    const std::vector<Vec2>& points, const FdSetup& fd, std::size_t n_paths, double dt,
                    std::uint64_t seed) {
    if (points.empty()) throw ConfigError("mc_vs_fd needs probe points");
    // Cheap checks first: the reach test only needs the grids.
    FdReference probe;
    probe.setup = fd;
    probe.t = t;
    if (fd.resolutions.size() < 2) throw ConfigError("FD reference needs at least two resolutions");
    {
        const double h = fd.resolutions.front();
        std::array<int, 2> n{1, 1};
        for (int k = 0; k < b.dim; ++k) n[k] = static_cast<int>(std::lround((fd.box.hi[k] - fd.box.lo[k]) / h)) + 1;
        probe.grids.push_back(GridSpec::with_spacing(b.dim, fd.box.lo, h, n));
    }
    probe.check_reach(b, points);
    return mc_vs_fd(b, u0, beta, t, points, fd_reference(b, u0, beta, t, fd), n_paths, dt, seed);
}

}  // namespace stochtr
