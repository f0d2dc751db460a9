#include "stochtr/commutator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <limits>
#include <ostream>

#include <boost/math/quadrature/gauss.hpp>

#include "stochtr/parallel.hpp"

namespace stochtr {

namespace {

using Gauss64 = boost::math::quadrature::gauss<double, 64>;
using Gauss32 = boost::math::quadrature::gauss<double, 32>;

bool verbose() { return std::getenv("STOCHTR_VERBOSE") != nullptr; }

std::array<int, 2> stencil_radius(const GridSpec& g, double eps) {
    std::array<int, 2> m{0, 0};
    for (int k = 0; k < g.dim; ++k) m[k] = static_cast<int>(std::floor(eps / g.h(k)));
    return m;
}

GridSpec interior_spec(const GridSpec& g, const std::array<int, 2>& m) {
    std::array<int, 2> nout{g.n[0] - 2 * m[0], g.dim == 1 ? 1 : g.n[1] - 2 * m[1]};
    for (int k = 0; k < g.dim; ++k)
        if (nout[k] < 8) throw DomainError("commutator evaluation region is not interior to the grid");
    return GridSpec::make(g.dim, {g.lo[0] + m[0] * g.h(0), g.dim == 1 ? 0.0 : g.lo[1] + m[1] * g.h(1)},
                          {g.hi[0] - m[0] * g.h(0), g.dim == 1 ? 0.0 : g.hi[1] - m[1] * g.h(1)}, nout);
}

// Local sup of |u| over the stencil box around each interior node.
std::vector<double> local_sup(const GridFunction& u, const std::array<int, 2>& m, const GridSpec& out) {
    const GridSpec& g = u.spec();
    std::vector<double> s(out.size(), 0.0);
    parallel_for(static_cast<std::size_t>(out.n[1]), [&](std::size_t jo) {
        const int j = static_cast<int>(jo);
        for (int i = 0; i < out.n[0]; ++i) {
            double best = 0.0;
            const int jlo = g.dim == 1 ? 0 : j, jhi = g.dim == 1 ? 0 : j + 2 * m[1];
            for (int jj = jlo; jj <= jhi; ++jj)
                for (int ii = i; ii <= i + 2 * m[0]; ++ii) best = std::max(best, std::abs(u(ii, jj)));
            s[out.index(i, j)] = best;
        }
    });
    return s;
}

}  // namespace

GridFunction commutator_field(const GridFunction& u, const DriftSpec& b, const Kernel& kernel, double eps,
                              std::size_t* skipped) {
    const GridSpec& g = u.spec();
    if (kernel.dim() != g.dim || b.dim != g.dim) throw ConfigError("commutator inputs have mismatched dimensions");
    if (eps < 2.0 * g.max_h() * (1.0 - 1e-12))
        throw ResolutionError("eps must resolve the kernel support by at least 2 cells");
    const auto m = stencil_radius(g, eps);
    const GridSpec out = interior_spec(g, m);

    // Drift and divergence at every input node.
    std::vector<Vec2> bv(g.size());
    std::vector<double> dv(g.size());
    std::size_t bad = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec2 x = g.node_at(i);
        bv[i] = b.eval(x);
        dv[i] = b.div(x);
        if (!std::isfinite(dv[i])) {
            dv[i] = 0.0;
            bv[i] = {std::numeric_limits<double>::quiet_NaN(), 0.0};
            ++bad;
            if (verbose())
                std::clog << "commutator: skipping node (" << x[0] << ", " << x[1]
                          << ") on the singular set of " << b.name << '\n';
        }
    }
    if (skipped) *skipped = bad;

    const int sx = 2 * m[0] + 1, sy = g.dim == 1 ? 1 : 2 * m[1] + 1;
    std::vector<double> tv(static_cast<std::size_t>(sx) * sy);
    std::vector<Vec2> tg(tv.size());
    for (int bb = 0; bb < sy; ++bb)
        for (int a = 0; a < sx; ++a) {
            const Vec2 z{(a - m[0]) * g.h(0), g.dim == 1 ? 0.0 : (bb - m[1]) * g.h(1)};
            const std::size_t k = static_cast<std::size_t>(bb) * sx + a;
            tv[k] = kernel.value_eps(z, eps);
            tg[k] = kernel.grad_eps(z, eps);
        }

    const double cell = g.cell_volume();
    std::vector<double> vals(out.size());
    parallel_for(static_cast<std::size_t>(out.n[1]), [&](std::size_t jo) {
        const int j = static_cast<int>(jo);
        for (int i = 0; i < out.n[0]; ++i) {
            const std::size_t xi = g.index(i + m[0], g.dim == 1 ? 0 : j + m[1]);
            const Vec2 bx = bv[xi];
            double s = 0.0;
            for (int bb = 0; bb < sy; ++bb) {
                const int jj = g.dim == 1 ? 0 : j + 2 * m[1] - bb;
                for (int a = 0; a < sx; ++a) {
                    const std::size_t yi = g.index(i + 2 * m[0] - a, jj);
                    const std::size_t k = static_cast<std::size_t>(bb) * sx + a;
                    if (tv[k] == 0.0 && tg[k][0] == 0.0 && tg[k][1] == 0.0) continue;
                    const double uy = u.at(yi);
                    if (uy == 0.0 || std::isnan(bv[yi][0])) continue;
                    const Vec2& by = bv[yi];
                    const double flux = (bx[0] - by[0]) * tg[k][0] + (bx[1] - by[1]) * tg[k][1];
                    s += uy * (flux + dv[yi] * tv[k]);
                }
            }
            // A skipped centre node contributes no b(x); report zero there.
            vals[out.index(i, j)] = std::isnan(bx[0]) ? 0.0 : s * cell;
        }
    });
    return {out, std::move(vals)};
}

double tv_mollified(const BvData& bv, const AuxKernelRho& rho, const Vec2& x) {
    const double eps = rho.eps();
    const int d = bv.dim;
    double total = 0.0;
    for (const auto& j : bv.jumps) {
        const double delta = std::abs(x[j.axis] - j.position);
        if (delta >= eps) continue;
        if (d == 1) {
            total += j.magnitude * rho.value({x[0] - j.position, 0.0});
            continue;
        }
        if (delta == 0.0) return std::numeric_limits<double>::infinity();
        // Line integral of rho over the chord; s = delta sinh(tau) tames the 1/r singularity.
        const double tmax = std::asinh(std::sqrt(eps * eps - delta * delta) / delta);
        auto f = [&](double tau) {
            const double s = delta * std::sinh(tau);
            Vec2 z{};
            z[j.axis] = x[j.axis] - j.position;
            z[1 - j.axis] = s;
            return rho.value(z) * delta * std::cosh(tau);
        };
        total += j.magnitude * Gauss64::integrate(f, -tmax, tmax);
    }

    const Kernel& th = rho.theta();
    if (d == 1) {
        auto smooth = [&](double z) { return bv.ac_density({x[0] - z, 0.0}) * 0.5 * th.value_eps({z, 0.0}, eps); };
        total += Gauss64::integrate(smooth, -eps, 0.0) + Gauss64::integrate(smooth, 0.0, eps);
        // rho'(z) = log(eps/|z|) / (2 eps) with z = +-eps s^2.
        for (double side : {-1.0, 1.0}) {
            auto f = [&](double s) {
                if (s <= 0.0) return 0.0;
                const double z = side * eps * s * s;
                return bv.ac_density({x[0] - z, 0.0}) * (-2.0 * std::log(s)) * 2.0 * s / 2.0;
            };
            total += 0.5 * Gauss64::integrate(f, 0.0, 1.0);
        }
    } else {
        constexpr int kAngles = 64;
        double acc = 0.0;
        for (int a = 0; a < kAngles; ++a) {
            const double phi = 2.0 * kPi * (a + 0.5) / kAngles;
            const double c = std::cos(phi), s = std::sin(phi);
            auto f = [&](double r) {
                const Vec2 z{r * c, r * s};
                // r rho'(r) = (1 - r/eps) / (pi eps) is bounded.
                const double weight = 0.5 * th.value_eps(z, eps) * r + 0.5 * (1.0 - r / eps) / (kPi * eps);
                return bv.ac_density({x[0] - z[0], x[1] - z[1]}) * weight;
            };
            acc += Gauss32::integrate(f, 0.0, eps);
        }
        total += acc * 2.0 * kPi / kAngles;
    }
    return total;
}

bool CommutatorReport::l1_bound_holds(double slack) const {
    for (std::size_t k = 0; k < l1_values.size(); ++k)
        if (l1_values[k] > slack * (bound_bv[k] + bound_ac[k])) return false;
    return true;
}

bool CommutatorReport::ratio_stable(double factor) const {
    if (trivially_satisfied || ratio_sup.empty()) return true;
    for (double r : ratio_sup)
        if (r > factor * ratio_sup.front()) return false;
    return true;
}

void CommutatorReport::write_csv(std::ostream& os) const {
    os << std::setprecision(17);
    os << "# commutator region_lo=" << region.lo[0];
    if (region.dim == 2) os << ',' << region.lo[1];
    os << " region_hi=" << region.hi[0];
    if (region.dim == 2) os << ',' << region.hi[1];
    os << " horizon=" << horizon << " L=" << sup_u << " I_theta=" << i_theta << '\n';
    os << "eps,l1,bound_bv,bound_ac,ratio_sup\n";
    for (std::size_t k = 0; k < eps_ladder.size(); ++k) {
        os << eps_ladder[k] << ',' << l1_values[k] << ',' << bound_bv[k] << ',' << bound_ac[k] << ',';
        if (k < ratio_sup.size()) os << ratio_sup[k];
        os << '\n';
    }
}

namespace {

CommutatorReport run_study(const GridFunction& u, const DriftSpec& b, const Kernel& kernel,
                           const std::vector<double>& ladder, const Box& region, bool pointwise) {
    if (!b.bv) throw UnsupportedError("drift '" + b.name + "' has no BV data");
    if (ladder.empty()) throw ConfigError("eps ladder is empty");
    for (std::size_t k = 1; k < ladder.size(); ++k)
        if (!(ladder[k] < ladder[k - 1])) throw ConfigError("eps ladder must be strictly decreasing");

    const GridSpec& g = u.spec();
    CommutatorReport rep;
    rep.region = region;
    rep.eps_ladder = ladder;
    rep.sup_u = u.sup_norm();
    rep.i_theta = i_functional(kernel);
    const int d = g.dim;
    bool any_denominator = false;

    for (double eps : ladder) {
        const auto m = stencil_radius(g, eps);
        const GridSpec inner = interior_spec(g, m);
        if (!region.inside(inner.domain()))
            throw DomainError("region must lie inside the convolution interior for every eps");
        std::size_t skipped = 0;
        const GridFunction r = commutator_field(u, b, kernel, eps, &skipped);
        rep.skipped_nodes += skipped;
        rep.l1_values.push_back(norm_l1_region(r, region));
        const Box qe = region.enlarged(eps);
        rep.bound_bv.push_back(rep.sup_u * rep.i_theta * b.bv->singular(qe));
        rep.bound_ac.push_back(rep.sup_u * (d + rep.i_theta) * b.bv->absolutely_continuous(qe));

        if (pointwise) {
            const AuxKernelRho rho(kernel, eps);
            const auto lsup = local_sup(u, m, r.spec());
            std::vector<double> ratios(r.spec().size(), 0.0);
            std::vector<char> has(r.spec().size(), 0);
            parallel_for(r.spec().size(), [&](std::size_t i) {
                const Vec2 x = r.spec().node_at(i);
                if (!region.contains(x)) return;
                const double den = tv_mollified(*b.bv, rho, x);
                if (!(den > 1e-12) || lsup[i] == 0.0) return;
                has[i] = 1;
                ratios[i] = std::isfinite(den) ? std::abs(r.at(i)) / (lsup[i] * den) : 0.0;
            });
            double best = 0.0;
            for (std::size_t i = 0; i < ratios.size(); ++i)
                if (has[i]) {
                    any_denominator = true;
                    best = std::max(best, ratios[i]);
                }
            rep.ratio_sup.push_back(best);
        }
    }
    if (pointwise && !any_denominator) rep.trivially_satisfied = true;
    if (b.bv->jumps.empty())
        for (std::size_t k = 1; k < rep.l1_values.size(); ++k)
            rep.decay.push_back(rep.l1_values[k - 1] > 0.0 ? rep.l1_values[k] / rep.l1_values[k - 1] : 0.0);
    return rep;
}

}  // namespace

CommutatorReport l1_estimate_study(const GridFunction& u, const DriftSpec& b, const Kernel& kernel,
                                   const std::vector<double>& eps_ladder, const Box& region) {
    return run_study(u, b, kernel, eps_ladder, region, false);
}

CommutatorReport pointwise_bound_study(const GridFunction& u, const DriftSpec& b, const Kernel& kernel,
                                       const std::vector<double>& eps_ladder, const Box& region) {
    return run_study(u, b, kernel, eps_ladder, region, true);
}

}  // namespace stochtr
