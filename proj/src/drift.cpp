#include "stochtr/drift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>

namespace stochtr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double sign_tb(double v, double tiebreak) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : tiebreak); }

// int_0^x |cos t| dt
double abs_cos_antiderivative(double x) {
    const double k = std::floor((x + 0.5 * kPi) / kPi);
    return 2.0 * k + std::sin(x - k * kPi);
}

// int_{s0}^inf 2 s^(2m) (1+s^2)^-N ds, the r = s^2 form of radial tails.
double half_line_tail(double s0, double m, double N) {
    boost::math::quadrature::exp_sinh<double> integrator;
    auto f = [&](double s) { return 2.0 * std::pow(s, 2.0 * m) * std::pow(1.0 + s * s, -N); };
    return integrator.integrate(f, s0, kInf);
}


DriftSpec make_constant(const std::vector<double>& params) {
    std::vector<double> c = params.empty() ? std::vector<double>{1.0} : params;
    if (c.size() > 2) throw ConfigError("constant drift takes 1 or 2 components");
    DriftSpec d;
    d.name = "constant";
    d.dim = static_cast<int>(c.size());
    const Vec2 v{c[0], c.size() == 2 ? c[1] : 0.0};
    d.field = [v](const Vec2&, double) { return v; };
    d.divergence = [](const Vec2&) { return 0.0; };
    BvData bv;
    bv.dim = d.dim;
    bv.ac_density = [](const Vec2&) { return 0.0; };
    bv.ac_mass = [](const Box&) { return 0.0; };
    bv.weighted_tail = [](double, double) { return 0.0; };
    d.bv = bv;
    d.sup_norm = std::hypot(v[0], v[1]);
    return d;
}

DriftSpec make_sign_1d() {
    DriftSpec d;
    d.name = "sign_1d";
    d.dim = 1;
    d.field = [](const Vec2& x, double tb) { return Vec2{sign_tb(x[0], tb), 0.0}; };
    d.divergence = [](const Vec2& x) { return x[0] == 0.0 ? kNaN : 0.0; };
    d.singular_set = {{0, 0.0, 2.0}};
    BvData bv;
    bv.dim = 1;
    bv.jumps = {{0, 0.0, 2.0}};
    bv.ac_density = [](const Vec2&) { return 0.0; };
    bv.ac_mass = [](const Box&) { return 0.0; };
    bv.weighted_tail = [](double N, double R) {
        if (!(N > 0.0)) throw ConfigError("tail weight exponent must be positive");
        return R > 0.0 ? 0.0 : 2.0;
    };
    d.bv = bv;
    d.sup_norm = 1.0;
    d.branch_step = [](const Vec2& x, double dt, double s) {
        return Vec2{s * std::max(s * x[0] + dt, 0.0), 0.0};
    };
    return d;
}

DriftSpec make_sqrt_1d() {
    DriftSpec d;
    d.name = "sqrt_1d";
    d.dim = 1;
    d.field = [](const Vec2& x, double) { return Vec2{std::sqrt(std::abs(x[0])), 0.0}; };
    d.divergence = [](const Vec2& x) {
        return x[0] == 0.0 ? kNaN : sign0(x[0]) / (2.0 * std::sqrt(std::abs(x[0])));
    };
    d.singular_set = {{0, 0.0, 0.0}};
    BvData bv;
    bv.dim = 1;
    bv.ac_density = [](const Vec2& x) { return x[0] == 0.0 ? kInf : 0.5 / std::sqrt(std::abs(x[0])); };
    bv.ac_mass = [](const Box& q) {
        auto H = [](double x) { return sign0(x) * std::sqrt(std::abs(x)); };
        return H(q.hi[0]) - H(q.lo[0]);
    };
    bv.weighted_tail = [](double N, double R) {
        if (!(N > 0.5)) throw ConfigError("sqrt_1d tail diverges for N <= 1/2");
        // 2 int_R^inf (1/(2 sqrt x)) (1+x)^-N dx with x = s^2
        return half_line_tail(std::sqrt(std::max(R, 0.0)), 0.0, N);
    };
    d.bv = bv;
    // x' = sqrt|x| leaves 0 along x = t^2/4; there is no downward branch.
    d.branch_step = [](const Vec2& x, double dt, double s) {
        if (s <= 0.0) return x;
        const double r = std::sqrt(std::abs(x[0])) + 0.5 * dt;
        return Vec2{r * r, 0.0};
    };
    return d;
}

DriftSpec make_smooth_sin() {
    DriftSpec d;
    d.name = "smooth_sin";
    d.dim = 1;
    d.field = [](const Vec2& x, double) { return Vec2{std::sin(x[0]), 0.0}; };
    d.divergence = [](const Vec2& x) { return std::cos(x[0]); };
    BvData bv;
    bv.dim = 1;
    bv.ac_density = [](const Vec2& x) { return std::abs(std::cos(x[0])); };
    bv.ac_mass = [](const Box& q) { return abs_cos_antiderivative(q.hi[0]) - abs_cos_antiderivative(q.lo[0]); };
    bv.weighted_tail = [](double N, double R) {
        if (!(N > 1.0)) throw ConfigError("smooth_sin tail diverges for N <= 1");
        const double r0 = std::max(R, 0.0);
        const double X = r0 + 4000.0;
        auto f = [N](double x) { return std::abs(std::cos(x)) * std::pow(1.0 + x, -N); };
        double s = 0.0;
        double a = r0;
        double kink = std::ceil((r0 - 0.5 * kPi) / kPi) * kPi + 0.5 * kPi;
        while (a < X) {
            const double b = std::min(kink, X);
            if (b > a) s += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 0, 0);
            a = b;
            kink += kPi;
        }
        // |cos| averages 2/pi beyond X.
        s += (2.0 / kPi) * std::pow(1.0 + X, 1.0 - N) / (N - 1.0);
        return 2.0 * s;
    };
    d.bv = bv;
    d.sup_norm = 1.0;
    return d;
}

DriftSpec make_shear_flow() {
    DriftSpec d;
    d.name = "shear_flow";
    d.dim = 2;
    d.field = [](const Vec2& p, double tb) {
        const double s = sign_tb(p[1], tb);
        return Vec2{s, s * 2.0 * std::sqrt(std::abs(p[1]))};
    };
    d.divergence = [](const Vec2& p) { return p[1] == 0.0 ? kNaN : 1.0 / std::sqrt(std::abs(p[1])); };
    d.singular_set = {{1, 0.0, 2.0}};
    BvData bv;
    bv.dim = 2;
    bv.jumps = {{1, 0.0, 2.0}};  // d_y b^(1) = 2 delta(y)
    bv.ac_density = [](const Vec2& p) { return p[1] == 0.0 ? kInf : 1.0 / std::sqrt(std::abs(p[1])); };
    bv.ac_mass = [](const Box& q) {
        auto K = [](double y) { return sign0(y) * 2.0 * std::sqrt(std::abs(y)); };
        return (q.hi[0] - q.lo[0]) * (K(q.hi[1]) - K(q.lo[1]));
    };
    bv.weighted_tail = [](double N, double R) {
        if (!(N > 1.5)) throw ConfigError("shear_flow tail diverges for N <= 3/2");
        const double r0 = std::max(R, 0.0);
        const double line = 4.0 * std::pow(1.0 + r0, 1.0 - N) / (N - 1.0);
        // int_0^{2 pi} |sin phi|^{-1/2} dphi = 2 B(1/4, 1/2)
        const double angular = 2.0 * boost::math::beta(0.25, 0.5);
        const double radial = half_line_tail(std::sqrt(r0), 1.0, N);
        return line + angular * radial;
    };
    d.bv = bv;
    // Exact branch off the line: X' = s, Y = s (sqrt|Y0| + t)^2. Negative dt
    // runs the flow backward and stops on the line.
    d.branch_step = [](const Vec2& p, double dt, double s) {
        const double r0 = std::sqrt(std::abs(p[1]));
        const double run = std::max(dt, -r0);
        const double r = r0 + run;
        return Vec2{p[0] + s * run, s * r * r};
    };
    return d;
}

}  // namespace

double BvData::singular(const Box& q) const {
    double s = 0.0;
    for (const auto& j : jumps) {
        if (j.position < q.lo[j.axis] || j.position > q.hi[j.axis]) continue;
        double transverse = 1.0;
        if (dim == 2) {
            const int other = 1 - j.axis;
            transverse = q.hi[other] - q.lo[other];
        }
        s += j.magnitude * transverse;
    }
    return s;
}

bool DriftSpec::near_singular_set(const Vec2& x, double tol) const {
    for (const auto& s : singular_set)
        if (std::abs(x[s.axis] - s.position) <= tol) return true;
    return false;
}

DriftSpec catalog(const std::string& name, const std::vector<double>& params) {
    if (name == "shear_flow") return make_shear_flow();
    if (name == "sqrt_1d") return make_sqrt_1d();
    if (name == "sign_1d") return make_sign_1d();
    if (name == "smooth_sin") return make_smooth_sin();
    if (name == "constant") return make_constant(params);
    throw LookupError("unknown drift '" + name + "'");
}

std::vector<std::string> catalog_names() { return {"shear_flow", "sqrt_1d", "sign_1d", "smooth_sin", "constant"}; }

namespace {

DriftSpec zero_drift(int dim) {
    DriftSpec z = make_constant(dim == 1 ? std::vector<double>{0.0} : std::vector<double>{0.0, 0.0});
    z.name = "zero";
    return z;
}

// sup_{s >= a} c (s - a) / (1 + s^2) is attained at s = a + sqrt(a^2 + 1).
double truncated_growth(double a, double c) {
    const double s = a + std::sqrt(a * a + 1.0);
    return c * (s - a) / (1.0 + s * s);
}

}  // namespace

DriftSplit split_shear(double threshold) {
    if (!(threshold > 0.0)) throw ConfigError("split threshold must be positive");
    const double tau = threshold;
    DriftSpec parent = make_shear_flow();
    DriftSplit s;
    s.b1 = parent;
    s.b1.name = "shear_flow_b1";
    s.b1.field = [tau](const Vec2& p, double tb) {
        const double sg = sign_tb(p[1], tb);
        return Vec2{sg, sg * 2.0 * std::sqrt(std::min(std::abs(p[1]), tau))};
    };
    s.b1.divergence = [tau](const Vec2& p) {
        if (p[1] == 0.0) return kNaN;
        return std::abs(p[1]) < tau ? 1.0 / std::sqrt(std::abs(p[1])) : 0.0;
    };
    s.b1.bv.reset();
    s.b1.sup_norm = std::sqrt(1.0 + 4.0 * tau);
    s.b2 = parent;
    s.b2.name = "shear_flow_b2";
    s.b2.field = [tau](const Vec2& p, double) {
        const double ay = std::abs(p[1]);
        return Vec2{0.0, ay > tau ? sign0(p[1]) * 2.0 * (std::sqrt(ay) - std::sqrt(tau)) : 0.0};
    };
    s.b2.divergence = [tau](const Vec2& p) {
        const double ay = std::abs(p[1]);
        return ay > tau ? 1.0 / std::sqrt(ay) : 0.0;
    };
    s.b2.singular_set.clear();
    s.b2.bv.reset();
    s.b2.sup_norm.reset();
    s.b2.branch_step = nullptr;
    s.b1_sup = std::sqrt(1.0 + 4.0 * tau);
    // |b2| / (1 + |(x,y)|) is largest at x = 0.
    s.b2_growth = truncated_growth(std::sqrt(tau), 2.0);
    s.div_b2_sup = 1.0 / std::sqrt(tau);
    return s;
}

DriftSplit split_for(const DriftSpec& b, double threshold) {
    if (b.name == "shear_flow") return split_shear(threshold);
    if (b.name == "sqrt_1d") {
        if (!(threshold > 0.0)) throw ConfigError("split threshold must be positive");
        const double tau = threshold;
        DriftSplit s;
        s.b1 = b;
        s.b1.name = "sqrt_1d_b1";
        s.b1.field = [tau](const Vec2& x, double) { return Vec2{std::sqrt(std::min(std::abs(x[0]), tau)), 0.0}; };
        s.b1.bv.reset();
        s.b2 = zero_drift(1);
        s.b2.name = "sqrt_1d_b2";
        s.b2.field = [tau](const Vec2& x, double) {
            const double ax = std::abs(x[0]);
            return Vec2{ax > tau ? std::sqrt(ax) - std::sqrt(tau) : 0.0, 0.0};
        };
        s.b2.divergence = [tau](const Vec2& x) {
            const double ax = std::abs(x[0]);
            return ax > tau ? sign0(x[0]) / (2.0 * std::sqrt(ax)) : 0.0;
        };
        s.b2.sup_norm.reset();
        s.b1_sup = std::sqrt(tau);
        s.b2_growth = truncated_growth(std::sqrt(tau), 1.0);
        s.div_b2_sup = 0.5 / std::sqrt(tau);
        return s;
    }
    if (!b.sup_norm) throw UnsupportedError("drift '" + b.name + "' has no bounded split");
    DriftSplit s;
    s.b1 = b;
    s.b2 = zero_drift(b.dim);
    s.b1_sup = *b.sup_norm;
    s.b2_growth = 0.0;
    s.div_b2_sup = 0.0;
    return s;
}

double alpha_rate(const DriftSplit& split) {
    if (!split.b1_sup || !split.b2_growth || !split.div_b2_sup)
        throw ConfigError("drift split norms are not populated");
    return *split.b1_sup * *split.b1_sup + *split.b2_growth * *split.b2_growth + *split.div_b2_sup;
}

ProdiSerrin prodi_serrin_norm(const DriftSpec& b, double p, double q, const Box& region, double horizon,
                              int cells) {
    if (!(p > 1.0) || !(q > 1.0) || !std::isfinite(p) || !std::isfinite(q))
        throw ConfigError("Prodi-Serrin exponents must lie in (1, inf)");
    const int d = b.dim;
    const int n = cells > 0 ? cells : (d == 1 ? 4096 : 512);
    const double hx = (region.hi[0] - region.lo[0]) / n;
    const double hy = d == 1 ? 1.0 : (region.hi[1] - region.lo[1]) / n;
    double s = 0.0;
    for (int j = 0; j < (d == 1 ? 1 : n); ++j)
        for (int i = 0; i < n; ++i) {
            const Vec2 x{region.lo[0] + (i + 0.5) * hx, d == 1 ? 0.0 : region.lo[1] + (j + 0.5) * hy};
            s += std::pow(norm(b.eval(x), d), p);
        }
    s *= hx * hy;
    return {std::pow(horizon, 1.0 / q) * std::pow(s, 1.0 / p), 2.0 / q + d / p <= 1.0};
}

}  // namespace stochtr
