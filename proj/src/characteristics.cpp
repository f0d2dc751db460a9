#include "stochtr/characteristics.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "stochtr/parallel.hpp"
#include "stochtr/rng.hpp"

namespace stochtr {

namespace {

int step_count(double T, double dt) {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(T >= dt * (1.0 - 1e-12))) throw ConfigError("horizon must be at least one step");
    return static_cast<int>(std::lround(T / dt));
}

Vec2 drift(const DriftSpec& b, const Vec2& x, Direction dir, double tiebreak = 0.0) {
    const Vec2 v = b.eval(x, tiebreak);
    return dir == Direction::forward ? v : Vec2{-v[0], -v[1]};
}

Vec2 rk4(const DriftSpec& b, const Vec2& x, double h, Direction dir) {
    auto add = [](const Vec2& p, const Vec2& v, double s) { return Vec2{p[0] + s * v[0], p[1] + s * v[1]}; };
    const Vec2 k1 = drift(b, x, dir);
    const Vec2 k2 = drift(b, add(x, k1, 0.5 * h), dir);
    const Vec2 k3 = drift(b, add(x, k2, 0.5 * h), dir);
    const Vec2 k4 = drift(b, add(x, k3, h), dir);
    return {x[0] + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            x[1] + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])};
}

const JumpPlane* on_set(const DriftSpec& b, const Vec2& x) {
    for (const auto& s : b.singular_set)
        if (x[s.axis] == s.position) return &s;
    return nullptr;
}

}  // namespace

SelectionRule SelectionRule::delayed(double s, double sign) {
    if (!(s >= 0.0)) throw ConfigError("delay must be nonnegative");
    if (sign != 1.0 && sign != -1.0) throw ConfigError("delayed branch sign must be +1 or -1");
    return {Tag::delayed, s, sign};
}

SelectionRule SelectionRule::parse(const std::string& text) {
    if (text == "up") return up();
    if (text == "down") return down();
    if (text == "stay") return stay();
    if (text.rfind("delayed:", 0) == 0) {
        const auto p = text.find(':', 8);
        if (p == std::string::npos) throw ConfigError("delayed rule needs the form delayed:<s>:<+1|-1>");
        return delayed(std::stod(text.substr(8, p - 8)), std::stod(text.substr(p + 1)));
    }
    throw ConfigError("unknown selection rule '" + text + "'");
}

double SelectionRule::departure_sign() const {
    switch (tag) {
        case Tag::up: return 1.0;
        case Tag::down: return -1.0;
        case Tag::stay: return 0.0;
        case Tag::delayed: return sign;
    }
    return 0.0;
}

std::string SelectionRule::name() const {
    switch (tag) {
        case Tag::up: return "up";
        case Tag::down: return "down";
        case Tag::stay: return "stay";
        case Tag::delayed: {
            std::ostringstream os;
            os << "delayed:" << delay << ':' << (sign > 0 ? "+1" : "-1");
            return os.str();
        }
    }
    return "";
}

Vec2 shear_branches(double x0, double t, const SelectionRule& rule) {
    if (!(t >= 0.0)) throw ConfigError("time must be nonnegative");
    const double s = rule.departure_sign();
    const double run = t - rule.departure();
    if (s == 0.0 || run <= 0.0) return {x0, 0.0};
    return {x0 + s * run, s * run * run};
}

OdePath integrate_ode(const DriftSpec& b, const Vec2& x0, double T, double dt, const SelectionRule& rule,
                      Direction dir, const std::optional<Box>& box) {
    const int n = step_count(T, dt);
    const double h = T / n;
    const double tol = std::max(h, 1e-12);
    OdePath path;
    path.times.reserve(n + 1);
    path.states.reserve(n + 1);
    path.times.push_back(0.0);
    path.states.push_back(x0);
    Vec2 x = x0;
    for (int k = 0; k < n; ++k) {
        const double t = k * h;
        if (b.branch_step && b.near_singular_set(x, tol)) {
            if (on_set(b, x)) {
                const double s = dir == Direction::forward ? rule.departure_sign() : 0.0;
                const double dep = rule.departure();
                if (s != 0.0 && t + h > dep) x = b.branch_step(x, t >= dep ? h : t + h - dep, s);
            } else {
                // Off the set: the exact branch through x, run forward or backward.
                const JumpPlane* near = nullptr;
                for (const auto& p : b.singular_set)
                    if (std::abs(x[p.axis] - p.position) <= tol) near = &p;
                const double side = sign0(x[near->axis] - near->position);
                const double outward = b.eval(x)[near->axis] * side;
                if (outward > 0.0)
                    x = b.branch_step(x, dir == Direction::forward ? h : -h, side);
                else
                    x = rk4(b, x, h, dir);
            }
        } else {
            const Vec2 prev = x;
            x = rk4(b, x, h, dir);
            if (dir == Direction::backward)
                for (const auto& p : b.singular_set) {
                    const double a = prev[p.axis] - p.position, c = x[p.axis] - p.position;
                    if (a * c < 0.0) x[p.axis] = p.position;  // absorbed onto the set
                }
        }
        path.times.push_back(t + h);
        path.states.push_back(x);
        if (box && !box->contains(x)) {
            path.escaped = true;
            path.escape_time = t + h;
            break;
        }
    }
    return path;
}

Vec2 gaussian_increment(std::uint64_t seed, std::uint64_t path_index, std::uint32_t step, int dim, double dt,
                        std::uint32_t tag) {
    const auto z = PathStream(seed, path_index, tag).normal_pair(step);
    const double s = std::sqrt(dt);
    return {s * z[0], dim == 1 ? 0.0 : s * z[1]};
}

BrownianPath::BrownianPath(std::uint64_t seed, std::uint64_t path_index, int dim, double T, int fine_steps,
                           std::uint32_t tag)
    : dim_(dim), T_(T) {
    if (fine_steps < 1) throw ConfigError("Brownian path needs at least one step");
    fine_.resize(fine_steps);
    const double dt = T / fine_steps;
    for (int k = 0; k < fine_steps; ++k)
        fine_[k] = gaussian_increment(seed, path_index, static_cast<std::uint32_t>(k), dim, dt, tag);
}

std::vector<Vec2> BrownianPath::increments(int steps) const {
    const int nf = fine_steps();
    if (steps < 1 || nf % steps != 0) throw ConfigError("coarse step count must divide the fine step count");
    const int r = nf / steps;
    std::vector<Vec2> out(steps, Vec2{0.0, 0.0});
    for (int k = 0; k < steps; ++k)
        for (int i = 0; i < r; ++i) {
            out[k][0] += fine_[k * r + i][0];
            out[k][1] += fine_[k * r + i][1];
        }
    return out;
}

SdePath integrate_sde_with(const DriftSpec& b, Direction dir, const Vec2& x0, double dt,
                           const std::vector<Vec2>& increments, const SdeOptions& opt) {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    SdePath p;
    p.increments = increments;
    const std::size_t n = increments.size();
    if (opt.record_states) {
        p.times.reserve(n + 1);
        p.states.reserve(n + 1);
    }
    p.times.push_back(0.0);
    p.states.push_back(x0);
    Vec2 x = x0;
    for (std::size_t k = 0; k < n; ++k) {
        const Vec2 c = drift(b, x, dir, opt.tiebreak);
        x = {x[0] + c[0] * dt + increments[k][0], b.dim == 1 ? 0.0 : x[1] + c[1] * dt + increments[k][1]};
        const double t = (k + 1) * dt;
        if (opt.record_states || k + 1 == n) {
            p.times.push_back(t);
            p.states.push_back(x);
        }
        if (opt.box && !opt.box->contains(x)) {
            p.escaped = true;
            p.escape_time = t;
            if (!opt.record_states) {
                p.times.push_back(t);
                p.states.push_back(x);
            }
            break;
        }
    }
    return p;
}

SdePath integrate_sde(const DriftSpec& b, Direction dir, const Vec2& x0, double T, double dt, std::uint64_t seed,
                      std::uint64_t path_index, const SdeOptions& opt) {
    const int n = step_count(T, dt);
    const BrownianPath w(seed, path_index, b.dim, T, n);
    SdePath p = integrate_sde_with(b, dir, x0, T / n, w.fine(), opt);
    p.seed = seed;
    p.path_index = path_index;
    return p;
}

Vec2 sde_endpoint(const DriftSpec& b, Direction dir, const Vec2& x0, double T, double dt, std::uint64_t seed,
                  std::uint64_t path_index, double tiebreak, const std::optional<Box>& box, bool* escaped) {
    const int n = step_count(T, dt);
    const double h = T / n;
    const double sh = std::sqrt(h);
    const PathStream stream(seed, path_index);
    Vec2 x = x0;
    if (escaped) *escaped = false;
    for (int k = 0; k < n; ++k) {
        const auto z = stream.normal_pair(static_cast<std::uint32_t>(k));
        const Vec2 c = drift(b, x, dir, tiebreak);
        x = {x[0] + c[0] * h + sh * z[0], b.dim == 1 ? 0.0 : x[1] + c[1] * h + sh * z[1]};
        if (box && !box->contains(x)) {
            if (escaped) *escaped = true;
            break;
        }
    }
    return x;
}

PathEnsemble make_ensemble(const DriftSpec& b, Direction dir, const Vec2& x0, double T, double dt,
                           std::uint64_t seed, std::size_t n_paths, const SdeOptions& opt) {
    PathEnsemble e;
    e.base_seed = seed;
    e.drift = b.name;
    e.direction = dir;
    e.paths.resize(n_paths);
    parallel_for(n_paths, [&](std::size_t i) { e.paths[i] = integrate_sde(b, dir, x0, T, dt, seed, i, opt); });
    return e;
}

void write_paths_csv(std::ostream& os, const PathEnsemble& e, int dim) {
    os << std::setprecision(17);
    os << "# paths seed=" << e.base_seed << " drift=" << e.drift
       << " direction=" << (e.direction == Direction::forward ? "forward" : "backward") << '\n';
    os << (dim == 1 ? "path_index,t,x\n" : "path_index,t,x,y\n");
    for (const auto& p : e.paths)
        for (std::size_t k = 0; k < p.states.size(); ++k) {
            os << p.path_index << ',' << p.times[k] << ',' << p.states[k][0];
            if (dim == 2) os << ',' << p.states[k][1];
            os << '\n';
        }
}

}  // namespace stochtr
