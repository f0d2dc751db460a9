#include "stochtr/lab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "stochtr/commutator.hpp"
#include "stochtr/expectation.hpp"
#include "stochtr/parabolic.hpp"
#include "stochtr/parallel.hpp"
#include "stochtr/rng.hpp"
#include "stochtr/transport.hpp"

#ifndef STOCHTR_VERSION
#define STOCHTR_VERSION "0.1.0"
#endif

namespace stochtr::lab {

using json = nlohmann::json;

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string version() { return STOCHTR_VERSION; }

namespace {
std::string brief(double v) {
    std::ostringstream os;
    os << std::setprecision(8) << v;
    return os.str();
}
}  // namespace

std::string Diagnostic::str() const {
    std::string s = field + ": " + constraint;
    if (!detail.empty()) s += " (" + detail + ")";
    return s;
}

const std::vector<ExperimentInfo>& list_experiments() {
    static const std::vector<ExperimentInfo> reg{
        {"commutator-study", "L1 and pointwise commutator estimates along an eps ladder",
         "commutator estimate for a smooth even nonnegative convolution kernel"},
        {"anisotropy-study", "kernel functionals on random kernels and the rank-one anisotropy search",
         "Lambda(M, theta) and I(theta); smallness of Lambda on rank-one matrices"},
        {"shear-uniqueness", "deterministic non-uniqueness versus stochastic well-posedness",
         "compressible shear flow"},
        {"mc-vs-fd", "Feynman-Kac Monte Carlo against the FD parabolic solution",
         "E[beta(u)] solves the parabolic equation"},
        {"weak-form-residual", "self-convergence of Stratonovich/Ito or deterministic weak-form residuals",
         "Stratonovich to Ito conversion; weak solutions"},
        {"energy-gronwall", "weight identity, weighted energy envelope and BV tails",
         "uniqueness proof: weighted energy, Gronwall rate, tail estimate"},
    };
    return reg;
}

ValidationFailed::ValidationFailed(std::vector<Diagnostic> d)
    : std::runtime_error("config failed validation"), diagnostics(std::move(d)) {}

bool ValidationFailed::resource_only() const {
    return std::all_of(diagnostics.begin(), diagnostics.end(), [](const Diagnostic& d) { return d.resource; });
}

bool ExperimentReport::passed() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const Check* ExperimentReport::find_check(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

double ExperimentReport::metric(const std::string& name) const {
    for (const auto& [k, v] : metrics)
        if (k == name) return v;
    throw LookupError("no metric '" + name + "'");
}

json ExperimentReport::to_json() const {
    json j;
    j["experiment"] = experiment;
    j["seed"] = seed;
    j["version"] = version;
    j["config"] = config;
    json m = json::object();
    for (const auto& [k, v] : metrics) m[k] = v;
    j["metrics"] = m;
    json c = json::array();
    for (const auto& ch : checks) c.push_back({{"name", ch.name}, {"pass", ch.pass}, {"detail", ch.detail}});
    j["checks"] = c;
    j["files"] = files;
    j["passed"] = passed();
    j["wall_time_s"] = wall_time_s;
    return j;
}

namespace {

using Diags = std::vector<Diagnostic>;

// Typed access to one JSON object. Every read fills the echo tree with the value
// actually used; keys never read are reported as unknown when the reader dies.
class Reader {
public:
    Reader(const json* src, std::string path, json& echo, Diags& d)
        : src_(src), path_(std::move(path)), echo_(&echo), d_(&d) {
        if (!echo_->is_object()) *echo_ = json::object();
        if (src_ && !src_->is_object()) {
            fail(path_, "must be an object", src_->dump());
            src_ = nullptr;
        }
    }
    Reader(const Reader&) = delete;
    Reader& operator=(const Reader&) = delete;
    ~Reader() {
        if (!src_) return;
        for (const auto& [k, v] : src_->items())
            if (!used_.count(k)) d_->push_back({field(k), "unknown field", ""});
    }

    std::string field(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
    void fail(const std::string& f, const std::string& c, const std::string& detail = {}) {
        d_->push_back({f, c, detail});
    }
    bool has(const std::string& k) const { return src_ && src_->contains(k); }

    double num(const std::string& k, double def) {
        const json* p = get(k);
        double v = def;
        if (p) {
            if (p->is_number())
                v = p->get<double>();
            else
                fail(field(k), "must be a number", p->dump());
        }
        (*echo_)[k] = v;
        return v;
    }
    std::optional<double> opt_num(const std::string& k) {
        if (!has(k)) {
            used_.insert(k);
            return std::nullopt;
        }
        return num(k, 0.0);
    }
    long long integer(const std::string& k, long long def) {
        const json* p = get(k);
        long long v = def;
        if (p) {
            if (p->is_number_integer())
                v = p->get<long long>();
            else
                fail(field(k), "must be an integer", p->dump());
        }
        (*echo_)[k] = v;
        return v;
    }
    std::string str(const std::string& k, const std::string& def) {
        const json* p = get(k);
        std::string v = def;
        if (p) {
            if (p->is_string())
                v = p->get<std::string>();
            else
                fail(field(k), "must be a string", p->dump());
        }
        (*echo_)[k] = v;
        return v;
    }
    bool flag(const std::string& k, bool def) {
        const json* p = get(k);
        bool v = def;
        if (p) {
            if (p->is_boolean())
                v = p->get<bool>();
            else
                fail(field(k), "must be true or false", p->dump());
        }
        (*echo_)[k] = v;
        return v;
    }
    std::vector<double> nums(const std::string& k, const std::vector<double>& def) {
        const json* p = get(k);
        std::vector<double> v = def;
        if (p) {
            if (p->is_array() && std::all_of(p->begin(), p->end(), [](const json& e) { return e.is_number(); }))
                v = p->get<std::vector<double>>();
            else
                fail(field(k), "must be an array of numbers", p->dump());
        }
        (*echo_)[k] = v;
        return v;
    }
    std::vector<std::string> strs(const std::string& k, const std::vector<std::string>& def) {
        const json* p = get(k);
        std::vector<std::string> v = def;
        if (p) {
            if (p->is_array() && std::all_of(p->begin(), p->end(), [](const json& e) { return e.is_string(); }))
                v = p->get<std::vector<std::string>>();
            else
                fail(field(k), "must be an array of strings", p->dump());
        }
        (*echo_)[k] = v;
        return v;
    }
    Vec2 vec(const std::string& k, const Vec2& def, int dim) {
        std::vector<double> d(def.begin(), def.begin() + dim);
        const auto v = nums(k, d);
        if (static_cast<int>(v.size()) != dim) {
            fail(field(k), "must have " + std::to_string(dim) + " entries", std::to_string(v.size()) + " given");
            return def;
        }
        Vec2 out{0.0, 0.0};
        for (int i = 0; i < dim; ++i) out[i] = v[i];
        return out;
    }
    std::vector<Vec2> points(const std::string& k, const std::vector<Vec2>& def, int dim) {
        const json* p = get(k);
        std::vector<Vec2> v = def;
        if (p) {
            bool ok = p->is_array();
            std::vector<Vec2> read;
            if (ok)
                for (const auto& e : *p) {
                    if (!e.is_array() || static_cast<int>(e.size()) != dim ||
                        !std::all_of(e.begin(), e.end(), [](const json& c) { return c.is_number(); })) {
                        ok = false;
                        break;
                    }
                    Vec2 q{0.0, 0.0};
                    for (int i = 0; i < dim; ++i) q[i] = e[i].get<double>();
                    read.push_back(q);
                }
            if (ok)
                v = read;
            else
                fail(field(k), "must be an array of " + std::to_string(dim) + "-vectors", p->dump());
        }
        json e = json::array();
        for (const Vec2& q : v) e.push_back(std::vector<double>(q.begin(), q.begin() + dim));
        (*echo_)[k] = e;
        return v;
    }
    Reader sub(const std::string& k) { return Reader(get(k), field(k), (*echo_)[k], *d_); }
    /// Array of objects under k, or `def` when absent; read elements with element().
    const json& objects(const std::string& k, const json& def) {
        const json* p = get(k);
        if (p && !p->is_array()) {
            fail(field(k), "must be an array of objects", p->dump());
            p = nullptr;
        }
        const json& src = p ? *p : def;
        (*echo_)[k] = json::array();
        for (std::size_t i = 0; i < src.size(); ++i) (*echo_)[k].push_back(json::object());
        return src;
    }
    Reader element(const std::string& k, const json& src, std::size_t i) {
        return Reader(&src[i], field(k) + "[" + std::to_string(i) + "]", (*echo_)[k][i], *d_);
    }
    void mark(const std::string& k) { used_.insert(k); }

private:
    const json* get(const std::string& k) {
        used_.insert(k);
        if (!src_) return nullptr;
        auto it = src_->find(k);
        return it == src_->end() ? nullptr : &*it;
    }

    const json* src_;
    std::string path_;
    json* echo_;
    Diags* d_;
    std::set<std::string> used_;
};

// ---- output -------------------------------------------------------------------

struct Context {
    std::filesystem::path dir;
    std::string header;
    ExperimentReport* rep;

    void csv(const std::string& name, const std::function<void(std::ostream&)>& body) {
        std::ofstream os(dir / name, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
        os << header;
        body(os);
        rep->files.push_back(name);
    }
    void metric(const std::string& name, double v) { rep->metrics.emplace_back(name, v); }
    void check(const std::string& name, bool pass, const std::string& detail) {
        rep->checks.push_back({name, pass, detail});
    }
};

struct Plan {
    double bytes = 0.0;
    std::function<void(Context&)> exec;
};

// ---- shared parsing -----------------------------------------------------------

std::optional<DriftSpec> read_drift(Reader& r, const std::string& def, const std::vector<double>& defp) {
    const auto name = r.str("name", def);
    const auto params = r.nums("params", name == def ? defp : std::vector<double>{});
    try {
        return catalog(name, params);
    } catch (const std::exception& e) {
        r.fail(r.field("name"), "must name a catalog drift", e.what());
        return std::nullopt;
    }
}

std::optional<InitialDatum> read_datum(Reader& r, int dim, const std::string& def, const std::vector<double>& defp) {
    const auto name = r.str("name", def);
    const auto params = r.nums("params", name == def ? defp : std::vector<double>{});
    try {
        return datum_catalog(name, dim, params);
    } catch (const std::exception& e) {
        r.fail(r.field("name"), "must name an initial datum", e.what());
        return std::nullopt;
    }
}

std::optional<Renormalization> read_beta(Reader& r, const std::string& key, const std::string& def) {
    const auto tag = r.str(key, def);
    try {
        return Renormalization::from_name(tag);
    } catch (const std::exception& e) {
        r.fail(r.field(key), "must name a renormalization", e.what());
        return std::nullopt;
    }
}

Box read_box(Reader& r, int dim, const Box& def) {
    Box b{dim, r.vec("lo", def.lo, dim), r.vec("hi", def.hi, dim)};
    for (int k = 0; k < dim; ++k)
        if (!(b.lo[k] < b.hi[k])) r.fail(r.field("lo"), "lo < hi per axis", "axis " + std::to_string(k));
    return b;
}

std::optional<TestFunction> read_test_function(Reader& r, int dim, const Vec2& c, const Vec2& rad) {
    const Vec2 center = r.vec("center", c, dim);
    const Vec2 radius = r.vec("radius", rad, dim);
    for (int k = 0; k < dim; ++k)
        if (!(radius[k] > 0)) {
            r.fail(r.field("radius"), "radius > 0", brief(radius[k]));
            return std::nullopt;
        }
    return TestFunction(dim, center, radius);
}

std::string box_str(const Box& b) {
    std::string s = "[" + brief(b.lo[0]) + ", " + brief(b.hi[0]) + "]";
    if (b.dim == 2) s += " x [" + brief(b.lo[1]) + ", " + brief(b.hi[1]) + "]";
    return s;
}

void require_positive(Reader& r, const std::string& k, double v) {
    if (!(v > 0)) r.fail(r.field(k), k + " > 0", brief(v));
}

bool is_multiple(double t, double dt) {
    const double q = t / dt;
    return std::abs(q - std::round(q)) <= 1e-9 * std::max(1.0, q);
}

bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 0; i + 1 < v.size(); ++i)
        if (!(v[i + 1] < v[i])) return false;
    return true;
}

// FD grids over a box, one per resolution; empty when the box is not a multiple of h.
std::vector<GridSpec> fd_grids(Reader& r, int dim, const Box& box, const std::vector<double>& res) {
    std::vector<GridSpec> out;
    for (double h : res) {
        if (!(h > 0)) {
            r.fail(r.field("resolutions"), "h > 0", brief(h));
            return {};
        }
        std::array<int, 2> n{1, 1};
        for (int k = 0; k < dim; ++k) {
            const double len = box.hi[k] - box.lo[k];
            n[k] = static_cast<int>(std::lround(len / h)) + 1;
            if (std::abs((n[k] - 1) * h - len) > 1e-9 * len) {
                r.fail(r.field("box"), "box side a multiple of h",
                       "side " + brief(len) + ", h = " + brief(h));
                return {};
            }
        }
        try {
            out.push_back(GridSpec::with_spacing(dim, box.lo, h, n));
        } catch (const std::exception& e) {
            r.fail(r.field("resolutions"), "grid of at least 8 nodes per axis", e.what());
            return {};
        }
    }
    return out;
}

struct FdParsed {
    FdSetup setup;
    std::vector<GridSpec> grids;
    bool ok = false;
};

FdParsed read_fd(Reader& r, const DriftSpec& b, double t, const std::vector<Vec2>& probes, const Box& def_box,
                 const std::vector<double>& def_res, const std::string& def_scheme, const std::string& def_bc) {
    FdParsed p;
    Reader rb = r.sub("box");
    p.setup.box = read_box(rb, b.dim, def_box);
    p.setup.resolutions = r.nums("resolutions", def_res);
    const auto scheme = r.str("scheme", def_scheme);
    const auto bc = r.str("boundary", def_bc);
    p.setup.dt = r.opt_num("dt");
    bool ok = true;
    try {
        p.setup.scheme = parse_scheme(scheme);
    } catch (const std::exception& e) {
        r.fail(r.field("scheme"), "must name an FD scheme", e.what());
        ok = false;
    }
    try {
        p.setup.boundary = parse_boundary(bc);
    } catch (const std::exception& e) {
        r.fail(r.field("boundary"), "must name a boundary condition", e.what());
        ok = false;
    }
    if (p.setup.resolutions.size() < 2) {
        r.fail(r.field("resolutions"), "at least two resolutions", std::to_string(p.setup.resolutions.size()));
        return p;
    }
    if (!strictly_decreasing(p.setup.resolutions)) {
        r.fail(r.field("resolutions"), "strictly decreasing (coarse to fine)");
        return p;
    }
    p.grids = fd_grids(r, b.dim, p.setup.box, p.setup.resolutions);
    if (p.grids.empty() || !ok) return p;
    if (p.setup.dt) {
        require_positive(r, "dt", *p.setup.dt);
        for (const auto& g : p.grids) {
            const double bound = stable_dt(b, g, p.setup.scheme);
            if (*p.setup.dt > bound)
                r.fail(r.field("dt"),
                       p.setup.scheme == Scheme::explicit_upwind
                           ? "stability bound dt <= 0.9 / max sum_k (|b_k|/h + 1/h^2)"
                           : "stability bound dt <= 0.9 / max sum_k |b_k|/h",
                       "dt = " + brief(*p.setup.dt) + " > bound = " + brief(bound) + " at h = " + brief(g.h(0)));
        }
    }
    if (!probes.empty() && t > 0) {
        FdReference probe;
        probe.setup = p.setup;
        probe.t = t;
        probe.grids = {p.grids.front()};
        try {
            probe.check_reach(b, probes);
        } catch (const DomainError& e) {
            r.fail(r.field("box"), "probe points interior: boundary-influence radius + 2h from the box edge",
                   "box " + box_str(p.setup.box) + ", " + e.what());
            return p;
        }
    }
    p.ok = true;
    return p;
}

double fd_bytes(const std::vector<GridSpec>& grids) {
    double s = 0.0;
    for (const auto& g : grids) s += static_cast<double>(g.size()) * 8.0 * 8.0;
    return s;
}

std::vector<Vec2> lattice(const std::vector<double>& xs, const std::vector<double>& ys) {
    std::vector<Vec2> p;
    for (double y : ys)
        for (double x : xs) p.push_back({x, y});
    return p;
}

// ---- deterministic weak-form study (shear flow) -------------------------------

struct DetResidual {
    InitialDatum u0;
    std::vector<SelectionRule> rules;
    std::optional<TestFunction> phi;
    std::vector<double> h, dt;
    double t = 0.5;
    Box domain;
    double residual_max = 5e-3, ratio_min = 1.8;
};

std::optional<DetResidual> read_det_residual(Reader& r, const InitialDatum& u0, double t) {
    DetResidual d;
    d.u0 = u0;
    d.t = t;
    bool ok = true;
    for (const auto& s : r.strs("rules", {"up", "down"})) {
        try {
            d.rules.push_back(SelectionRule::parse(s));
        } catch (const std::exception& e) {
            r.fail(r.field("rules"), "must name selection rules", e.what());
            ok = false;
        }
    }
    for (const auto& rule : d.rules)
        if (rule.tag == SelectionRule::Tag::stay) {
            r.fail(r.field("rules"), "transported fill needs a departing rule", rule.name());
            ok = false;
        }
    {
        Reader tf = r.sub("test_function");
        d.phi = read_test_function(tf, 2, {0.1, 0.0}, {0.6, 0.5});
    }
    {
        Reader dom = r.sub("domain");
        d.domain = read_box(dom, 2, Box{2, {-2, -2}, {2, 2}});
    }
    d.h = r.nums("h", {1.0 / 128, 1.0 / 256});
    d.dt = r.nums("dt", {1.0 / 512, 1.0 / 1024});
    d.residual_max = r.num("residual_max", 5e-3);
    d.ratio_min = r.num("ratio_min", 1.8);
    if (d.h.size() < 2 || d.h.size() != d.dt.size()) {
        r.fail(r.field("h"), "at least two levels, as many h as dt",
               std::to_string(d.h.size()) + " h, " + std::to_string(d.dt.size()) + " dt");
        ok = false;
    } else {
        if (!strictly_decreasing(d.h)) {
            r.fail(r.field("h"), "strictly decreasing");
            ok = false;
        }
        for (double dt : d.dt)
            if (!(dt > 0) || !is_multiple(t, dt)) {
                r.fail(r.field("dt"), "dt > 0 and t a multiple of dt", "t = " + brief(t) + ", dt = " + brief(dt));
                ok = false;
            }
        for (double h : d.h)
            if (!(h > 0)) {
                r.fail(r.field("h"), "h > 0", brief(h));
                ok = false;
            }
    }
    if (d.phi && !d.phi->support().inside(d.domain)) {
        r.fail(r.field("test_function"), "support inside the domain",
               "support " + box_str(d.phi->support()) + ", domain " + box_str(d.domain));
        ok = false;
    }
    if (!d.phi || !ok) return std::nullopt;
    return d;
}

void run_det_residual(Context& ctx, const DriftSpec& b, const DetResidual& d, const std::string& file) {
    std::vector<std::vector<double>> res(d.rules.size());
    for (std::size_t i = 0; i < d.rules.size(); ++i) {
        DeterministicSolution u(b, d.u0, d.rules[i], VacuumFill::transported());
        for (std::size_t l = 0; l < d.h.size(); ++l)
            res[i].push_back(
                weak_form_residual(u.evaluator(), b, *d.phi, d.t, WeakMode::deterministic, d.h[l], d.dt[l], d.domain)
                    .residual);
    }
    ctx.csv(file, [&](std::ostream& os) {
        os << std::setprecision(17) << "rule,h,dt,t,residual\n";
        for (std::size_t i = 0; i < d.rules.size(); ++i)
            for (std::size_t l = 0; l < d.h.size(); ++l)
                os << d.rules[i].name() << ',' << d.h[l] << ',' << d.dt[l] << ',' << d.t << ',' << res[i][l] << '\n';
    });
    for (std::size_t i = 0; i < d.rules.size(); ++i) {
        const auto& r = res[i];
        const std::string name = d.rules[i].name();
        // a level already at round-off (exact solutions) counts as converged
        double worst = std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l + 1 < r.size(); ++l)
            if (r[l + 1] > 1e-14) worst = std::min(worst, r[l] / r[l + 1]);
        ctx.metric("residual_fine_" + name, r.back());
        if (std::isfinite(worst)) ctx.metric("residual_ratio_min_" + name, worst);
        ctx.check("residual_convergence_" + name, r.back() <= d.residual_max && worst >= d.ratio_min,
                  "fine residual " + brief(r.back()) + " <= " + brief(d.residual_max) + ", min ratio " + brief(worst) +
                      " >= " + brief(d.ratio_min));
    }
}

// ---- commutator-study ----------------------------------------------------------

Plan plan_commutator(Reader& top, std::uint64_t) {
    Plan plan;
    std::optional<DriftSpec> b;
    {
        Reader r = top.sub("drift");
        b = read_drift(r, "sign_1d", {});
    }
    const int dim = b ? b->dim : 1;
    std::optional<InitialDatum> u0;
    {
        Reader r = top.sub("datum");
        u0 = read_datum(r, dim, "sign_x", {});
    }
    std::optional<Kernel> kernel;
    {
        Reader r = top.sub("kernel");
        const auto type = r.str("type", "isotropic");
        try {
            if (type == "isotropic")
                kernel = Kernel::isotropic(dim);
            else if (type == "aligned")
                kernel = Kernel::aligned(dim, r.vec("direction", {1, 0}, 2), r.num("aspect", 2.0));
            else if (type == "matrix") {
                const auto a = r.nums("matrix", dim == 1 ? std::vector<double>{1} : std::vector<double>{1, 0, 0, 1});
                kernel = Kernel::from_descriptor({{"dim", dim}, {"A", a}});
            } else
                r.fail(r.field("type"), "one of isotropic, aligned, matrix", type);
        } catch (const std::exception& e) {
            r.fail(r.field("type"), "admissible kernel", e.what());
        }
    }
    // default 1D grid: nodes at odd multiples of h/2, never on the jump at 0
    const double h_def = dim == 1 ? 1.0 / 512 : 1.0 / 256;
    const double c_def = -1.5 + 0.5 * h_def;
    const double n_def = 3.0 / h_def;
    std::optional<GridSpec> grid;
    {
        Reader r = top.sub("grid");
        const double h = r.num("h", h_def);
        const Vec2 lo = r.vec("lo", {c_def, c_def}, dim);
        std::vector<double> nd = r.nums("n", dim == 1 ? std::vector<double>{n_def} : std::vector<double>{n_def, n_def});
        if (static_cast<int>(nd.size()) != dim)
            r.fail(r.field("n"), "one count per axis");
        else {
            std::array<int, 2> n{static_cast<int>(nd[0]), dim == 2 ? static_cast<int>(nd[1]) : 1};
            try {
                grid = GridSpec::with_spacing(dim, lo, h, n);
            } catch (const std::exception& e) {
                r.fail(r.field("n"), "h > 0 and at least 8 nodes per axis", e.what());
            }
        }
    }
    Box region;
    {
        Reader r = top.sub("region");
        const double q = dim == 1 ? 1.0 : 0.5;
        region = read_box(r, dim, Box{dim, {-q, -q}, {q, q}});
    }
    const auto ladder = top.nums("eps_ladder", {0.2, 0.1, 0.05, 0.025, 0.0125});
    const bool pointwise = top.flag("pointwise", true);
    const double l1_tol = top.num("vanishing_tol", 1e-10);
    const double slack = top.num("bound_slack", 1.1);
    const double decay_min = top.num("decay_factor", 4.0);
    const double ratio_factor = top.num("ratio_factor", 2.0);

    bool ok = b && u0 && kernel && grid;
    if (ladder.empty() || !strictly_decreasing(ladder) || ladder.back() <= 0) {
        top.fail("eps_ladder", "non-empty, positive, strictly decreasing");
        ok = false;
    }
    if (b && kernel && kernel->dim() != dim) {
        top.fail("kernel", "kernel dimension equals the drift dimension");
        ok = false;
    }
    if (b && !b->bv) {
        top.fail("drift.name", "drift with total-variation data", b->name);
        ok = false;
    }
    if (ok) {
        for (double e : ladder)
            if (e < 2.0 * grid->max_h())
                top.fail("eps_ladder", "eps >= 2h", "eps = " + brief(e) + " < 2h = " + brief(2.0 * grid->max_h()));
        const Box need = region.enlarged(ladder.front());
        if (!need.inside(grid->domain()))
            top.fail("region", "region + max eps inside the grid",
                     "region + " + brief(ladder.front()) + " = " + box_str(need) + ", grid " + box_str(grid->domain()));
        plan.bytes = static_cast<double>(grid->size()) * 8.0 * 6.0;
    }
    if (!ok) return plan;

    plan.exec = [=](Context& ctx) {
        const auto u = GridFunction::sample(*grid, *u0);
        const auto rep = pointwise ? pointwise_bound_study(u, *b, *kernel, ladder, region)
                                   : l1_estimate_study(u, *b, *kernel, ladder, region);
        ctx.csv("commutator.csv", [&](std::ostream& os) { rep.write_csv(os); });
        ctx.metric("i_theta", rep.i_theta);
        ctx.metric("sup_u", rep.sup_u);
        ctx.metric("l1_first", rep.l1_values.front());
        ctx.metric("l1_last", rep.l1_values.back());
        ctx.metric("skipped_nodes", static_cast<double>(rep.skipped_nodes));
        const bool trivial = b->name == "constant";
        if (trivial) {
            const double worst = *std::max_element(rep.l1_values.begin(), rep.l1_values.end());
            ctx.check("vanishing_commutator", worst <= l1_tol, "max l1 " + brief(worst) + " <= " + brief(l1_tol));
        } else {
            ctx.check("l1_bound", rep.l1_bound_holds(slack), "l1 <= " + brief(slack) + " (bound_bv + bound_ac)");
            if (!b->bv->jumps.empty() && b->bv->absolutely_continuous(region) == 0.0) {
                bool all = true;
                double worst = 0.0;
                for (std::size_t i = 0; i < rep.l1_values.size(); ++i) {
                    const double r = rep.l1_values[i] / (slack * rep.bound_bv[i]);
                    worst = std::max(worst, r);
                    all = all && r <= 1.0;
                }
                ctx.metric("singular_bound_usage", worst);
                ctx.check("singular_bound", all,
                          "max l1 / (" + brief(slack) + " L I(theta) |D^s b|) = " + brief(worst) + " <= 1");
            } else {
                const double f = rep.l1_values.front() / rep.l1_values.back();
                ctx.metric("decay_total", f);
                ctx.check("decay", f >= decay_min, "l1(eps_first) / l1(eps_last) = " + brief(f) + " >= " + brief(decay_min));
            }
        }
        if (pointwise) {
            double lo = 1e300, hi = 0.0;
            for (double v : rep.ratio_sup) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (!rep.ratio_sup.empty()) {
                ctx.metric("ratio_sup_min", lo);
                ctx.metric("ratio_sup_max", hi);
            }
            ctx.check("pointwise_ratio_stable", rep.ratio_stable(ratio_factor),
                      rep.trivially_satisfied ? std::string("trivially satisfied")
                                              : "ratio_sup within " + brief(ratio_factor) + "x of the first eps");
        }
    };
    return plan;
}

// ---- anisotropy-study ----------------------------------------------------------

double op_norm(const Mat2& M) {
    const double s = M[0] * M[0] + M[1] * M[1] + M[2] * M[2] + M[3] * M[3];
    const double det = M[0] * M[3] - M[1] * M[2];
    return std::sqrt(0.5 * (s + std::sqrt(std::max(0.0, s * s - 4.0 * det * det))));
}

Plan plan_anisotropy(Reader& top, std::uint64_t seed) {
    Plan plan;
    const Vec2 eta = top.vec("eta", {1, 0}, 2);
    const Vec2 zeta = top.vec("zeta", {0, 1}, 2);
    const long long budget = top.integer("budget", 20);
    const double target = top.num("ratio_target", 0.2);
    const long long trials = top.integer("random_trials", 50);
    const double tol = top.num("tol", 1e-3);
    const double rel_tol = top.num("rel_tol", 1e-10);
    bool ok = true;
    if (budget < 1 || budget > 60) {
        top.fail("budget", "1 <= budget <= 60", std::to_string(budget));
        ok = false;
    }
    if (trials < 0) {
        top.fail("random_trials", "random_trials >= 0", std::to_string(trials));
        ok = false;
    }
    if (norm(eta, 2) == 0.0 || norm(zeta, 2) == 0.0) {
        top.fail("eta", "eta and zeta non-zero");
        ok = false;
    }
    if (!ok) return plan;
    plan.exec = [=](Context& ctx) {
        const Mat2 M = outer(eta, zeta);
        const double iso = lambda_functional(M, Kernel::isotropic(2));
        std::vector<RankOneSearch> ladder;
        for (int k = 1; k <= budget; ++k) ladder.push_back(minimize_lambda_rank_one(eta, zeta, k));
        const auto& best = ladder.back();
        const double trace_best = lambda_functional({1, 0, 0, 1}, best.kernel);
        ctx.csv("search.csv", [&](std::ostream& os) {
            os << std::setprecision(17) << "budget,aspect,lambda,ratio\n";
            for (std::size_t k = 0; k < ladder.size(); ++k)
                os << k + 1 << ',' << ladder[k].aspect << ',' << ladder[k].lambda << ',' << ladder[k].lambda / iso << '\n';
        });
        ctx.metric("lambda_iso", iso);
        ctx.metric("lambda_best", best.lambda);
        ctx.metric("aspect_best", best.aspect);
        ctx.metric("lambda_identity_best", trace_best);
        ctx.check("rank_one_ratio", best.lambda <= target * iso,
                  "Lambda_best / Lambda_iso = " + brief(best.lambda / iso) + " <= " + brief(target));
        ctx.check("trace_bound_best", trace_best >= 2.0 - tol,
                  "Lambda(I, theta_best) = " + brief(trace_best) + " >= " + brief(2.0 - tol));

        struct Row {
            double angle, aspect, c, I, lm, ln, lc, ls, trace, opn;
        };
        std::vector<Row> rows(static_cast<std::size_t>(trials));
        parallel_for(rows.size(), [&](std::size_t i) {
            const PathStream s(seed, i, 7);
            const auto u0 = s.uniform_pair(0), u1 = s.uniform_pair(1), u2 = s.uniform_pair(2), u3 = s.uniform_pair(3),
                       u4 = s.uniform_pair(4);
            Row r{};
            r.angle = kPi * u0[0];
            r.aspect = 1.0 + 5.0 * u0[1];
            const Mat2 A{-2 + 4 * u1[0], -2 + 4 * u1[1], -2 + 4 * u2[0], -2 + 4 * u2[1]};
            const Mat2 B{-2 + 4 * u3[0], -2 + 4 * u3[1], -2 + 4 * u4[0], -2 + 4 * u4[1]};
            r.c = -3.0 + 6.0 * s.uniform_pair(5)[0];
            const Kernel k = Kernel::aligned(2, {std::cos(r.angle), std::sin(r.angle)}, r.aspect);
            r.I = i_functional(k);
            r.lm = lambda_functional(A, k);
            r.ln = lambda_functional(B, k);
            r.lc = lambda_functional({r.c * A[0], r.c * A[1], r.c * A[2], r.c * A[3]}, k);
            r.ls = lambda_functional({A[0] + B[0], A[1] + B[1], A[2] + B[2], A[3] + B[3]}, k);
            r.trace = std::abs(A[0] + A[3]);
            r.opn = op_norm(A);
            rows[i] = r;
        });
        bool i_ok = true, lo_ok = true, hi_ok = true, hom_ok = true, sub_ok = true;
        double hom_worst = 0.0, sub_worst = -1e300;
        for (const auto& r : rows) {
            i_ok = i_ok && r.I >= 2.0 - tol;
            lo_ok = lo_ok && r.lm >= r.trace - tol;
            hi_ok = hi_ok && r.lm <= r.opn * r.I + tol;
            const double hom = std::abs(r.lc - std::abs(r.c) * r.lm) / std::max(std::abs(r.c) * r.lm, 1e-300);
            hom_worst = std::max(hom_worst, hom);
            hom_ok = hom_ok && hom <= rel_tol;
            const double sub = (r.ls - (r.lm + r.ln)) / (r.lm + r.ln);
            sub_worst = std::max(sub_worst, sub);
            sub_ok = sub_ok && sub <= rel_tol;
        }
        ctx.csv("random_kernels.csv", [&](std::ostream& os) {
            os << std::setprecision(17) << "trial,angle,aspect,I,lambda_M,abs_trace_M,norm_M,c,lambda_cM,lambda_M_plus_N,lambda_N\n";
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const auto& r = rows[i];
                os << i << ',' << r.angle << ',' << r.aspect << ',' << r.I << ',' << r.lm << ',' << r.trace << ','
                   << r.opn << ',' << r.c << ',' << r.lc << ',' << r.ls << ',' << r.ln << '\n';
            }
        });
        if (trials > 0) {
            ctx.metric("homogeneity_rel_err_max", hom_worst);
            ctx.metric("subadditivity_excess_max", sub_worst);
            ctx.check("I_lower_bound", i_ok, "I(theta) >= d - " + brief(tol) + " on every trial");
            ctx.check("lambda_trace_lower_bound", lo_ok, "Lambda(M) >= |tr M| - " + brief(tol));
            ctx.check("lambda_norm_upper_bound", hi_ok, "Lambda(M) <= |M| I(theta) + " + brief(tol));
            ctx.check("homogeneity", hom_ok, "max relative error " + brief(hom_worst) + " <= " + brief(rel_tol));
            ctx.check("subadditivity", sub_ok, "max relative excess " + brief(sub_worst) + " <= " + brief(rel_tol));
        }
    };
    return plan;
}

// ---- mc-vs-fd and shear-uniqueness ---------------------------------------------

struct McParsed {
    std::vector<Vec2> probes;
    long long n_paths = 0;
    double dt = 0.0;
    bool ok = true;
};

McParsed read_mc(Reader& r, int dim, const std::vector<Vec2>& def_probes, long long def_paths, double def_dt,
                 double t) {
    McParsed m;
    m.probes = r.points("probes", def_probes, dim);
    m.n_paths = r.integer("n_paths", def_paths);
    m.dt = r.num("dt", def_dt);
    if (m.probes.empty()) {
        r.fail(r.field("probes"), "at least one probe point");
        m.ok = false;
    }
    if (m.n_paths < 100) {
        r.fail(r.field("n_paths"), "n_paths >= 100", std::to_string(m.n_paths));
        m.ok = false;
    }
    if (!(m.dt > 0) || m.dt > t) {
        r.fail(r.field("dt"), "0 < dt <= t", "dt = " + brief(m.dt) + ", t = " + brief(t));
        m.ok = false;
    }
    return m;
}

Plan plan_mc_vs_fd(Reader& top, std::uint64_t seed) {
    Plan plan;
    std::optional<DriftSpec> b;
    {
        Reader r = top.sub("drift");
        b = read_drift(r, "smooth_sin", {});
    }
    const int dim = b ? b->dim : 1;
    const bool shear = b && b->name == "shear_flow";
    std::optional<InitialDatum> u0;
    {
        Reader r = top.sub("datum");
        u0 = read_datum(r, dim, shear ? "indicator_y_pos" : "sin", {});
    }
    const auto beta = read_beta(top, "renormalization", "square");
    const double t = top.num("t", shear ? 0.5 : 0.25);
    require_positive(top, "t", t);
    std::vector<Vec2> def_probes;
    if (dim == 1)
        for (int i = 0; i <= 20; ++i) def_probes.push_back({-2.0 + 0.2 * i, 0});
    else
        def_probes = lattice({-1, -0.5, 0, 0.5, 1}, {-0.5, -0.25, 0, 0.25, 0.5});
    McParsed mc;
    {
        Reader r = top.sub("mc");
        mc = read_mc(r, dim, def_probes, 100000, 1e-3, t);
    }
    if (!b || !u0 || !beta || !mc.ok || !(t > 0)) return plan;
    FdParsed fd;
    {
        Reader r = top.sub("fd");
        fd = dim == 1 ? read_fd(r, *b, t, mc.probes, Box{1, {-6, 0}, {6, 0}}, {1.0 / 128, 1.0 / 256},
                                "explicit-upwind", "copy-out")
                      : read_fd(r, *b, t, mc.probes, Box{2, {-9, -9}, {9, 9}}, {1.0 / 32, 1.0 / 64},
                                "implicit-diffusion", "copy-out");
    }
    if (!fd.ok) return plan;
    plan.bytes = fd_bytes(fd.grids);
    plan.exec = [=, b = *b, u0 = *u0, beta = *beta](Context& ctx) {
        const auto ref = fd_reference(b, u0, beta, t, fd.setup);
        const auto rep = mc_vs_fd(b, u0, beta, t, mc.probes, ref, static_cast<std::size_t>(mc.n_paths), mc.dt, seed);
        ctx.csv("mc_fd.csv", [&](std::ostream& os) { rep.write_csv(os, b.dim); });
        double worst = 0.0;
        std::size_t unreliable = 0;
        for (const auto& r : rep.rows) {
            worst = std::max(worst, r.gap / r.tol);
            unreliable += r.unreliable ? 1 : 0;
        }
        ctx.metric("probes", static_cast<double>(rep.rows.size()));
        ctx.metric("boundary_reach", rep.boundary_reach);
        ctx.metric("worst_gap_over_tol", worst);
        ctx.metric("unreliable_points", static_cast<double>(unreliable));
        ctx.check("mc_fd_agreement", rep.all_pass(),
                  "|MC - FD| <= 3 stderr + FD error at all " + std::to_string(rep.rows.size()) +
                      " probes; worst gap/tol " + brief(worst));
    };
    return plan;
}

Plan plan_shear(Reader& top, std::uint64_t seed) {
    Plan plan;
    const DriftSpec b = catalog("shear_flow");
    std::optional<InitialDatum> u0;
    {
        Reader r = top.sub("datum");
        u0 = read_datum(r, 2, "tilted_step_y", {});
    }
    const auto beta = read_beta(top, "renormalization", "square");
    const double t = top.num("t", 0.5);
    require_positive(top, "t", t);
    const double gap_min = top.num("vacuum_gap_min", 0.5);
    const long long gap_samples = top.integer("vacuum_samples", 64);
    if (gap_samples < 1) top.fail("vacuum_samples", "vacuum_samples >= 1", std::to_string(gap_samples));
    if (!u0 || !(t > 0)) return plan;

    std::optional<DetResidual> det;
    {
        Reader r = top.sub("deterministic");
        det = read_det_residual(r, *u0, t);
    }
    McParsed mc;
    std::vector<double> tiebreaks;
    {
        Reader r = top.sub("stochastic");
        mc = read_mc(r, 2, lattice({-1, -0.5, 0, 0.5, 1}, {-0.5, -0.25, 0, 0.25, 0.5}), 100000, 1e-3, t);
        tiebreaks = r.nums("tiebreaks", {1.0, -1.0, 0.0});
        if (tiebreaks.size() < 2) {
            r.fail(r.field("tiebreaks"), "at least two conventions");
            mc.ok = false;
        }
        for (double v : tiebreaks)
            if (std::abs(v) > 1.0) {
                r.fail(r.field("tiebreaks"), "sign(0) value in [-1, 1]", brief(v));
                mc.ok = false;
            }
    }
    if (!det || !mc.ok || !beta || gap_samples < 1) return plan;
    FdParsed fd;
    {
        Reader r = top.sub("fd");
        fd = read_fd(r, b, t, mc.probes, Box{2, {-9, -9}, {9, 9}}, {1.0 / 32, 1.0 / 64}, "implicit-diffusion",
                     "copy-out");
    }
    if (!fd.ok) return plan;
    plan.bytes = fd_bytes(fd.grids);
    plan.exec = [=, u0 = *u0, beta = *beta, det = *det](Context& ctx) {
        run_det_residual(ctx, b, det, "residuals.csv");

        // sup |up - down| over a lattice in {0 < y < t^2}
        DeterministicSolution up(b, u0, SelectionRule::up(), VacuumFill::transported());
        DeterministicSolution down(b, u0, SelectionRule::down(), VacuumFill::transported());
        double vac = 0.0;
        const int n = static_cast<int>(gap_samples);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const Vec2 x{-1.0 + 2.0 * (i + 0.5) / n, t * t * (j + 0.5) / n};
                vac = std::max(vac, std::abs(up(t, x) - down(t, x)));
            }
        ctx.metric("vacuum_gap", vac);
        ctx.check("deterministic_nonuniqueness", vac >= gap_min,
                  "sup |u_up - u_down| on {0 < y < t^2} = " + brief(vac) + " >= " + brief(gap_min));

        const auto ref = fd_reference(b, u0, beta, t, fd.setup);
        const double reach = ref.check_reach(b, mc.probes);
        const auto sel = selection_invariance(b, u0, beta, t, mc.probes, tiebreaks,
                                              static_cast<std::size_t>(mc.n_paths), mc.dt, seed);
        ctx.csv("selection.csv", [&](std::ostream& os) { sel.write_csv(os); });
        double worst_sel = 0.0, worst_fd = 0.0;
        bool fd_ok = true;
        for (const auto& p : sel.points) worst_sel = std::max(worst_sel, p.max_gap / p.tolerance);
        ctx.csv("fd_match.csv", [&](std::ostream& os) {
            os << std::setprecision(17) << "x,y,tiebreak,mc_mean,mc_stderr,fd_value,fd_error,gap,tol,pass\n";
            for (const auto& p : sel.points)
                for (std::size_t k = 0; k < tiebreaks.size(); ++k) {
                    const auto& e = p.estimates[k];
                    const double v = ref.value(p.x), err = ref.error(p.x);
                    const double gap = std::abs(e.mean - v), tol = 3.0 * e.stderr_ + err;
                    const bool pass = !e.unreliable && gap <= tol;
                    fd_ok = fd_ok && pass;
                    worst_fd = std::max(worst_fd, gap / tol);
                    os << p.x[0] << ',' << p.x[1] << ',' << tiebreaks[k] << ',' << e.mean << ',' << e.stderr_ << ','
                       << v << ',' << err << ',' << gap << ',' << tol << ',' << (pass ? 1 : 0) << '\n';
                }
        });
        ctx.metric("boundary_reach", reach);
        ctx.metric("probes", static_cast<double>(mc.probes.size()));
        ctx.metric("tiebreak_worst_gap_over_tol", worst_sel);
        ctx.metric("fd_worst_gap_over_tol", worst_fd);
        ctx.check("tiebreak_agreement", sel.all_pass(),
                  "tie-break estimates agree within 3 sigma; worst gap/tol " + brief(worst_sel));
        ctx.check("fd_agreement", fd_ok,
                  "every tie-break estimate within 3 stderr + FD error; worst gap/tol " + brief(worst_fd));
    };
    return plan;
}

// ---- weak-form-residual ----------------------------------------------------------

Plan plan_weak(Reader& top, std::uint64_t seed) {
    Plan plan;
    const auto mode = top.str("mode", "stochastic");
    if (mode != "stochastic" && mode != "deterministic") {
        top.fail("mode", "stochastic or deterministic", mode);
        return plan;
    }
    const bool det = mode == "deterministic";
    std::optional<DriftSpec> b;
    {
        Reader r = top.sub("drift");
        b = read_drift(r, det ? "shear_flow" : "smooth_sin", {});
    }
    const int dim = b ? b->dim : 1;
    std::optional<InitialDatum> u0;
    {
        Reader r = top.sub("datum");
        u0 = det ? read_datum(r, dim, "tilted_step_y", {}) : read_datum(r, dim, "gaussian", {0.4, 0.3});
    }
    const double t = top.num("t", 0.5);
    require_positive(top, "t", t);
    if (!b || !u0 || !(t > 0)) return plan;

    if (det) {
        if (b->name != "shear_flow") {
            top.fail("drift.name", "deterministic mode needs shear_flow", b->name);
            return plan;
        }
        auto d = read_det_residual(top, *u0, t);
        if (!d) return plan;
        plan.exec = [=, b = *b, d = *d](Context& ctx) { run_det_residual(ctx, b, d, "residuals.csv"); };
        return plan;
    }

    std::optional<TestFunction> phi;
    {
        Reader r = top.sub("test_function");
        phi = read_test_function(r, dim, {0.2, 0.0}, {1.0, 1.0});
    }
    Box domain;
    {
        Reader r = top.sub("domain");
        domain = read_box(r, dim, Box{dim, {-5, -5}, {5, 5}});
    }
    const long long paths = top.integer("paths", 20);
    const long long levels = top.integer("levels", 4);
    const double h0 = top.num("h0", 1.0 / 16);
    const long long steps0 = top.integer("steps0", 64);
    const double factor_min = top.num("factor_min", 1.5);
    const double sigmas = top.num("covariation_sigmas", 3.0);
    bool ok = static_cast<bool>(phi);
    if (paths < 1) {
        top.fail("paths", "paths >= 1", std::to_string(paths));
        ok = false;
    }
    if (levels < 2 || levels > 10) {
        top.fail("levels", "2 <= levels <= 10", std::to_string(levels));
        ok = false;
    }
    if (!(h0 > 0)) {
        top.fail("h0", "h0 > 0", brief(h0));
        ok = false;
    }
    if (steps0 < 1) {
        top.fail("steps0", "steps0 >= 1", std::to_string(steps0));
        ok = false;
    }
    if (phi && !phi->support().inside(domain)) {
        top.fail("test_function", "support inside the domain",
                 "support " + box_str(phi->support()) + ", domain " + box_str(domain));
        ok = false;
    }
    if (!ok) return plan;
    plan.exec = [=, b = *b, u0 = *u0, phi = *phi](Context& ctx) {
        const int L = static_cast<int>(levels);
        std::vector<std::vector<double>> strat(L, std::vector<double>(paths)), ito(L, std::vector<double>(paths));
        std::vector<Covariation> cov(paths);
        for (long long p = 0; p < paths; ++p) {
            BrownianPath w(seed, static_cast<std::uint64_t>(p), b.dim, t, static_cast<int>(steps0) << (L - 1));
            for (int l = 0; l < L; ++l) {
                const int n = static_cast<int>(steps0) << l;
                StochasticSolution u(b, u0, w.increments(n), t / n);
                const auto r = stochastic_weak_form(u.evaluator(), b, phi, t, h0 / (1 << l), t / n, domain,
                                                    u.increments());
                strat[l][p] = r.stratonovich.residual;
                ito[l][p] = r.ito.residual;
                if (l == L - 1) cov[p] = r.covariation;
            }
        }
        std::vector<ResidualRow> rows;
        std::vector<double> ms(L), mi(L);
        for (int l = 0; l < L; ++l) {
            ms[l] = pairwise_sum(strat[l]) / static_cast<double>(paths);
            mi[l] = pairwise_sum(ito[l]) / static_cast<double>(paths);
            const int n = static_cast<int>(steps0) << l;
            rows.push_back({WeakMode::stratonovich, h0 / (1 << l), t / n, t, ms[l]});
            rows.push_back({WeakMode::ito, h0 / (1 << l), t / n, t, mi[l]});
        }
        ctx.csv("residuals.csv", [&](std::ostream& os) { write_residual_csv(os, rows); });
        std::vector<double> gaps, vars;
        for (const auto& c : cov) {
            gaps.push_back(c.gap());
            vars.push_back(c.stderr_ * c.stderr_);
        }
        ctx.csv("covariation.csv", [&](std::ostream& os) {
            os << std::setprecision(17) << "path,partition_sum,compensator,stderr\n";
            for (std::size_t p = 0; p < cov.size(); ++p)
                os << p << ',' << cov[p].partition_sum << ',' << cov[p].compensator << ',' << cov[p].stderr_ << '\n';
        });
        double fs = 1e300, fi = 1e300;
        for (int l = 0; l + 1 < L; ++l) {
            fs = std::min(fs, ms[l] / ms[l + 1]);
            fi = std::min(fi, mi[l] / mi[l + 1]);
        }
        const double gap = pairwise_sum(gaps), se = std::sqrt(pairwise_sum(vars));
        ctx.metric("stratonovich_factor_min", fs);
        ctx.metric("ito_factor_min", fi);
        ctx.metric("stratonovich_residual_fine", ms.back());
        ctx.metric("ito_residual_fine", mi.back());
        ctx.metric("covariation_gap", gap);
        ctx.metric("covariation_stderr", se);
        ctx.check("stratonovich_convergence", fs >= factor_min,
                  "min factor per doubling " + brief(fs) + " >= " + brief(factor_min));
        ctx.check("ito_convergence", fi >= factor_min, "min factor per doubling " + brief(fi) + " >= " + brief(factor_min));
        ctx.check("covariation", std::abs(gap) <= sigmas * se,
                  "|sum (partition sum - compensator)| = " + brief(std::abs(gap)) + " <= " + brief(sigmas) + " x " +
                      brief(se));
    };
    return plan;
}

// ---- energy-gronwall --------------------------------------------------------------

Plan plan_energy(Reader& top, std::uint64_t) {
    Plan plan;
    const double N = top.num("N", 2.0);
    const double c_n = top.num("c_n", 10.0);
    const double T = top.num("T", 0.25);
    const double id_tol = top.num("identity_tol", 1e-12);
    require_positive(top, "N", N);
    require_positive(top, "T", T);
    const double L1 = top.num("half_width_1d", 4.0), h1 = top.num("h_1d", 1.0 / 64);
    const double L2 = top.num("half_width_2d", 2.0), h2 = top.num("h_2d", 1.0 / 32);
    const auto dt_opt = top.opt_num("dt");
    bool ok = N > 0 && T > 0;
    std::optional<Scheme> scheme;
    try {
        scheme = parse_scheme(top.str("scheme", "explicit-upwind"));
    } catch (const std::exception& e) {
        top.fail("scheme", "must name an FD scheme", e.what());
        ok = false;
    }
    std::optional<InitialDatum> u1, u2;
    {
        Reader r = top.sub("datum");
        const auto name = r.str("name", "gaussian");
        const auto params =
            r.nums("params", name == "gaussian" ? std::vector<double>{0.5, 0.3, -0.2} : std::vector<double>{});
        try {
            u1 = datum_catalog(name, 1, params);
            u2 = datum_catalog(name, 2, params);
        } catch (const std::exception& e) {
            r.fail(r.field("name"), "must name an initial datum in both dimensions", e.what());
            ok = false;
        }
    }
    auto grid_for = [&](int dim) -> std::optional<GridSpec> {
        const double L = dim == 1 ? L1 : L2, h = dim == 1 ? h1 : h2;
        if (!(L > 0) || !(h > 0)) return std::nullopt;
        const int n = static_cast<int>(std::lround(2 * L / h)) + 1;
        try {
            return GridSpec::with_spacing(dim, {-L, -L}, h, {n, dim == 2 ? n : 1});
        } catch (const std::exception&) {
            return std::nullopt;
        }
    };
    const auto g1 = grid_for(1), g2 = grid_for(2);
    if (!g1) top.fail("h_1d", "h > 0, half-width > 0, at least 8 nodes", "h = " + brief(h1) + ", half-width " + brief(L1));
    if (!g2) top.fail("h_2d", "h > 0, half-width > 0, at least 8 nodes", "h = " + brief(h2) + ", half-width " + brief(L2));
    ok = ok && g1 && g2;

    json def_drifts = json::array();
    for (const auto& name : catalog_names())
        def_drifts.push_back(name == "constant" ? json{{"name", name}, {"params", {0.8, -0.6}}} : json{{"name", name}});
    std::vector<DriftSpec> drifts;
    const json& src = top.objects("drifts", def_drifts);
    for (std::size_t i = 0; i < src.size(); ++i) {
        Reader r = top.element("drifts", src, i);
        if (auto b = read_drift(r, "", {})) drifts.push_back(*b);
        else ok = false;
    }
    if (src.empty()) {
        top.fail("drifts", "at least one drift");
        ok = false;
    }

    std::optional<DriftSpec> tail_b;
    double tail_N = 2.0, tail_max = 0.02;
    std::vector<double> radii;
    {
        Reader r = top.sub("tail");
        tail_b = read_drift(r, "shear_flow", {});
        tail_N = r.num("N", 2.0);
        radii = r.nums("R", {1, 10, 100, 1e3, 1e4, 1e5, 1e6, 1e7});
        tail_max = r.num("max_at_last_R", 0.02);
        if (radii.size() < 2 || !std::is_sorted(radii.begin(), radii.end()) || radii.front() <= 0) {
            r.fail(r.field("R"), "at least two positive, increasing radii");
            ok = false;
        }
        if (tail_b && !tail_b->bv) {
            r.fail(r.field("name"), "drift with total-variation data", tail_b->name);
            ok = false;
        }
        if (tail_b && tail_b->bv) try {
                bv_tail(*tail_b, tail_N, radii.empty() ? 1.0 : radii.front(), T > 0 ? T : 1.0);
            } catch (const std::exception& e) {
                r.fail(r.field("N"), "convergent weighted tail", e.what());
                ok = false;
            }
        ok = ok && tail_b;
    }
    if (!ok || !scheme) return plan;

    struct Case {
        DriftSpec b;
        GridSpec g;
        double dt;
    };
    std::vector<Case> cases;
    for (std::size_t i = 0; i < drifts.size(); ++i) {
        const auto& b = drifts[i];
        const GridSpec& g = b.dim == 1 ? *g1 : *g2;
        const double bound = stable_dt(b, g, *scheme);
        const double dt = dt_opt ? *dt_opt : std::min(bound, 0.5 * g.max_h());
        if (dt_opt && (!(*dt_opt > 0) || *dt_opt > bound)) {
            top.fail("dt",
                     *scheme == Scheme::explicit_upwind ? "stability bound dt <= 0.9 / max sum_k (|b_k|/h + 1/h^2)"
                                                        : "stability bound dt <= 0.9 / max sum_k |b_k|/h",
                     "dt = " + brief(*dt_opt) + " > bound = " + brief(bound) + " for drift " + b.name);
            ok = false;
        }
        cases.push_back({b, g, dt});
    }
    if (!ok) return plan;
    plan.bytes = static_cast<double>(g2->size()) * 8.0 * 8.0;
    plan.exec = [=, u1 = *u1, u2 = *u2, scheme = *scheme, tail_b = *tail_b](Context& ctx) {
        const double ex1 = weight_identity_excess(*g1, N), ex2 = weight_identity_excess(*g2, N);
        ctx.metric("weight_identity_excess_1d", ex1);
        ctx.metric("weight_identity_excess_2d", ex2);
        ctx.check("weight_identity", std::max(ex1, ex2) <= id_tol,
                  "max relative excess of (1+|x|)|grad phi_N| over N phi_N = " + brief(std::max(ex1, ex2)) +
                      " <= " + brief(id_tol));

        bool zero_ok = true, env_ok = true;
        double worst_ratio = 0.0;
        std::vector<std::pair<std::string, EnergyReport>> reports;
        for (const auto& c : cases) {
            ParabolicConfig cfg;
            cfg.grid = c.g;
            cfg.dt = c.dt;
            cfg.scheme = scheme;
            cfg.energy_N = N;
            const auto split = split_for(c.b);
            const auto zero = weighted_energy_check(solve_fd(c.b, GridFunction::zeros(c.g), T, cfg), split, N, c_n);
            for (double e : zero.energy) zero_ok = zero_ok && e == 0.0;
            const auto v0 = GridFunction::sample(c.g, c.b.dim == 1 ? u1 : u2);
            auto rep = weighted_energy_check(solve_fd(c.b, v0, T, cfg), split, N, c_n);
            env_ok = env_ok && rep.envelope_holds;
            for (std::size_t k = 1; k < rep.energy.size(); ++k)
                worst_ratio = std::max(worst_ratio, rep.energy[k] / rep.envelope[k]);
            reports.emplace_back(c.b.name, std::move(rep));
        }
        ctx.csv("energy.csv", [&](std::ostream& os) {
            os << std::setprecision(17) << "drift,alpha,t,E,gradE,envelope\n";
            for (const auto& [name, r] : reports)
                for (std::size_t k = 0; k < r.times.size(); ++k)
                    os << name << ',' << r.alpha << ',' << r.times[k] << ',' << r.energy[k] << ',' << r.grad_energy[k]
                       << ',' << r.envelope[k] << '\n';
        });
        ctx.metric("envelope_usage_max", worst_ratio);
        ctx.check("zero_data_zero_energy", zero_ok, "E(t) == 0 for v0 = 0 on every drift");
        ctx.check("gronwall_envelope", env_ok,
                  "E(t) <= E(0) exp(C_N alpha t) with C_N = " + brief(c_n) + " on " + std::to_string(cases.size()) +
                      " drifts; max E/envelope " + brief(worst_ratio));

        std::vector<double> tails;
        for (double R : radii) tails.push_back(bv_tail(tail_b, tail_N, R, T));
        ctx.csv("tails.csv", [&](std::ostream& os) {
            os << std::setprecision(17) << "R,tail\n";
            for (std::size_t i = 0; i < radii.size(); ++i) os << radii[i] << ',' << tails[i] << '\n';
        });
        bool mono = true;
        for (std::size_t i = 0; i + 1 < tails.size(); ++i) mono = mono && tails[i + 1] <= tails[i];
        ctx.metric("tail_first", tails.front());
        ctx.metric("tail_last", tails.back());
        ctx.check("tail_monotone", mono, "tail(R) non-increasing over " + std::to_string(radii.size()) + " radii");
        ctx.check("tail_vanishes", tails.back() <= tail_max,
                  "tail(" + brief(radii.back()) + ") = " + brief(tails.back()) + " <= " + brief(tail_max));
    };
    return plan;
}

// builder table
using Builder = Plan (*)(Reader&, std::uint64_t);
const std::map<std::string, Builder>& builders() {
    static const std::map<std::string, Builder> m{
        {"commutator-study", plan_commutator}, {"anisotropy-study", plan_anisotropy},
        {"shear-uniqueness", plan_shear},      {"mc-vs-fd", plan_mc_vs_fd},
        {"weak-form-residual", plan_weak},     {"energy-gronwall", plan_energy},
    };
    return m;
}

struct Built {
    Plan plan;
    json echo;
    std::string experiment;
    std::uint64_t seed = 0;
};

Built build(const json& config, Diags& d) {
    Built out;
    out.echo = json::object();
    if (!config.is_object()) {
        d.push_back({"(root)", "config must be a JSON object", config.type_name()});
        return out;
    }
    Reader top(&config, "", out.echo, d);
    out.experiment = top.str("experiment", "");
    top.mark("seed");
    if (!config.contains("seed"))
        top.fail("seed", "required (no default seed)");
    else if (config["seed"].is_number_unsigned())
        out.seed = config["seed"].get<std::uint64_t>();
    else if (config["seed"].is_number_integer() && config["seed"].get<long long>() >= 0)
        out.seed = static_cast<std::uint64_t>(config["seed"].get<long long>());
    else
        top.fail("seed", "unsigned 64-bit integer", config["seed"].dump());
    out.echo["seed"] = out.seed;
    if (config.contains("output")) top.str("output", "");
    const double budget_mb = top.num("memory_budget_mb", 2048.0);
    const auto it = builders().find(out.experiment);
    if (it == builders().end()) {
        std::string ids;
        for (const auto& e : list_experiments()) ids += (ids.empty() ? "" : ", ") + e.id;
        top.fail("experiment", "one of " + ids, out.experiment);
        return out;
    }
    out.plan = it->second(top, out.seed);
    if (out.plan.bytes > budget_mb * 1024.0 * 1024.0)
        d.push_back({"memory_budget_mb", "estimated memory within the budget",
                     brief(out.plan.bytes / (1024.0 * 1024.0)) + " MB > " + brief(budget_mb) + " MB", true});
    return out;
}

}  // namespace

std::vector<Diagnostic> validate(const json& config) {
    Diags d;
    build(config, d);
    return d;
}

json default_config(const std::string& experiment, std::uint64_t seed) {
    Diags d;
    return build(json{{"experiment", experiment}, {"seed", seed}}, d).echo;
}

ExperimentReport run(const json& config, const std::filesystem::path& out_dir) {
    Diags d;
    Built b = build(config, d);
    if (!d.empty()) throw ValidationFailed(std::move(d));
    if (!b.plan.exec) throw std::logic_error("plan without an executor");
    const auto t0 = std::chrono::steady_clock::now();
    std::filesystem::create_directories(out_dir);
    ExperimentReport rep;
    rep.experiment = b.experiment;
    rep.seed = b.seed;
    rep.config = b.echo;
    rep.version = version();
    Context ctx{out_dir,
                "# experiment=" + b.experiment + "\n# seed=" + std::to_string(b.seed) + "\n# version=" + rep.version +
                    "\n",
                &rep};
    b.plan.exec(ctx);
    ctx.csv("metrics.csv", [&](std::ostream& os) {
        os << "name,value\n";
        for (const auto& [k, v] : rep.metrics) os << k << ',' << fmt(v) << '\n';
    });
    ctx.csv("checks.csv", [&](std::ostream& os) {
        os << "name,pass,detail\n";
        for (const auto& c : rep.checks) os << c.name << ',' << (c.pass ? 1 : 0) << ",\"" << c.detail << "\"\n";
    });
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream js(out_dir / "report.json", std::ios::binary);
    js << rep.to_json().dump(2) << '\n';
    return rep;
}

}  // namespace stochtr::lab
