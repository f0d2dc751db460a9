// pybind11 module _stochtr. Grid values cross as flat row-major numpy arrays
// (x fastest); configs and reports cross as JSON text.
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stochtr/characteristics.hpp"
#include "stochtr/commutator.hpp"
#include "stochtr/core.hpp"
#include "stochtr/drift.hpp"
#include "stochtr/expectation.hpp"
#include "stochtr/lab.hpp"
#include "stochtr/mollifier.hpp"
#include "stochtr/parabolic.hpp"
#include "stochtr/transport.hpp"

namespace py = pybind11;
using namespace stochtr;

namespace {

Vec2 vec(const std::vector<double>& v) {
    if (v.empty() || v.size() > 2) throw ConfigError("expected 1 or 2 coordinates");
    return {v[0], v.size() == 2 ? v[1] : 0.0};
}

std::vector<double> list(const Vec2& v, int dim) { return dim == 1 ? std::vector<double>{v[0]} : std::vector<double>{v[0], v[1]}; }

py::array_t<double> to_numpy(const GridFunction& f) {
    const auto& s = f.spec();
    std::vector<py::ssize_t> shape = s.dim == 1 ? std::vector<py::ssize_t>{s.n[0]} : std::vector<py::ssize_t>{s.n[1], s.n[0]};
    py::array_t<double> a(shape);
    std::copy(f.values().begin(), f.values().end(), a.mutable_data());
    return a;
}

GridFunction from_numpy(const GridSpec& g, const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (static_cast<std::size_t>(a.size()) != g.size())
        throw ConfigError("array has " + std::to_string(a.size()) + " values, grid has " + std::to_string(g.size()));
    return {g, std::vector<double>(a.data(), a.data() + a.size())};
}

Box box(const std::vector<double>& lo, const std::vector<double>& hi) {
    if (lo.size() != hi.size()) throw ConfigError("box corners differ in dimension");
    return Box{static_cast<int>(lo.size()), vec(lo), vec(hi)};
}

py::dict commutator_dict(const CommutatorReport& r) {
    py::dict d;
    d["eps"] = r.eps_ladder;
    d["l1"] = r.l1_values;
    d["bound_bv"] = r.bound_bv;
    d["bound_ac"] = r.bound_ac;
    d["ratio_sup"] = r.ratio_sup;
    d["decay"] = r.decay;
    d["sup_u"] = r.sup_u;
    d["i_theta"] = r.i_theta;
    d["skipped_nodes"] = r.skipped_nodes;
    d["l1_bound_holds"] = r.l1_bound_holds();
    return d;
}

}  // namespace

PYBIND11_MODULE(_stochtr, m) {
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<ResolutionError>(m, "ResolutionError", PyExc_ValueError);
    py::register_exception<LookupError>(m, "LookupError", PyExc_KeyError);
    py::register_exception<UnsupportedError>(m, "UnsupportedError", PyExc_NotImplementedError);
    py::register_exception<lab::ValidationFailed>(m, "ValidationFailed", PyExc_ValueError);

    py::class_<GridSpec>(m, "Grid")
        .def(py::init([](const std::vector<double>& lo, double h, const std::vector<int>& n) {
                 const int dim = static_cast<int>(lo.size());
                 if (n.size() != lo.size()) throw ConfigError("lo and n differ in dimension");
                 return GridSpec::with_spacing(dim, vec(lo), h, {n[0], dim == 2 ? n[1] : 1});
             }),
             py::arg("lo"), py::arg("h"), py::arg("n"))
        .def_readonly("dim", &GridSpec::dim)
        .def_property_readonly("h", &GridSpec::max_h)
        .def_property_readonly("shape", [](const GridSpec& g) {
            return g.dim == 1 ? std::vector<int>{g.n[0]} : std::vector<int>{g.n[1], g.n[0]};
        })
        .def("axis", [](const GridSpec& g, int k) {
            std::vector<double> v(g.n[k]);
            for (int i = 0; i < g.n[k]; ++i) v[i] = g.lo[k] + i * g.h(k);
            return v;
        });

    py::class_<Kernel>(m, "Kernel")
        .def_static("isotropic", &Kernel::isotropic, py::arg("dim"))
        .def_static("aligned", [](const std::vector<double>& n, double aspect) { return Kernel::aligned(2, vec(n), aspect); },
                    py::arg("direction"), py::arg("aspect"))
        .def_static("matrix", [](const std::vector<double>& A) {
            if (A.size() != 4) throw ConfigError("matrix needs 4 row-major entries");
            return Kernel::anisotropic(2, {A[0], A[1], A[2], A[3]});
        }, py::arg("A"))
        .def_property_readonly("dim", &Kernel::dim)
        .def("__call__", [](const Kernel& k, const std::vector<double>& z) { return k.value(vec(z)); })
        .def("mass", &kernel_mass)
        .def("i_functional", &i_functional)
        .def("lambda_functional", [](const Kernel& k, const std::vector<double>& M) {
            if (M.size() != 4) throw ConfigError("matrix needs 4 row-major entries");
            return lambda_functional({M[0], M[1], M[2], M[3]}, k);
        }, py::arg("M"));

    m.def("minimize_lambda_rank_one", [](const std::vector<double>& eta, const std::vector<double>& zeta, int budget) {
        const auto r = minimize_lambda_rank_one(vec(eta), vec(zeta), budget);
        return py::make_tuple(r.kernel, r.lambda, r.aspect);
    }, py::arg("eta"), py::arg("zeta"), py::arg("budget"));

    py::class_<DriftSpec>(m, "Drift")
        .def_readonly("name", &DriftSpec::name)
        .def_readonly("dim", &DriftSpec::dim)
        .def("__call__", [](const DriftSpec& b, const std::vector<double>& x, double tiebreak) {
            return list(b.eval(vec(x), tiebreak), b.dim);
        }, py::arg("x"), py::arg("tiebreak") = 0.0)
        .def("divergence", [](const DriftSpec& b, const std::vector<double>& x) { return b.div(vec(x)); });
    m.def("drift", &catalog, py::arg("name"), py::arg("params") = std::vector<double>{});
    m.def("drift_names", &catalog_names);

    py::class_<InitialDatum>(m, "Datum")
        .def_readonly("name", &InitialDatum::name)
        .def_readonly("dim", &InitialDatum::dim)
        .def("__call__", [](const InitialDatum& u, const std::vector<double>& x) { return u(vec(x)); });
    m.def("datum", &datum_catalog, py::arg("name"), py::arg("dim"), py::arg("params") = std::vector<double>{});

    m.def("convolve", [](const GridSpec& g, py::array_t<double> u, const Kernel& k, double eps) {
        return to_numpy(convolve(from_numpy(g, u), k, eps));
    }, py::arg("grid"), py::arg("u"), py::arg("kernel"), py::arg("eps"));

    m.def("commutator_study", [](const GridSpec& g, py::array_t<double> u, const DriftSpec& b, const Kernel& k,
                                 const std::vector<double>& eps, const std::vector<double>& lo,
                                 const std::vector<double>& hi, bool pointwise) {
        const auto f = from_numpy(g, u);
        const auto q = box(lo, hi);
        return commutator_dict(pointwise ? pointwise_bound_study(f, b, k, eps, q) : l1_estimate_study(f, b, k, eps, q));
    }, py::arg("grid"), py::arg("u"), py::arg("drift"), py::arg("kernel"), py::arg("eps"), py::arg("lo"),
       py::arg("hi"), py::arg("pointwise") = false);

    m.def("stable_dt", [](const DriftSpec& b, const GridSpec& g, const std::string& scheme) {
        return stable_dt(b, g, parse_scheme(scheme));
    }, py::arg("drift"), py::arg("grid"), py::arg("scheme") = "explicit-upwind");

    m.def("solve_fd", [](const DriftSpec& b, const GridSpec& g, py::array_t<double> v0, double T, double dt,
                         const std::string& scheme, const std::string& boundary) {
        ParabolicConfig c;
        c.grid = g;
        c.scheme = parse_scheme(scheme);
        c.boundary = parse_boundary(boundary);
        c.dt = dt > 0 ? dt : std::min(stable_dt(b, g, c.scheme), g.max_h());
        ParabolicSeries s;
        {
            py::gil_scoped_release nogil;
            s = solve_fd(b, from_numpy(g, v0), T, c);
        }
        py::dict d;
        d["v"] = to_numpy(s.final());
        d["dt"] = s.dt;
        d["steps"] = s.steps;
        d["violations"] = s.violations;
        d["lower"] = s.lower;
        d["upper"] = s.upper;
        return d;
    }, py::arg("drift"), py::arg("grid"), py::arg("v0"), py::arg("T"), py::arg("dt") = 0.0,
       py::arg("scheme") = "explicit-upwind", py::arg("boundary") = "dirichlet-zero");

    m.def("heat_exact", [](const GridSpec& g, py::array_t<double> v0, double t) {
        return to_numpy(heat_exact(from_numpy(g, v0), t));
    }, py::arg("grid"), py::arg("v0"), py::arg("t"));

    m.def("feynman_kac", [](const DriftSpec& b, const InitialDatum& u0, const std::string& beta, double t,
                            const std::vector<double>& x, std::size_t n_paths, double dt, std::uint64_t seed,
                            double tiebreak) {
        McOptions opt;
        opt.tiebreak = tiebreak;
        const auto r = Renormalization::from_name(beta);
        McEstimate e;
        {
            py::gil_scoped_release nogil;
            e = feynman_kac(b, u0, r, t, vec(x), n_paths, dt, seed, opt);
        }
        py::dict d;
        d["mean"] = e.mean;
        d["stderr"] = e.stderr_;
        d["n_paths"] = e.n_paths;
        d["escaped"] = e.escaped;
        d["fingerprint"] = e.fingerprint;
        return d;
    }, py::arg("drift"), py::arg("datum"), py::arg("beta"), py::arg("t"), py::arg("x"), py::arg("n_paths"),
       py::arg("dt"), py::arg("seed"), py::arg("tiebreak") = 0.0);

    m.def("shear_branches", [](double x0, double t, const std::string& rule) {
        return list(shear_branches(x0, t, SelectionRule::parse(rule)), 2);
    }, py::arg("x0"), py::arg("t"), py::arg("rule"));

    m.def("lab_experiments", [] {
        std::vector<std::tuple<std::string, std::string, std::string>> v;
        for (const auto& e : lab::list_experiments()) v.emplace_back(e.id, e.description, e.anchor);
        return v;
    });
    m.def("lab_validate", [](const std::string& config) {
        std::vector<std::tuple<std::string, std::string, bool>> v;
        for (const auto& d : lab::validate(nlohmann::json::parse(config))) v.emplace_back(d.field, d.str(), d.resource);
        return v;
    });
    m.def("lab_default_config", [](const std::string& id, std::uint64_t seed) {
        return lab::default_config(id, seed).dump();
    });
    m.def("lab_run", [](const std::string& config, const std::string& out) {
        const auto cfg = nlohmann::json::parse(config);
        py::gil_scoped_release nogil;
        return lab::run(cfg, out).to_json().dump();
    }, py::arg("config"), py::arg("out"));
    m.attr("__version__") = lab::version();
}
