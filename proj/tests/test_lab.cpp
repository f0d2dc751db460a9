#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "stochtr/core.hpp"
#include "stochtr/lab.hpp"

using namespace stochtr;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(STOCHTR_SOURCE_DIR) / "configs";

json load(const fs::path& p) {
    std::ifstream is(p);
    return json::parse(is);
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("stochtr_lab_test_" + name);
    fs::remove_all(p);
    return p;
}

bool has_diag(const std::vector<lab::Diagnostic>& d, const std::string& field, const std::string& needle = "") {
    for (const auto& x : d)
        if (x.field == field && (needle.empty() || x.str().find(needle) != std::string::npos)) return true;
    return false;
}

std::vector<fs::path> quick_configs() {
    std::vector<fs::path> v;
    for (const auto& e : fs::directory_iterator(kConfigs / "quick")) v.push_back(e.path());
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace

TEST_CASE("registry") {
    const auto& reg = lab::list_experiments();
    REQUIRE(reg.size() == 6u);
    std::set<std::string> ids;
    for (const auto& e : reg) {
        CHECK_FALSE(e.description.empty());
        CHECK_FALSE(e.anchor.empty());
        ids.insert(e.id);
    }
    CHECK(ids.size() == reg.size());
    for (const auto& e : reg) {
        if (e.id == "shear-uniqueness") CHECK(e.anchor.find("compressible shear flow") != std::string::npos);
        if (e.id == "commutator-study")
            CHECK(e.anchor.find("smooth even nonnegative convolution kernel") != std::string::npos);
    }
}

TEST_CASE("default and shipped configs validate") {
    for (const auto& e : lab::list_experiments()) {
        CAPTURE(e.id);
        const auto d = lab::validate(lab::default_config(e.id, 1));
        CHECK(d.empty());
    }
    for (const auto& dir : {kConfigs, kConfigs / "quick"})
        for (const auto& f : fs::directory_iterator(dir)) {
            if (f.path().extension() != ".json") continue;
            CAPTURE(f.path().string());
            const auto d = lab::validate(load(f.path()));
            for (const auto& x : d) MESSAGE(x.str());
            CHECK(d.empty());
        }
}

TEST_CASE("diagnostics name the field, the constraint and the numbers") {
    SUBCASE("seed is mandatory") {
        const auto d = lab::validate({{"experiment", "anisotropy-study"}});
        CHECK(has_diag(d, "seed", "required"));
        CHECK(has_diag(lab::validate({{"experiment", "anisotropy-study"}, {"seed", -3}}), "seed"));
        CHECK(has_diag(lab::validate({{"experiment", "anisotropy-study"}, {"seed", 1.5}}), "seed"));
    }
    SUBCASE("unknown names") {
        CHECK(has_diag(lab::validate({{"experiment", "nope"}, {"seed", 1}}), "experiment"));
        CHECK(has_diag(lab::validate({{"experiment", "mc-vs-fd"}, {"seed", 1}, {"drift", {{"name", "vortex"}}}}),
                       "drift.name"));
        CHECK(has_diag(lab::validate({{"experiment", "mc-vs-fd"}, {"seed", 1}, {"renormalization", "sqrt"}}),
                       "renormalization"));
        CHECK(has_diag(lab::validate({{"experiment", "mc-vs-fd"}, {"seed", 1}, {"fd", {{"scheme", "crank"}}}}),
                       "fd.scheme"));
        CHECK(has_diag(lab::validate({{"experiment", "anisotropy-study"}, {"seed", 1}, {"budjet", 3}}), "budjet",
                       "unknown field"));
        CHECK(has_diag(lab::validate(json::array()), "(root)"));
    }
    SUBCASE("eps below 2h") {
        auto c = lab::default_config("commutator-study", 1);
        c["eps_ladder"] = {0.2, 0.003};
        const auto d = lab::validate(c);
        CHECK(has_diag(d, "eps_ladder", "eps >= 2h"));
        CHECK(has_diag(d, "eps_ladder", "0.003"));
        CHECK(has_diag(d, "eps_ladder", "0.00390625"));
    }
    SUBCASE("region not interior") {
        auto c = lab::default_config("commutator-study", 1);
        c["region"]["lo"] = {-1.4};
        CHECK(has_diag(lab::validate(c), "region", "inside the grid"));
    }
    SUBCASE("explicit stability bound") {
        auto c = lab::default_config("mc-vs-fd", 1);
        c["fd"]["dt"] = 1e-3;
        const auto d = lab::validate(c);
        CHECK(has_diag(d, "fd.dt", "stability bound"));
        CHECK(has_diag(d, "fd.dt", "dt = 0.001 > bound = "));
        c["fd"]["dt"] = 1e-5;
        CHECK(lab::validate(c).empty());
    }
    SUBCASE("probes inside the boundary-influence radius") {
        auto c = lab::default_config("mc-vs-fd", 1);
        c["fd"]["box"] = {{"lo", {-3}}, {"hi", {3}}};
        CHECK(has_diag(lab::validate(c), "fd.box", "boundary-influence"));
        c = lab::default_config("mc-vs-fd", 1);
        c["fd"]["box"]["hi"] = {6.01};
        CHECK(has_diag(lab::validate(c), "fd.box", "multiple of h"));
    }
    SUBCASE("weak-form time grid and support") {
        auto c = lab::default_config("shear-uniqueness", 1);
        c["deterministic"]["dt"] = {0.3, 0.1};
        CHECK(has_diag(lab::validate(c), "deterministic.dt", "multiple of dt"));
        c = lab::default_config("weak-form-residual", 1);
        c["domain"] = {{"lo", {-1}}, {"hi", {1}}};
        CHECK(has_diag(lab::validate(c), "test_function", "support inside"));
    }
    SUBCASE("memory budget is a resource diagnostic") {
        auto c = lab::default_config("mc-vs-fd", 1);
        c["memory_budget_mb"] = 0.01;
        const auto d = lab::validate(c);
        REQUIRE(d.size() == 1u);
        CHECK(d[0].resource);
        CHECK(d[0].field == "memory_budget_mb");
        const auto out = scratch("budget");
        try {
            lab::run(c, out);
            FAIL("run accepted an over-budget config");
        } catch (const lab::ValidationFailed& e) {
            CHECK(e.resource_only());
        }
        CHECK_FALSE(fs::exists(out));
    }
}

TEST_CASE("run writes CSVs with metadata and a JSON report") {
    const auto out = scratch("constant");
    json c{{"experiment", "commutator-study"}, {"seed", 5}, {"drift", {{"name", "constant"}, {"params", {0.3}}}},
           {"grid", {{"h", 1.0 / 128}, {"lo", {-1.5 + 0.5 / 128}}, {"n", {384}}}}, {"eps_ladder", {0.2, 0.1}}};
    const auto rep = lab::run(c, out);
    CHECK(rep.passed());
    REQUIRE(rep.find_check("vanishing_commutator") != nullptr);
    CHECK(rep.metric("l1_first") <= 1e-10);
    CHECK_THROWS_AS(rep.metric("nope"), LookupError);
    for (const auto& f : rep.files) {
        const auto text = slurp(out / f);
        CHECK(text.rfind("# experiment=commutator-study\n# seed=5\n# version=", 0) == 0);
        CHECK(text.find("wall") == std::string::npos);
    }
    // metric values survive the CSV round trip exactly
    std::istringstream is(slurp(out / "metrics.csv"));
    std::string line;
    std::size_t k = 0;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#' || line == "name,value") continue;
        const auto comma = line.find(',');
        REQUIRE(k < rep.metrics.size());
        CHECK(line.substr(0, comma) == rep.metrics[k].first);
        CHECK(std::stod(line.substr(comma + 1)) == rep.metrics[k].second);
        ++k;
    }
    CHECK(k == rep.metrics.size());
    const auto js = load(out / "report.json");
    CHECK(js["seed"] == 5);
    CHECK(js["passed"] == true);
    CHECK(js["config"]["experiment"] == "commutator-study");
    CHECK(js["config"]["pointwise"] == true);  // defaults are echoed
    CHECK(js.contains("wall_time_s"));

    c["vanishing_tol"] = -1.0;
    CHECK_FALSE(lab::run(c, scratch("constant_fail")).passed());
}

TEST_CASE("quick configs: validate-then-run coherence and byte-identical reruns across thread counts") {
    for (const auto& path : quick_configs()) {
        CAPTURE(path.string());
        const auto cfg = load(path);
        REQUIRE(lab::validate(cfg).empty());
        const auto a = scratch("repro_a"), b = scratch("repro_b");
        setenv("STOCHTR_THREADS", "1", 1);
        lab::ExperimentReport ra, rb;
        CHECK_NOTHROW(ra = lab::run(cfg, a));
        setenv("STOCHTR_THREADS", "3", 1);
        CHECK_NOTHROW(rb = lab::run(cfg, b));
        unsetenv("STOCHTR_THREADS");
        CHECK(ra.passed());
        REQUIRE(ra.files == rb.files);
        for (const auto& f : ra.files) {
            CAPTURE(f);
            CHECK(slurp(a / f) == slurp(b / f));
        }
        // the seed reaches the stochastic experiments
        auto other = cfg;
        other["seed"] = cfg["seed"].get<std::uint64_t>() + 1;
        const auto c = scratch("repro_c");
        const auto rc = lab::run(other, c);
        const std::string exp = cfg["experiment"];
        if (exp == "mc-vs-fd" || exp == "shear-uniqueness" || exp == "weak-form-residual" || exp == "anisotropy-study") {
            bool differs = false;
            for (const auto& f : rc.files)
                if (f != "checks.csv" && slurp(a / f).substr(slurp(a / f).find("version")) !=
                                             slurp(c / f).substr(slurp(c / f).find("version")))
                    differs = true;
            CHECK(differs);
        }
    }
}
