#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "stochtr/transport.hpp"

using namespace stochtr;

namespace {

std::vector<Vec2> random_points(int n, double lo, double hi, unsigned seed) {
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<Vec2> out(n);
    for (auto& p : out) p = {d(g), d(g)};
    return out;
}

const Box kDomain2{2, {-2, -2}, {2, 2}};

}  // namespace

TEST_CASE("initial data") {
    for (const char* name : {"constant", "indicator_x_pos", "indicator_y_pos", "sign_x", "sign_y", "gaussian", "sin"}) {
        const auto u0 = datum_catalog(name, 2, name == std::string("constant") ? std::vector<double>{-3.0}
                                                                                 : std::vector<double>{});
        for (const auto& p : random_points(500, -4, 4, 1)) CHECK(std::abs(u0(p)) <= u0.sup_norm);
    }
    CHECK(datum_catalog("constant", 1, {-3.0}).sup_norm == 3.0);
    CHECK_THROWS_AS(datum_catalog("sign_y", 1), LookupError);
    CHECK_THROWS_AS(datum_catalog("nope", 2), LookupError);
    CHECK(InitialDatum::sign(2, 1)({5, 0}) == 0.0);
    CHECK(InitialDatum::indicator_positive(2, 1)({5, 0}) == 0.0);
}

TEST_CASE("renormalizations") {
    for (const char* tag : {"identity", "square", "cube"}) {
        const auto b = Renormalization::from_name(tag);
        CHECK(b.tag == tag);
        // central differences: error ratio 4 per halving
        const double s = 0.7;
        auto err = [&](double h) { return std::abs((b(s + h) - b(s - h)) / (2 * h) - b.beta_prime(s)); };
        if (err(1e-2) > 1e-12) CHECK(err(1e-2) / err(5e-3) == doctest::Approx(4.0).epsilon(0.01));
    }
    const auto sq = Renormalization::square();
    CHECK(sq(0.0) == 0.0);
    for (double s : {-2.0, -1e-3, 1e-3, 5.0}) CHECK(sq(s) > 0.0);
    CHECK_THROWS_AS(Renormalization::from_name("log"), LookupError);
}

TEST_CASE("deterministic shear solutions") {
    const auto b = catalog("shear_flow");
    const auto u0 = InitialDatum::indicator_positive(2, 1);

    CHECK_THROWS_AS(DeterministicSolution(catalog("sign_1d"), u0, SelectionRule::up(), VacuumFill::transported()),
                    UnsupportedError);
    CHECK_THROWS_AS(DeterministicSolution(b, u0, SelectionRule::stay(), VacuumFill::transported()), ConfigError);

    SUBCASE("constants solve transport") {
        DeterministicSolution one(b, InitialDatum::constant(2, 1.0), SelectionRule::up(), VacuumFill::constant(1.0));
        for (const auto& p : random_points(300, -3, 3, 2)) CHECK(one(0.8, p) == 1.0);
    }

    SUBCASE("closed-form backtrace against the ODE") {
        const auto g = InitialDatum::gaussian(2, {-0.5, 0.5}, 0.7);
        DeterministicSolution u(b, g, SelectionRule::up(), VacuumFill::constant(0.0));
        CHECK(DeterministicSolution::backtrace(1.0, {0, 4}) == Vec2{-1, 1});
        const auto back = integrate_ode(b, {0, 4}, 1.0, 1e-3, SelectionRule::stay(), Direction::backward);
        CHECK(u(1.0, {0, 4}) == doctest::Approx(g(back.end())).epsilon(1e-3));
        for (const auto& p : random_points(40, -2, 2, 3)) {
            const double t = 0.6;
            if (DeterministicSolution::in_vacuum(t, p)) continue;
            const auto e = integrate_ode(b, p, t, 1e-3, SelectionRule::stay(), Direction::backward);
            const Vec2 foot = DeterministicSolution::backtrace(t, p);
            CHECK(std::abs(e.end()[0] - foot[0]) < 1e-3);
            CHECK(std::abs(e.end()[1] - foot[1]) < 1e-3);
        }
    }

    SUBCASE("up-fill and constant fill differ exactly on 0 < y < t^2") {
        DeterministicSolution up(b, u0, SelectionRule::up(), VacuumFill::transported());
        DeterministicSolution zero(b, u0, SelectionRule::up(), VacuumFill::constant(0.0));
        const double t = 0.5;
        double sup_in = 0.0, sup_out = 0.0;
        for (const auto& p : random_points(20000, -1, 1, 4)) {
            const double d = std::abs(up(t, p) - zero(t, p));
            if (p[1] > 0 && p[1] < t * t)
                sup_in = std::max(sup_in, d);
            else
                sup_out = std::max(sup_out, d);
        }
        CHECK(sup_in == 1.0);
        CHECK(sup_out == 0.0);
    }

    SUBCASE("up and down agree outside the cone and differ inside") {
        DeterministicSolution up(b, u0, SelectionRule::up(), VacuumFill::transported());
        DeterministicSolution down(b, u0, SelectionRule::down(), VacuumFill::transported());
        const double t = 0.5;
        int inside = 0, differ = 0;
        for (const auto& p : random_points(20000, -1, 1, 5)) {
            if (std::abs(p[1]) > t * t) {
                CHECK(up(t, p) == down(t, p));
            } else {
                ++inside;
                if (up(t, p) != down(t, p)) ++differ;
            }
        }
        CHECK(differ > inside / 4);
    }
}

TEST_CASE("pathwise stochastic solutions") {
    const auto zero = catalog("constant", {0.0});
    const auto sin1 = catalog("smooth_sin");

    SUBCASE("constant datum") {
        BrownianPath w(3, 0, 1, 1.0, 128);
        StochasticSolution u(sin1, InitialDatum::constant(1, 2.5), w.increments(128), 1.0 / 128);
        for (double x : {-3.0, 0.1, 7.0}) CHECK(u(1.0, {x, 0}) == 2.5);
    }

    SUBCASE("zero drift averages to the heat semigroup") {
        // E sin(x + W_t) = e^{-t/2} sin x
        const double t = 0.5, x = 0.9;
        const int paths = 4000;
        double mean = 0.0, m2 = 0.0;
        for (int p = 0; p < paths; ++p) {
            BrownianPath w(11, p, 1, t, 16);
            StochasticSolution u(zero, InitialDatum::sine(1), w.increments(16), t / 16);
            const double v = u(t, {x, 0});
            CHECK(std::abs(v) <= 1.0);
            mean += v;
            m2 += v * v;
        }
        mean /= paths;
        const double se = std::sqrt((m2 / paths - mean * mean) / paths);
        CHECK(std::abs(mean - std::exp(-t / 2) * std::sin(x)) < 4 * se);
    }

    SUBCASE("sample from a recorded path") {
        const auto path = integrate_sde(sin1, Direction::forward, {0, 0}, 0.5, 0.5 / 64, 5, 2);
        StochasticSolution u(sin1, InitialDatum::sine(1), path.increments, 0.5 / 64);
        CHECK(stochastic_solution_sample(sin1, InitialDatum::sine(1), path, 0.5, {0.3, 0}) == u(0.5, {0.3, 0}));
        auto escaped = path;
        escaped.escaped = true;
        CHECK_THROWS_AS(stochastic_solution_sample(sin1, InitialDatum::sine(1), escaped, 0.5, {0, 0}), DomainError);
        CHECK_THROWS_AS(u(0.3, {0, 0}), ConfigError);
    }

    SUBCASE("L-infinity bound in 2D") {
        const auto shear = catalog("shear_flow");
        BrownianPath w(4, 1, 2, 0.5, 64);
        StochasticSolution u(shear, InitialDatum::sign(2, 1), w.increments(64), 0.5 / 64);
        for (const auto& p : random_points(300, -2, 2, 6)) CHECK(std::abs(u(0.5, p)) <= 1.0);
    }
}

TEST_CASE("renormalization commutes with the flow representation") {
    const auto b = catalog("smooth_sin");
    const auto u0 = InitialDatum::gaussian(1, {0.3, 0}, 0.4);
    std::mt19937_64 g(7);
    std::uniform_real_distribution<double> xs(-3, 3);
    std::uniform_int_distribution<int> js(0, 32);
    for (const auto& beta : {Renormalization::identity(), Renormalization::square(), Renormalization::cube()}) {
        for (int k = 0; k < 1000; ++k) {
            BrownianPath w(21, k % 10, 1, 1.0, 32);
            StochasticSolution u(b, u0, w.increments(32), 1.0 / 32);
            InitialDatum bu0{"beta_u0", 1, [&](const Vec2& x) { return beta(u0(x)); }, 1.0};
            const auto lhs = renormalize(u.evaluator(), beta);
            const auto rhs = u.with_datum(bu0).evaluator();
            const double t = js(g) / 32.0;
            const Vec2 x{xs(g), 0};
            REQUIRE(lhs(t, x) == rhs(t, x));
        }
    }
    // sign^2 = 1 off the zero set
    const auto shear = catalog("shear_flow");
    DeterministicSolution s(shear, InitialDatum::sign(2, 1), SelectionRule::up(), VacuumFill::transported());
    const auto sq = renormalize(s.evaluator(), Renormalization::square());
    for (const auto& p : random_points(500, -2, 2, 8))
        if (!DeterministicSolution::in_vacuum(0.5, p)) CHECK(sq(0.5, p) == 1.0);
}

TEST_CASE("test functions") {
    TestFunction phi(2, {0.1, -0.2}, {0.6, 0.5});
    const Box s = phi.support();
    CHECK(s.lo[0] == doctest::Approx(-0.5));
    CHECK(s.hi[1] == doctest::Approx(0.3));
    CHECK(phi.value({0.1, -0.2}) == 1.0);
    CHECK(phi.value({0.8, 0.0}) == 0.0);
    CHECK_THROWS_AS(TestFunction(2, {0, 0}, {1, 0}), ConfigError);
    const Vec2 x{0.25, -0.05};
    auto fd_err = [&](double h) {
        const Vec2 g = phi.grad(x);
        double e = 0.0;
        for (int k = 0; k < 2; ++k) {
            Vec2 p = x, m = x;
            p[k] += h;
            m[k] -= h;
            e = std::max(e, std::abs((phi.value(p) - phi.value(m)) / (2 * h) - g[k]));
            e = std::max(e, std::abs((phi.value(p) - 2 * phi.value(x) + phi.value(m)) / (h * h) - phi.second(x, k)));
        }
        const double mixed = (phi.value({x[0] + h, x[1] + h}) - phi.value({x[0] + h, x[1] - h}) -
                              phi.value({x[0] - h, x[1] + h}) + phi.value({x[0] - h, x[1] - h})) /
                             (4 * h * h);
        return std::max(e, std::abs(mixed - phi.mixed(x)));
    };
    CHECK(fd_err(1e-2) / fd_err(5e-3) == doctest::Approx(4.0).epsilon(0.05));
    CHECK(phi.laplacian(x) == phi.second(x, 0) + phi.second(x, 1));
}

TEST_CASE("weak-form residual basics") {
    const auto c = catalog("constant", {0.7, -0.3});
    TestFunction phi(2, {0.1, 0.2}, {0.8, 0.6});
    const Evaluator one = [](double, const Vec2&) { return 2.0; };
    const auto r = weak_form_residual(one, c, phi, 0.5, WeakMode::deterministic, 1.0 / 32, 1.0 / 64, kDomain2);
    CHECK(r.residual <= 1e-6);
    CHECK(r.lhs_u_t == doctest::Approx(r.rhs_u0));

    TestFunction wide(2, {0, 0}, {2.5, 0.5});
    CHECK_THROWS_AS(weak_form_residual(one, c, wide, 0.5, WeakMode::deterministic, 0.1, 0.1, kDomain2), DomainError);
    CHECK_THROWS_AS(weak_form_residual(one, c, phi, 0.5, WeakMode::stratonovich, 0.1, 0.1, kDomain2), ConfigError);
    CHECK_THROWS_AS(weak_form_residual(one, c, phi, 0.55, WeakMode::deterministic, 0.1, 0.1, kDomain2), ConfigError);
    CHECK(parse_weak_mode("ito") == WeakMode::ito);
    CHECK(to_string(WeakMode::stratonovich) == "stratonovich");
    CHECK_THROWS_AS(parse_weak_mode("levy"), ConfigError);

    std::ostringstream os;
    write_residual_csv(os, {{WeakMode::ito, 0.125, 0.25, 0.5, 1e-3}});
    CHECK(os.str().rfind("mode,h,dt,t,residual\nito,0.125,0.25,0.5,", 0) == 0);
}

TEST_CASE("both shear solutions converge in the weak form") {
    const auto b = catalog("shear_flow");
    const auto u0 = InitialDatum::indicator_positive(2, 1);
    // supp phi spans y in [-1/2, 1/2], so cell edges fall on y = 0 and y = +-t^2
    TestFunction phi(2, {0.1, 0.0}, {0.6, 0.5});
    for (auto rule : {SelectionRule::up(), SelectionRule::down()}) {
        CAPTURE(rule.name());
        DeterministicSolution u(b, u0, rule, VacuumFill::transported());
        const auto coarse = weak_form_residual(u.evaluator(), b, phi, 0.5, WeakMode::deterministic, 1.0 / 128,
                                               1.0 / 512, kDomain2);
        const auto fine = weak_form_residual(u.evaluator(), b, phi, 0.5, WeakMode::deterministic, 1.0 / 256,
                                             1.0 / 1024, kDomain2);
        CHECK(fine.residual <= 5e-3);
        CHECK(coarse.residual / fine.residual >= 1.8);
    }
}

TEST_CASE("stochastic weak forms self-converge on a smooth drift") {
    const auto b = catalog("smooth_sin");
    const auto u0 = InitialDatum::gaussian(1, {0.3, 0}, 0.4);
    TestFunction phi(1, {0.2, 0}, {1.0, 0});
    const Box dom{1, {-5, 0}, {5, 0}};
    const int paths = 20, levels = 3;
    std::vector<double> strat(levels), ito(levels);
    double gap = 0.0, var = 0.0;
    for (int p = 0; p < paths; ++p) {
        BrownianPath w(9, p, 1, 0.5, 64 << (levels - 1));
        for (int l = 0; l < levels; ++l) {
            const int n = 64 << l;
            StochasticSolution u(b, u0, w.increments(n), 0.5 / n);
            const auto r = stochastic_weak_form(u.evaluator(), b, phi, 0.5, 1.0 / (16 << l), 0.5 / n, dom,
                                                u.increments());
            strat[l] += r.stratonovich.residual / paths;
            ito[l] += r.ito.residual / paths;
            if (l == levels - 1) {
                gap += r.covariation.gap();
                var += r.covariation.stderr_ * r.covariation.stderr_;
            }
        }
    }
    for (int l = 0; l + 1 < levels; ++l) {
        CHECK(strat[l] / strat[l + 1] >= 1.5);
        CHECK(ito[l] / ito[l + 1] >= 1.5);
    }
    CHECK(std::abs(gap) <= 3.0 * std::sqrt(var));
}
