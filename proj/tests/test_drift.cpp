#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "stochtr/drift.hpp"

using namespace stochtr;

TEST_CASE("catalog lookup") {
    for (const auto& n : catalog_names()) CHECK(catalog(n).name == n);
    CHECK_THROWS_AS(catalog("vortex"), LookupError);
    CHECK(catalog("constant", {1.0, -2.0}).dim == 2);
    CHECK(catalog("constant").dim == 1);
}

TEST_CASE("catalog values") {
    const auto shear = catalog("shear_flow");
    CHECK(shear.eval({3, 4})[0] == 1.0);
    CHECK(shear.eval({3, 4})[1] == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(shear.eval({0, 0})[0] == 0.0);       // sign(0) = 0
    CHECK(shear.eval({0, 0}, 1.0)[0] == 1.0);  // tie-break
    CHECK(std::isnan(shear.div({1, 0})));
    CHECK(shear.div({1, 0.25}) == doctest::Approx(2.0));
    CHECK(catalog("sqrt_1d").eval({-4, 0})[0] == doctest::Approx(2.0));
    CHECK(catalog("sign_1d").eval({-0.1, 0})[0] == -1.0);
}

TEST_CASE("BV data") {
    const auto sg = catalog("sign_1d");
    CHECK(sg.bv->total(Box{1, {-1, 0}, {1, 0}}) == 2.0);
    CHECK(sg.bv->total(Box{1, {0.1, 0}, {1, 0}}) == 0.0);
    const auto ss = catalog("smooth_sin");
    const double ref = oracle::integrate([](double x) { return std::abs(std::cos(x)); }, 0, oracle::pi);
    CHECK(ss.bv->total(Box{1, {0, 0}, {oracle::pi, 0}}) == doctest::Approx(ref).epsilon(1e-12));
    CHECK(ss.bv->total(Box{1, {-2.5, 0}, {7.1, 0}}) ==
          doctest::Approx(oracle::integrate([](double x) { return std::abs(std::cos(x)); }, -2.5, -0.5 * oracle::pi) +
                          oracle::integrate([](double x) { return std::abs(std::cos(x)); }, -0.5 * oracle::pi, 0.5 * oracle::pi) +
                          oracle::integrate([](double x) { return std::abs(std::cos(x)); }, 0.5 * oracle::pi, 1.5 * oracle::pi) +
                          oracle::integrate([](double x) { return std::abs(std::cos(x)); }, 1.5 * oracle::pi, 7.1))
              .epsilon(1e-10));
    const auto sh = catalog("shear_flow");
    const Box q{2, {-1, -1}, {2, 4}};
    // line atom 2 * width 3; density 1/sqrt|y| integrates to 2(sqrt 1 + sqrt 4) per unit x
    CHECK(sh.bv->singular(q) == doctest::Approx(6.0));
    CHECK(sh.bv->absolutely_continuous(q) == doctest::Approx(3.0 * 6.0));
    const auto sq = catalog("sqrt_1d");
    CHECK(sq.bv->total(Box{1, {-1, 0}, {4, 0}}) ==
          doctest::Approx(2.0 * oracle::integrate_singular([](double x) { return 0.5 / std::sqrt(x); }, 0, 1) +
                          oracle::integrate([](double x) { return 0.5 / std::sqrt(x); }, 1, 4))
              .epsilon(1e-8));
}

TEST_CASE("BV data is additive on disjoint boxes and monotone") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-3, 3);
    for (const auto& name : catalog_names()) {
        const auto b = catalog(name);
        for (int t = 0; t < 50; ++t) {
            double a = u(rng), c = u(rng);
            if (a > c) std::swap(a, c);
            const double m = a + 0.37 * (c - a);
            Box whole{b.dim, {a, -1.3}, {c, 2.2}}, left = whole, right = whole;
            left.hi[0] = m;
            right.lo[0] = std::nextafter(m, 1e9);
            const double tw = b.bv->total(whole);
            CHECK(tw >= 0.0);
            CHECK(tw == doctest::Approx(b.bv->total(left) + b.bv->total(right)).epsilon(1e-9));
            CHECK(b.bv->total(left) <= tw + 1e-12);
        }
    }
}

TEST_CASE("divergence matches finite differences off the singular set") {
    const double h = 1e-4;
    for (const auto& name : catalog_names()) {
        const auto b = catalog(name);
        for (Vec2 x : {Vec2{0.7, 0.4}, Vec2{-1.3, -2.1}, Vec2{2.2, 0.9}}) {
            if (b.dim == 1) x[1] = 0.0;
            double fd = (b.eval({x[0] + h, x[1]})[0] - b.eval({x[0] - h, x[1]})[0]) / (2 * h);
            if (b.dim == 2) fd += (b.eval({x[0], x[1] + h})[1] - b.eval({x[0], x[1] - h})[1]) / (2 * h);
            CHECK(b.div(x) == doctest::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("shear split") {
    const auto s = split_shear();
    const auto b1 = s.b1.eval({0.3, 9});
    CHECK(b1[0] == 1.0);
    CHECK(b1[1] == doctest::Approx(2.0));
    CHECK(s.b2.eval({5, 0.5})[1] == 0.0);
    CHECK(s.b2.eval({5, 4})[1] == doctest::Approx(2.0));
    CHECK(*s.b1_sup == doctest::Approx(std::sqrt(5.0)));

    const auto parent = catalog("shear_flow");
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-50, 50);
    for (int i = 0; i < 10000; ++i) {
        const Vec2 p{u(rng), u(rng)};
        const auto a = s.b1.eval(p), c = s.b2.eval(p), full = parent.eval(p);
        CHECK(std::abs(a[0] + c[0] - full[0]) <= 1e-12);
        CHECK(std::abs(a[1] + c[1] - full[1]) <= 1e-12);
    }

    // Sampled suprema over |y| <= 1e6 (x = 0 maximizes the growth ratio).
    double growth = 0.0, divsup = 0.0;
    for (int k = 0; k <= 200000; ++k) {
        const double y = std::pow(10.0, -3.0 + 9.0 * k / 200000.0);
        growth = std::max(growth, std::abs(s.b2.eval({0, y})[1]) / (1.0 + y));
        divsup = std::max(divsup, std::abs(s.b2.div({0, y})));
    }
    CHECK(*s.b2_growth >= growth);
    CHECK(*s.b2_growth == doctest::Approx(growth).epsilon(1e-6));
    CHECK(*s.div_b2_sup >= divsup);
    CHECK(*s.div_b2_sup == doctest::Approx(divsup).epsilon(1e-4));
    CHECK(alpha_rate(s) == doctest::Approx(5.0 + growth * growth + divsup).epsilon(1e-4));
    CHECK(alpha_rate(s) == doctest::Approx(9.0 - 2.0 * std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("alpha for bounded drifts") {
    CHECK(alpha_rate(split_for(catalog("constant", {3.0, 4.0}))) == doctest::Approx(25.0));
    CHECK(alpha_rate(split_for(catalog("smooth_sin"))) == doctest::Approx(1.0));
    DriftSplit empty;
    CHECK_THROWS_AS(alpha_rate(empty), ConfigError);
    const auto sq = split_for(catalog("sqrt_1d"), 1.0);
    for (double x : {-7.0, -0.3, 0.2, 3.0}) CHECK(sq.b1.eval({x, 0})[0] + sq.b2.eval({x, 0})[0] ==
                                                 doctest::Approx(std::sqrt(std::abs(x))));
}

TEST_CASE("Prodi-Serrin") {
    const auto sh = catalog("shear_flow");
    const Box q2{2, {-1, -1}, {1, 1}};
    CHECK(prodi_serrin_norm(sh, 4, 4, q2, 1.0).condition);
    CHECK_FALSE(prodi_serrin_norm(sh, 2, 2, q2, 1.0).condition);
    const auto r = prodi_serrin_norm(catalog("sign_1d"), 3, 3, Box{1, {-1, 0}, {1, 0}}, 1.0);
    CHECK(r.norm == doctest::Approx(std::cbrt(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(prodi_serrin_norm(sh, 1.0, 4, q2, 1.0), ConfigError);
}

TEST_CASE("weighted tails") {
    const auto sg = catalog("sign_1d");
    CHECK(sg.bv->weighted_tail(2.0, 0.5) == 0.0);
    const auto sh = catalog("shear_flow");
    // 2D oracle: the line atom plus the density 1/sqrt|y| in polar form.
    const double N = 2.0, R = 1.0;
    const double line = 2.0 * 2.0 * oracle::integrate([&](double x) { return std::pow(1 + x, -N); }, R, 1e6, 1e-12);
    const double ang = 4.0 * oracle::integrate_singular([](double p) { return std::pow(std::sin(p), -0.5); }, 0, oracle::pi / 2);
    boost::math::quadrature::exp_sinh<double> es;
    const double rad = es.integrate([&](double r) { return std::sqrt(r) * std::pow(1 + r, -N); }, R,
                                    std::numeric_limits<double>::infinity());
    CHECK(sh.bv->weighted_tail(N, R) == doctest::Approx(line + ang * rad).epsilon(1e-5));
    double prev = 1e300;
    for (double Rk : {1.0, 2.0, 5.0, 10.0, 100.0, 1e4, 1e6}) {
        const double t = sh.bv->weighted_tail(N, Rk);
        CHECK(t <= prev);
        prev = t;
    }
    CHECK(prev < 0.1);
    for (const auto& name : catalog_names()) {
        const auto b = catalog(name);
        CHECK(b.bv->weighted_tail(2.0, 10.0) <= b.bv->weighted_tail(2.0, 5.0));
    }
    CHECK_THROWS_AS(sh.bv->weighted_tail(1.2, 1.0), ConfigError);
}
