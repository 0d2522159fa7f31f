#include <doctest.h>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include <cmath>

#include "loctime/density.hpp"
#include "loctime/error.hpp"
#include "loctime/ray_knight.hpp"
#include "support.hpp"

using namespace loctime;

TEST_CASE("kernel values") {
    CHECK(rk_inner_density(0.0, 1e-300) == doctest::Approx(1.0));
    CHECK(rk_inner_density(1.0, 1.0) == doctest::Approx(0.30850832255367094).epsilon(1e-14));
    CHECK(rk_inner_density(1.0, 1.0) == doctest::Approx(std::exp(-2.0) * boost::math::cyl_bessel_i(0, 2.0)).epsilon(1e-14));
    CHECK(rk_outer_atom(1.0) == doctest::Approx(0.36787944117144233).epsilon(1e-15));
    CHECK(rk_outer_atom(0.0) == 1.0);
    CHECK(rk_outer_density(0.0, 1.0) == 0.0);
    CHECK_THROWS_AS(rk_inner_density(-1.0, 1.0), Error);
}

TEST_CASE("kernels are normalised") {
    boost::math::quadrature::exp_sinh<double> integrator;
    for (double h1 : {0.1, 1.0, 3.0, 7.5}) {
        const double inner = integrator.integrate([&](double h2) { return rk_inner_density(h1, h2); }, 1e-14);
        CHECK(inner == doctest::Approx(1.0).epsilon(1e-10));
        const double outer = integrator.integrate([&](double h2) { return rk_outer_density(h1, h2); }, 1e-14);
        CHECK(outer + rk_outer_atom(h1) == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("kernels are poisson mixtures of gamma laws") {
    for (double h1 : {0.3, 1.0, 2.5}) {
        const boost::math::poisson_distribution<double> k(h1);
        for (double h2 = 0.05; h2 < 12.0; h2 += 0.35) {
            double inner = 0.0, outer = 0.0;
            for (int j = 0; j < 200; ++j) {
                const double w = boost::math::pdf(k, j);
                inner += w * boost::math::pdf(boost::math::gamma_distribution<double>(j + 1.0), h2);
                if (j > 0) outer += w * boost::math::pdf(boost::math::gamma_distribution<double>(j), h2);
            }
            CHECK(rk_inner_density(h1, h2) == doctest::Approx(inner).epsilon(1e-10));
            CHECK(rk_outer_density(h1, h2) == doctest::Approx(outer).epsilon(1e-10));
        }
    }
}

TEST_CASE("profile structure") {
    const Rng root(99);
    for (std::uint64_t i = 0; i < 300; ++i) {
        const auto p = sample_rk_profile(3, 1.2, 5, root.split(i));
        CHECK(p.at(3) == 1.2);
        CHECK(p.lo == -5);
        CHECK(p.hi == 8);
        bool dead = false;
        for (int x = 4; x <= 8; ++x) {
            if (dead) CHECK(p.at(x) == 0.0);
            if (p.at(x) == 0.0) dead = true;
        }
        dead = false;
        for (int x = -1; x >= -5; --x) {
            if (dead) CHECK(p.at(x) == 0.0);
            if (p.at(x) == 0.0) dead = true;
        }
        for (int x = 0; x <= 3; ++x) CHECK(p.at(x) > 0.0);
    }
    const auto a = sample_rk_profile(2, 1.0, 3, root);
    const auto b = sample_rk_profile(2, 1.0, 3, root);
    CHECK(a.values == b.values);
}

TEST_CASE("profile atom beyond the pivot") {
    const Rng root(5);
    const int n = 100'000;
    int zeros = 0;
    for (int i = 0; i < n; ++i)
        if (sample_rk_profile(2, 1.0, 2, root.split(static_cast<std::uint64_t>(i))).at(3) == 0.0) ++zeros;
    const double p = std::exp(-1.0);
    CHECK(std::abs(static_cast<double>(zeros) / n - p) < 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("fixed-time product identity") {
    const auto g = srw_interval(-3, 5);
    Rng rng(61);
    for (int rep = 0; rep < 30; ++rep) {
        const Index m = 1 + rep % 4;
        const Index first = 1 + rep % 3;
        const auto range = testing::interval(first, m);
        const auto l = make_simplex_point(range, testing::random_simplex(m, 0.3 + 2.0 * rng.uniform(), rng));
        const Index a = range[static_cast<std::size_t>(rep) % range.size()];
        const Index b = range[static_cast<std::size_t>(rep / 2) % range.size()];
        const auto [rho, kernel] = rk_fixed_time_check(g, l, a, b);
        CHECK(kernel == doctest::Approx(rho).epsilon(1e-10));
        if (m > 1) CHECK(kernel == doctest::Approx(density_tridiagonal(g, l, a, b)).epsilon(1e-10));
    }
}

TEST_CASE("fixed-time identity on two sites") {
    const auto g = srw_interval(0, 3);
    const auto l = make_simplex_point({1, 2}, Eigen::Vector2d(0.5, 0.5));
    const auto [rho, kernel] = rk_fixed_time_check(g, l, 1, 2);
    // the two sites are left through their outer neighbours as well
    CHECK(rho == doctest::Approx(std::exp(-2.0) * boost::math::cyl_bessel_i(0, 1.0)).epsilon(1e-13));
    CHECK(kernel == doctest::Approx(rho).epsilon(1e-12));
}

TEST_CASE("fixed-time identity needs a walk") {
    const auto ends = srw_interval(0, 2);
    const auto l = make_simplex_point({0, 1}, Eigen::Vector2d(0.5, 0.5));
    CHECK_THROWS_AS(rk_fixed_time_check(ends, l, 0, 1), Error);
    Rng rng(2);
    const auto lazy = testing::random_tridiagonal(0, 4, rng);
    const auto mid = make_simplex_point({1, 2}, Eigen::Vector2d(0.5, 0.5));
    CHECK_THROWS_AS(rk_fixed_time_check(lazy, mid, 1, 2), Error);
}
