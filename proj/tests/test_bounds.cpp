#include <doctest.h>

#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <numbers>

#include "loctime/bounds.hpp"
#include "loctime/cofactor.hpp"
#include "loctime/error.hpp"
#include "support.hpp"

using namespace loctime;

namespace {

// Nearest-neighbour walk on the box {0..k-1}^d, unit rates.
Generator lattice_box(int k, int d) {
    const Index n = static_cast<Index>(std::pow(k, d));
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (Index x = 0; x < n; ++x) {
        Index stride = 1;
        for (int axis = 0; axis < d; ++axis, stride *= k) {
            const Index coord = (x / stride) % k;
            if (coord + 1 < k) a(x, x + stride) = a(x + stride, x) = 1.0;
        }
    }
    return validate_generator(a);
}

double ldp_error_terms(double eta, std::size_t s, double t) {
    const double m = static_cast<double>(s);
    return m * std::log(eta * std::sqrt(8.0 * std::numbers::e) * t) + std::log(m) + m / (4.0 * t);
}

} // namespace

TEST_CASE("eta values") {
    CHECK(eta(Eigen::MatrixXd::Zero(3, 3)) == 1.0);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2, 2);
    b(0, 1) = 3.0;
    CHECK(eta(b) == 3.0);
    for (int d : {1, 2, 3}) {
        const auto g = lattice_box(3, d);
        CHECK(eta(g, testing::interval(0, g.size())) == doctest::Approx(2.0 * d));
    }
}

TEST_CASE("hadamard bound and monotone eta") {
    Rng rng(41);
    for (int rep = 0; rep < 300; ++rep) {
        const Index n = 2 + rep % 5;
        Eigen::MatrixXd b = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return rng.uniform() < 0.6 ? 2.5 * rng.uniform() : 0.0; });
        b.diagonal().setZero();
        const double e = eta(b);
        const Index a = rep % n, c = (rep / 2) % n;
        CHECK(std::abs(cofactor(Eigen::MatrixXd(-b), a, c)) <= std::pow(e, n - 1) * (1 + 1e-12));
        CHECK(eta(b.topLeftCorner(n - 1, n - 1)) <= e);
    }
}

TEST_CASE("symmetric rate function on two states") {
    const auto g = two_state_chain();
    CHECK(rate_symmetric(g, Eigen::Vector2d(0.5, 0.5)) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(rate_symmetric(g, Eigen::Vector2d(1.0, 0.0)) == doctest::Approx(1.0));
    CHECK(rate_symmetric(g, Eigen::Vector2d(0.75, 0.25)) ==
          doctest::Approx(std::pow(std::sqrt(0.75) - std::sqrt(0.25), 2)).epsilon(1e-14));
    Eigen::MatrixXd asym(2, 2);
    asym << -2, 2, 1, -1;
    CHECK_THROWS_AS(rate_symmetric(asym, Eigen::Vector2d(0.5, 0.5)), Error);
    CHECK_THROWS_AS(rate_symmetric(g, Eigen::Vector2d(0.6, 0.6)), Error);
}

TEST_CASE("general rate matches symmetric value and square-root minimizer") {
    Rng rng(43);
    for (int rep = 0; rep < 40; ++rep) {
        const Index n = 2 + rep % 4;
        auto g = testing::random_dense(n, 1.0, rng, true);
        Eigen::VectorXd mu = testing::random_simplex(n, 1.0, rng);
        const auto sol = rate_general(g, mu);
        CHECK(sol.value == doctest::Approx(rate_symmetric(g, mu)).epsilon(1e-8));
        const Eigen::VectorXd root = mu.cwiseSqrt() / std::sqrt(mu[0]);
        CHECK((sol.minimizer - root).cwiseAbs().maxCoeff() < 1e-4);
    }
    const auto g = srw_interval(0, 3);
    const auto flat = rate_general(g, Eigen::Vector4d::Constant(0.25));
    CHECK(std::abs(flat.value) < 1e-12);
    CHECK((flat.minimizer.array() - 1.0).abs().maxCoeff() < 1e-8);
}

TEST_CASE("asymmetric two-state rate against one-dimensional minimisation") {
    Eigen::MatrixXd a(2, 2);
    a << -2, 2, 1, -1;
    const auto sol = rate_general(a, Eigen::Vector2d(0.5, 0.5));
    auto objective = [](double t) { return 0.5 * (-2.0 + 2.0 * std::exp(t)) + 0.5 * (-1.0 + std::exp(-t)); };
    const auto best = boost::math::tools::brent_find_minima(objective, -5.0, 5.0, 60);
    CHECK(sol.value == doctest::Approx(-best.second).epsilon(1e-8));
    CHECK(sol.value == doctest::Approx(1.5 - std::sqrt(2.0)).epsilon(1e-10));
}

TEST_CASE("rate function edge cases") {
    Eigen::MatrixXd a(3, 3);
    a << -1, 1, 0, 0, -1, 1, 0, 0, 0;
    CHECK_THROWS_AS(rate_general(a, Eigen::Vector3d(0.3, 0.3, 0.4)), Error);
    const auto one = rate_general(a, Eigen::Vector3d(0.0, 1.0, 0.0));
    CHECK(one.value == doctest::Approx(1.0));
}

TEST_CASE("upper bound examples") {
    const auto g = two_state_chain();
    const auto l = make_simplex_point({0, 1}, Eigen::Vector2d(0.5, 0.5));
    CHECK(density_upper_bound(g, l, 0, 1) == doctest::Approx(std::exp(2.5)).epsilon(1e-13));
    const auto single = make_simplex_point({1}, Eigen::VectorXd::Constant(1, 2.0));
    CHECK(density_upper_bound(g, single, 1, 1) == doctest::Approx(std::exp(-2.0)));
}

TEST_CASE("pointwise dominance on random instances") {
    Rng rng(47);
    for (int rep = 0; rep < 120; ++rep) {
        const Index n = 1 + rep % 4;
        const bool symmetric = rep % 3 != 0;
        const auto g = testing::random_dense(4, 0.8, rng, symmetric);
        const auto range = testing::interval(0, n);
        const auto l = make_simplex_point(range, testing::random_simplex(n, 0.2 + 3.0 * rng.uniform(), rng));
        const Index a = rep % n, b = (rep / 4) % n;
        const double rho = testing::density_any(g, l, a, b);
        CHECK(rho <= density_upper_bound(g, l, a, b) + 1e-12);
    }
}

TEST_CASE("ldp bound arithmetic") {
    const auto g = two_state_chain();
    const std::vector<Index> s{0, 1};
    CHECK(ldp_probability_bound(g, s, 0.0, 10.0) == doctest::Approx(ldp_error_terms(1.0, 2, 10.0)).epsilon(1e-14));
    CHECK(ldp_probability_bound(g, s, 0.0, 10.0) == doctest::Approx(8.42775887).epsilon(1e-8));
    const double slope = ldp_probability_bound(g, s, 1.0, 10.0) - ldp_probability_bound(g, s, 0.0, 10.0);
    CHECK(slope == doctest::Approx(-10.0));
    CHECK(ldp_varadhan_bound(g, s, 0.0, 10.0) == doctest::Approx(ldp_probability_bound(g, s, 0.0, 10.0)));
    CHECK_THROWS_AS(ldp_probability_bound(g, s, 0.0, 0.5), Error);
    Eigen::MatrixXd a(2, 2);
    a << -2, 2, 1, -1;
    CHECK_THROWS_AS(ldp_probability_bound(validate_generator(a), s, 0.0, 5.0), Error);
}

TEST_CASE("linear supremum against a grid and the exact exponential") {
    const auto g = two_state_chain();
    const std::vector<Index> s{0, 1};
    const Eigen::Vector2d v(0.0, 0.5);
    double grid = -INFINITY;
    for (int i = 0; i <= 200000; ++i) {
        const double m = i / 200000.0;
        const double i_rate = std::pow(std::sqrt(m) - std::sqrt(1 - m), 2);
        grid = std::max(grid, v[0] * m + v[1] * (1 - m) - i_rate);
    }
    const double sup = linear_sup_value(g, s, v);
    CHECK(sup == doctest::Approx(grid).epsilon(1e-8));
    for (double t : {1.0, 5.0, 20.0}) {
        const double exact = log_feynman_kac(g, s, v, 0, t);
        CHECK(exact <= ldp_varadhan_bound(g, s, sup, t));
    }
    // e^{T(A+V)} for A + V = [[-1, 1], [1, -0.5]]
    const double l1 = (-1.5 + std::sqrt(0.25 + 4.0)) / 2, l2 = (-1.5 - std::sqrt(0.25 + 4.0)) / 2;
    auto row_sum = [&](double t) {
        const double e1 = std::exp(l1 * t), e2 = std::exp(l2 * t);
        // Sylvester: exp(tM) = (e1 (M - l2) - e2 (M - l1)) / (l1 - l2)
        const double m00 = -1.0, m01 = 1.0;
        return (e1 * (m00 - l2 + m01) - e2 * (m00 - l1 + m01)) / (l1 - l2);
    };
    CHECK(log_feynman_kac(g, s, v, 0, 2.0) == doctest::Approx(std::log(row_sum(2.0))).epsilon(1e-12));
}

TEST_CASE("half-space infimum") {
    const auto g = two_state_chain();
    const std::vector<Index> s{0, 1};
    // mu(2) >= 0.8: the cheapest point is on the boundary
    const double inf = halfspace_inf_rate(g, s, Eigen::Vector2d(0.0, 1.0), 0.8);
    CHECK(inf == doctest::Approx(std::pow(std::sqrt(0.2) - std::sqrt(0.8), 2)).epsilon(1e-9));
    CHECK(halfspace_inf_rate(g, s, Eigen::Vector2d(0.0, 1.0), 0.3) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::isinf(halfspace_inf_rate(g, s, Eigen::Vector2d(0.0, 1.0), 1.5)));
    const auto walk = srw_interval(0, 2);
    const std::vector<Index> three{0, 1, 2};
    const double v3 = halfspace_inf_rate(walk, three, Eigen::Vector3d(1.0, 0.0, 0.0), 0.6);
    double grid = INFINITY;
    for (int i = 0; i <= 400; ++i)
        for (int j = 0; i + j <= 400; ++j) {
            const Eigen::Vector3d mu(i / 400.0, j / 400.0, (400 - i - j) / 400.0);
            if (mu[0] < 0.6) continue;
            grid = std::min(grid, rate_symmetric(walk.rates(), mu));
        }
    CHECK(v3 <= grid + 1e-12);
    CHECK(v3 >= grid - 1e-3);
}

TEST_CASE("discrete variational constant") {
    GridFunctional zero{[](const Eigen::VectorXd&) { return 0.0; },
                        [](const Eigen::VectorXd& phi) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(phi.size()); }};
    for (double alpha : {0.5, 1.0, 3.0}) {
        const auto r = rescaled_chi_discrete(2, alpha, zero);
        CHECK(std::abs(r.value) < 1e-10);
        CHECK((r.mu.array() - 0.2).abs().maxCoeff() < 1e-4);
    }

    // delta potential at the origin on the box {-1, 0, 1}
    const double alpha = 0.8;
    GridFunctional delta{[](const Eigen::VectorXd& phi) { return phi[1]; }, {}};
    const auto r = rescaled_chi_discrete(1, alpha, delta);
    auto value = [&](double t, double p) {
        const double x = std::sin(t) * std::cos(p), y = std::sin(t) * std::sin(p), z = std::cos(t);
        return 0.5 * alpha * alpha * ((x - z) * (x - z) + (z - y) * (z - y)) - alpha * z * z;
    };
    double bt = 0, bp = 0, best = INFINITY;
    double lo_t = 0, hi_t = std::numbers::pi / 2, lo_p = 0, hi_p = std::numbers::pi / 2;
    for (int level = 0; level < 4; ++level) {
        for (int i = 0; i <= 400; ++i)
            for (int j = 0; j <= 400; ++j) {
                const double t = lo_t + (hi_t - lo_t) * i / 400, p = lo_p + (hi_p - lo_p) * j / 400;
                const double v = value(t, p);
                if (v < best) best = v, bt = t, bp = p;
            }
        const double wt = (hi_t - lo_t) / 50, wp = (hi_p - lo_p) / 50;
        lo_t = bt - wt, hi_t = bt + wt, lo_p = bp - wp, hi_p = bp + wp;
    }
    CHECK(r.value == doctest::Approx(best).epsilon(1e-6));
}
