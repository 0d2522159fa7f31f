#include <boost/math/distributions/poisson.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "loctime/bounds.hpp"
#include "loctime/chain.hpp"
#include "loctime/cofactor.hpp"
#include "loctime/density.hpp"
#include "loctime/harness.hpp"
#include "loctime/ray_knight.hpp"
#include "support.hpp"

using namespace loctime;
using boost::math::quadrature::gauss_kronrod;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

double rel_diff(double x, double y) {
    const double scale = std::max(std::abs(x), std::abs(y));
    return scale == 0.0 ? 0.0 : std::abs(x - y) / scale;
}

Outcome partition_of_unity() {
    const auto g = two_state_chain();
    double worst = 0.0, worst_identity = 0.0;
    for (double t : {0.1, 1.0, 5.0}) {
        auto other = [&](double u) { return density(g, make_simplex_point({0, 1}, Eigen::Vector2d(u, t - u)), 0, 1, 1e-15); };
        auto same = [&](double u) { return density(g, make_simplex_point({0, 1}, Eigen::Vector2d(u, t - u)), 0, 0, 1e-15); };
        const double p_other = gauss_kronrod<double, 31>::integrate(other, 0.0, t, 0, 1e-14);
        const double p_same = gauss_kronrod<double, 31>::integrate(same, 0.0, t, 0, 1e-14);
        worst_identity = std::max({worst_identity, std::abs(p_other - std::exp(-t) * std::sinh(t)),
                                   std::abs(p_same - std::exp(-t) * (std::cosh(t) - 1.0))});
        worst = std::max(worst, std::abs(std::exp(-t) + p_other + p_same - 1.0));
    }
    return {worst <= 1e-8 && worst_identity <= 1e-8,
            fmt("max |sum - 1| = %.2e, max bessel-identity error = %.2e", worst, worst_identity)};
}

Outcome oracle_triangle() {
    Rng rng(101);
    double worst = 0.0;
    int instances = 0;
    for (; instances < 100; ++instances) {
        const int lo = -2 - static_cast<int>(rng.uniform() * 3);
        const auto g = srw_interval(lo, 6);
        const Index m = 2 + instances % 3 + (instances % 7 == 0 ? 1 : 0);
        const Index first = 1 + static_cast<Index>(rng.uniform() * 3);
        const auto range = testing::interval(first, std::min<Index>(m, 4));
        const Index n = static_cast<Index>(range.size());
        const auto l = make_simplex_point(range, testing::random_simplex(n, 0.2 + 2.3 * rng.uniform(), rng));
        const Index a = range[static_cast<std::size_t>(rng.uniform() * n)];
        const Index b = range[static_cast<std::size_t>(rng.uniform() * n)];
        const double s = density(g, l, a, b);
        const double q = density_quadrature(g, l, a, b);
        const double t = density_tridiagonal(g, l, a, b);
        worst = std::max({worst, rel_diff(s, q), rel_diff(s, t), rel_diff(q, t)});
    }
    return {worst <= 1e-8, fmt("%.0f instances, max relative disagreement %.2e", instances, worst)};
}

Outcome r_invariance() {
    Rng rng(103);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        // dense supports up to three states, nearest-neighbour chains up to four
        const bool dense = rep % 2 == 1;
        const Index n = dense ? 2 + rep % 2 : 2 + rep % 3;
        const auto g = dense ? testing::random_dense(n, 0.9, rng) : testing::random_tridiagonal(0, static_cast<int>(n) - 1, rng);
        const auto range = testing::interval(0, n);
        const auto l = make_simplex_point(range, testing::random_simplex(n, 0.3 + 1.5 * rng.uniform(), rng));
        const Index a = rep % n, b = (rep / 3) % n;
        DensityOptions opt;
        const double base = density_certified(g, l, a, b, opt).value;
        Eigen::VectorXd r(n);
        for (Index i = 0; i < n; ++i) r[i] = std::exp(2.0 * rng.uniform() - 1.0);
        opt.conjugation = r;
        worst = std::max(worst, rel_diff(base, density_certified(g, l, a, b, opt).value));
    }
    return {worst <= 1e-9, fmt("100 random r, max relative change %.2e", worst)};
}

Outcome monte_carlo_law() {
    DensityMcConfig srw;
    srw.generator = srw_interval(0, 2);
    srw.range = {0, 1, 2};
    srw.a = 0;
    srw.b = 2;
    srw.horizon = 2.0;
    srw.samples = 1'000'000;
    srw.seed = 2024;
    const auto r3 = verify_density_mc(srw);

    DensityMcConfig two;
    two.generator = two_state_chain();
    two.range = {0, 1};
    two.a = 0;
    two.b = 1;
    two.horizon = 1.0;
    two.samples = 1'000'000;
    two.seed = 2025;
    two.cells_per_axis = 40;
    const auto r2 = verify_density_mc(two);
    const bool pass = r3.p_value > 1e-3 && r2.p_value > 1e-3 && std::abs(r2.z_same) <= 4.0 &&
                      std::abs(r2.z_other) <= 4.0;
    return {pass, fmt("3-state p = %.3f, two-state p = %.3f, conditioning z = %.2f / %.2f", r3.p_value, r2.p_value,
                      r2.z_other, r2.z_same)};
}

Outcome hadamard_eta() {
    Rng rng(107);
    int violations = 0;
    for (int rep = 0; rep < 10'000; ++rep) {
        const Index n = 1 + rep % 6;
        Eigen::MatrixXd b = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return rng.uniform() < 0.7 ? 3.0 * rng.uniform() : 0.0; });
        b.diagonal().setZero();
        const Index a = static_cast<Index>(rng.uniform() * n), c = static_cast<Index>(rng.uniform() * n);
        const double det = cofactor(Eigen::MatrixXd(-b), a, c);
        if (std::abs(det) > std::pow(eta(b), n - 1) * (1.0 + 1e-12)) ++violations;
    }
    int nested = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        const auto g = testing::random_dense(6, 0.6, rng);
        std::vector<Index> big, small;
        for (Index x = 0; x < 6; ++x)
            if (rng.uniform() < 0.7) big.push_back(x);
        if (big.empty()) big.push_back(0);
        for (Index x : big)
            if (rng.uniform() < 0.6) small.push_back(x);
        if (small.empty()) small.push_back(big.front());
        if (eta(g, small) > eta(g, big)) ++nested;
    }
    return {violations == 0 && nested == 0,
            fmt("Hadamard violations %.0f / 10000, monotonicity violations %.0f / 1000", violations, nested)};
}

Outcome pointwise_dominance() {
    Rng rng(109);
    int violations = 0;
    double tightest = INFINITY;
    for (int rep = 0; rep < 1100; ++rep) {
        const bool symmetric = rep < 1000;
        const Index n = 1 + rep % 4;
        const auto g = testing::random_dense(4, 0.8, rng, symmetric);
        const auto range = testing::interval(0, n);
        const auto l = make_simplex_point(range, testing::random_simplex(n, 0.1 + 3.0 * rng.uniform(), rng));
        const Index a = static_cast<Index>(rng.uniform() * n), b = static_cast<Index>(rng.uniform() * n);
        const double rho = testing::density_any(g, l, a, b);
        const double bound = density_upper_bound(g, l, a, b);
        if (!(rho <= bound + 1e-12)) ++violations;
        if (n > 1 && rho > 0.0) tightest = std::min(tightest, bound / rho);
    }
    return {violations == 0, fmt("violations %.0f / 1100, smallest bound/density ratio for |R| > 1: %.3g", violations, tightest)};
}

// log of the upper 99% confidence limit of a binomial frequency
double log_upper_limit(std::uint64_t hits, std::uint64_t n) {
    if (hits == 0) return std::log(-std::log(0.01) / static_cast<double>(n));
    const double p = static_cast<double>(hits) / static_cast<double>(n);
    return std::log(p + 2.576 * std::sqrt(p * (1.0 - p) / static_cast<double>(n)));
}

Outcome ldp_dominance() {
    struct Case {
        Generator g;
        std::vector<Index> s;
        Index start;
        Eigen::VectorXd c;
        double threshold;
    };
    const auto walk = srw_interval(-3, 3);
    std::vector<Case> cases{
        {two_state_chain(), {0, 1}, 0, Eigen::Vector2d(0.0, 1.0), 0.8},
        {srw_interval(0, 2), {0, 1, 2}, 0, Eigen::Vector3d(1.0, 0.0, 0.0), 0.6},
        {walk, {3, 4, 5}, 3, Eigen::Vector3d(0.0, 0.0, 1.0), 0.5},
    };
    double margin = INFINITY;
    bool pass = true;
    std::uint64_t seed = 300;
    for (const auto& k : cases) {
        const ChainSimulator sim(k.g);
        for (double t : {5.0, 10.0}) {
            const std::uint64_t n = 1'000'000;
            std::uint64_t hits = 0;
            Rng rng(++seed);
            for (std::uint64_t i = 0; i < n; ++i) {
                const auto p = sim.fixed_time(k.start, t, rng);
                bool inside = true;
                for (Index x : p.range) inside = inside && std::find(k.s.begin(), k.s.end(), x) != k.s.end();
                if (!inside) continue;
                double dot = 0.0;
                for (std::size_t j = 0; j < k.s.size(); ++j) dot += k.c[static_cast<Index>(j)] * p.local_times[k.s[j]] / t;
                if (dot >= k.threshold) ++hits;
            }
            const double bound = ldp_probability_bound(k.g, k.s, halfspace_inf_rate(k.g, k.s, k.c, k.threshold), t);
            const double upper = log_upper_limit(hits, n);
            margin = std::min(margin, bound - upper);
            pass = pass && upper <= bound;
        }
    }
    double linear_margin = INFINITY;
    for (const auto& k : cases) {
        Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(static_cast<Index>(k.s.size()), 0.0, 0.5);
        const double sup = linear_sup_value(k.g, k.s, v);
        for (double t : {1.0, 5.0, 20.0}) {
            const double exact = log_feynman_kac(k.g, k.s, v, k.start, t);
            const double bound = ldp_varadhan_bound(k.g, k.s, sup, t);
            linear_margin = std::min(linear_margin, bound - exact);
            pass = pass && exact <= bound;
        }
    }
    return {pass, fmt("min margin half-space %.3f, linear %.3f (log scale)", margin, linear_margin)};
}

Outcome rate_function() {
    Rng rng(113);
    double worst_value = 0.0, worst_min = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        const Index n = 2 + rep % 5;
        const auto g = testing::random_dense(n, 1.0, rng, true);
        const Eigen::VectorXd mu = testing::random_simplex(n, 1.0, rng, 0.01);
        const auto sol = rate_general(g, mu);
        worst_value = std::max(worst_value, std::abs(sol.value - rate_symmetric(g, mu)));
        const Eigen::VectorXd root = mu.cwiseSqrt() / std::sqrt(mu[0]);
        worst_min = std::max(worst_min, (sol.minimizer - root).cwiseAbs().maxCoeff());
    }
    Eigen::MatrixXd a(2, 2);
    a << -2, 2, 1, -1;
    const double general = rate_general(a, Eigen::Vector2d(0.5, 0.5)).value;
    auto objective = [](double t) { return 0.5 * (-2.0 + 2.0 * std::exp(t)) + 0.5 * (-1.0 + std::exp(-t)); };
    const double oracle = -boost::math::tools::brent_find_minima(objective, -5.0, 5.0, 60).second;
    const double asym = std::abs(general - oracle);
    return {worst_value <= 1e-6 && worst_min <= 1e-4 && asym <= 1e-8,
            fmt("symmetric value err %.1e, minimizer err %.1e, asymmetric err %.1e", worst_value, worst_min, asym)};
}

Outcome rk_kernels() {
    boost::math::quadrature::exp_sinh<double> integrator;
    double norm = 0.0;
    for (double h1 : {0.05, 0.5, 1.0, 2.0, 5.0, 10.0}) {
        const double inner = integrator.integrate([&](double h2) { return rk_inner_density(h1, h2); }, 1e-14);
        const double outer = integrator.integrate([&](double h2) { return rk_outer_density(h1, h2); }, 1e-14);
        norm = std::max({norm, std::abs(inner - 1.0), std::abs(outer + rk_outer_atom(h1) - 1.0)});
    }
    double mixture = 0.0;
    for (double h1 : {0.2, 1.0, 3.0})
        for (double h2 = 0.1; h2 < 10.0; h2 += 0.3) {
            const boost::math::poisson_distribution<double> k(h1);
            double inner = 0.0, outer = 0.0;
            for (int j = 0; j < 200; ++j) {
                const double w = boost::math::pdf(k, j);
                inner += w * boost::math::pdf(boost::math::gamma_distribution<double>(j + 1.0), h2);
                if (j > 0) outer += w * boost::math::pdf(boost::math::gamma_distribution<double>(j), h2);
            }
            mixture = std::max({mixture, std::abs(inner - rk_inner_density(h1, h2)),
                                std::abs(outer - rk_outer_density(h1, h2))});
        }
    Rng rng(127);
    const auto g = srw_interval(-3, 6);
    double product = 0.0;
    for (int rep = 0; rep < 60; ++rep) {
        const Index m = 1 + rep % 4;
        const auto range = testing::interval(1 + rep % 3, m);
        const auto l = make_simplex_point(range, testing::random_simplex(m, 0.2 + 2.0 * rng.uniform(), rng));
        const Index a = range[static_cast<std::size_t>(rng.uniform() * m)];
        const Index b = range[static_cast<std::size_t>(rng.uniform() * m)];
        const auto [rho, kernel] = rk_fixed_time_check(g, l, a, b);
        product = std::max(product, rel_diff(rho, kernel));
    }
    return {norm <= 1e-10 && mixture <= 1e-10 && product <= 1e-10,
            fmt("normalisation %.1e, mixture %.1e, product identity %.1e (relative)", norm, mixture, product)};
}

Outcome rk_equivalence() {
    RayKnightMcConfig c;
    c.b = 2;
    c.h = 1.0;
    c.samples = 200'000;
    c.seed = 131;
    const auto r = verify_rayknight_mc(c);
    double worst = 0.0;
    for (const auto& s : r.sites) worst = std::max({worst, std::abs(s.z_mean), std::abs(s.z_var)});
    const bool pass = worst < 3.0 && std::abs(r.z_atom_direct) < 4.0 && std::abs(r.z_atom_profile) < 4.0;
    return {pass, fmt("max moment |z| = %.2f, atom z direct %.2f, profile %.2f", worst, r.z_atom_direct,
                      r.z_atom_profile)};
}

Outcome boundary_vanishing() {
    bool pass = true;
    double worst_ratio = 0.0;
    for (int size : {2, 3, 4}) {
        const auto g = srw_interval(-2, 5);
        const auto range = testing::interval(2, size);
        for (bool left : {true, false}) {
            const Index c = left ? range.front() : range.back();
            double prev = INFINITY, first = 0.0, last = 0.0;
            for (double lc : {1e-2, 1e-3, 1e-4}) {
                Eigen::VectorXd v = Eigen::VectorXd::Constant(size, 0.5);
                v[left ? 0 : size - 1] = lc;
                const double rho = density(g, make_simplex_point(range, v), c, c);
                pass = pass && rho < prev && rho >= 0.0;
                if (prev == INFINITY) first = rho;
                last = rho;
                prev = rho;
            }
            worst_ratio = std::max(worst_ratio, last / first);
        }
    }
    pass = pass && worst_ratio < 0.05;
    return {pass, fmt("monotone decrease at all endpoints, largest rho(1e-4)/rho(1e-2) = %.2e", worst_ratio)};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"two-state partition of unity", partition_of_unity},
        {"oracle triangle", oracle_triangle},
        {"conjugation invariance", r_invariance},
        {"Monte Carlo law", monte_carlo_law},
        {"Hadamard bound and eta monotonicity", hadamard_eta},
        {"pointwise dominance", pointwise_dominance},
        {"LDP dominance", ldp_dominance},
        {"rate function", rate_function},
        {"Ray-Knight kernels", rk_kernels},
        {"Ray-Knight distributional equivalence", rk_equivalence},
        {"boundary vanishing", boundary_vanishing},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s  %2zu %-40s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
