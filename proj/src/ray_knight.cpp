#include "loctime/ray_knight.hpp"

#include <algorithm>
#include <cmath>

#include "loctime/error.hpp"
#include "loctime/special.hpp"

namespace loctime {

double rk_inner_density(double h1, double h2) {
    if (!(h1 >= 0.0) || !(h2 >= 0.0)) throw Error(ErrorKind::DomainError, "kernel arguments must be nonnegative");
    const double d = std::sqrt(h1) - std::sqrt(h2);
    return std::exp(-d * d) * bessel_scaled(0, 2.0 * std::sqrt(h1 * h2));
}

double rk_outer_atom(double h1) {
    if (!(h1 >= 0.0)) throw Error(ErrorKind::DomainError, "kernel argument must be nonnegative");
    return std::exp(-h1);
}

double rk_outer_density(double h1, double h2) {
    if (!(h1 >= 0.0) || !(h2 > 0.0)) throw Error(ErrorKind::DomainError, "need h1 >= 0 and h2 > 0");
    if (h1 == 0.0) return 0.0;
    const double d = std::sqrt(h1) - std::sqrt(h2);
    return std::exp(-d * d) * std::sqrt(h1 / h2) * bessel_scaled(1, 2.0 * std::sqrt(h1 * h2));
}

double sample_inner_step(double h, Rng& rng) {
    return rng.gamma(static_cast<double>(rng.poisson(h)) + 1.0);
}

double sample_outer_step(double h, Rng& rng) {
    const auto k = rng.poisson(h);
    return k == 0 ? 0.0 : rng.gamma(static_cast<double>(k));
}

RkProfile sample_rk_profile(int b, double h, int window, const Rng& rng) {
    if (b < 1) throw Error(ErrorKind::DomainError, "b must be at least 1");
    if (!(h > 0.0)) throw Error(ErrorKind::DomainError, "level must be positive");
    if (window < 0) throw Error(ErrorKind::DomainError, "window must be nonnegative");

    RkProfile p;
    p.lo = -window;
    p.hi = b + window;
    p.values.assign(static_cast<std::size_t>(p.hi - p.lo + 1), 0.0);
    auto slot = [&](int site) -> double& { return p.values[static_cast<std::size_t>(site - p.lo)]; };

    Rng inner = rng.split(0);
    Rng right = rng.split(1);
    Rng left = rng.split(2);

    slot(b) = h;
    for (int x = b - 1; x >= 0; --x) slot(x) = sample_inner_step(slot(x + 1), inner);
    for (int x = b + 1; x <= p.hi; ++x) {
        if (slot(x - 1) == 0.0) break;
        slot(x) = sample_outer_step(slot(x - 1), right);
    }
    for (int x = -1; x >= p.lo; --x) {
        if (slot(x + 1) == 0.0) break;
        slot(x) = sample_outer_step(slot(x + 1), left);
    }
    return p;
}

namespace {

void require_srw(const Generator& g, const std::vector<Index>& order_all, const std::vector<Index>& range) {
    const auto n = order_all.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double want = (i + 1 == j || j + 1 == i) ? 1.0 : 0.0;
            if (g(order_all[i], order_all[j]) != want)
                throw Error(ErrorKind::NotSRW, "rates are not those of simple random walk");
        }
    for (Index x : range)
        if (g(x, x) != -2.0)
            throw Error(ErrorKind::NotSRW, "state " + g.label(x) + " lacks a neighbour; widen the window");
}

} // namespace

std::pair<double, double> rk_fixed_time_check(const Generator& g, const SimplexPoint& l, Index a, Index b) {
    std::vector<Index> all(static_cast<std::size_t>(g.size()));
    for (Index x = 0; x < g.size(); ++x) all[static_cast<std::size_t>(x)] = x;
    std::vector<Index> order_all;
    try {
        order_all = interval_order(g, all);
    } catch (const Error&) {
        throw Error(ErrorKind::NotSRW, "labels are not consecutive integers");
    }
    require_srw(g, order_all, l.range);

    std::vector<Index> order = interval_order(g, l.range);
    const std::size_t m = order.size();
    auto pa = static_cast<std::size_t>(std::find(order.begin(), order.end(), a) - order.begin());
    auto pb = static_cast<std::size_t>(std::find(order.begin(), order.end(), b) - order.begin());
    if (pa == m || pb == m) throw Error(ErrorKind::DomainError, "a or b outside the range");
    if (pa > pb) {
        std::reverse(order.begin(), order.end());
        pa = m - 1 - pa;
        pb = m - 1 - pb;
    }
    std::vector<double> lv(m);
    for (std::size_t i = 0; i < m; ++i) lv[i] = l.values[l.position(order[i])];

    double kernel = rk_outer_atom(lv.front()) * rk_outer_atom(lv.back());
    for (std::size_t k = 1; k <= pa; ++k) kernel *= rk_outer_density(lv[k], lv[k - 1]);
    for (std::size_t k = pa; k < pb; ++k) kernel *= rk_inner_density(lv[k], lv[k + 1]);
    for (std::size_t k = pb; k + 1 < m; ++k) kernel *= rk_outer_density(lv[k], lv[k + 1]);

    return {density(g, l, a, b, 1e-15), kernel};
}

} // namespace loctime
