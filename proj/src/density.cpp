#include "loctime/density.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <complex>
#include <numbers>
#include <numeric>

#include "loctime/cofactor.hpp"
#include "loctime/error.hpp"
#include "loctime/flows.hpp"
#include "loctime/special.hpp"

namespace loctime {

Index SimplexPoint::position(Index state) const {
    auto it = std::lower_bound(range.begin(), range.end(), state);
    if (it == range.end() || *it != state) throw Error(ErrorKind::DomainError, "state is not in the range");
    return static_cast<Index>(it - range.begin());
}

SimplexPoint make_simplex_point(std::vector<Index> range, Eigen::VectorXd values) {
    if (range.empty()) throw Error(ErrorKind::EmptySubset, "empty range");
    if (static_cast<Index>(range.size()) != values.size())
        throw Error(ErrorKind::DomainError, "range and local times differ in length");
    std::vector<std::size_t> perm(range.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::sort(perm.begin(), perm.end(), [&](std::size_t i, std::size_t j) { return range[i] < range[j]; });
    SimplexPoint p;
    p.values.resize(values.size());
    for (std::size_t k = 0; k < perm.size(); ++k) {
        p.range.push_back(range[perm[k]]);
        p.values[static_cast<Index>(k)] = values[static_cast<Index>(perm[k])];
    }
    if (std::adjacent_find(p.range.begin(), p.range.end()) != p.range.end())
        throw Error(ErrorKind::DomainError, "range lists a state twice");
    for (Index i = 0; i < p.values.size(); ++i)
        if (!(p.values[i] >= min_local_time) || !std::isfinite(p.values[i]))
            throw Error(ErrorKind::DomainError, "local times must be finite and at least 1e-12");
    return p;
}

SimplexPoint make_simplex_point(const Generator& g, const std::vector<std::string>& labels,
                                const std::vector<double>& values) {
    return make_simplex_point(g.indices_of(labels), Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                                                       static_cast<Index>(values.size())));
}

namespace {

Eigen::MatrixXd off_diagonal_on(const Generator& g, const std::vector<Index>& range) {
    const Index m = static_cast<Index>(range.size());
    Eigen::MatrixXd b(m, m);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < m; ++j) b(i, j) = i == j ? 0.0 : g(range[i], range[j]);
    return b;
}

double diagonal_exponent(const Generator& g, const SimplexPoint& l) {
    double s = 0.0;
    for (Index i = 0; i < l.size(); ++i) s += g(l.range[i], l.range[i]) * l.values[i];
    return s;
}

// sum_{M > n} S^M / M! * M^q, bounded by summing until the term ratio falls
// below 1/2 and closing with a geometric tail (the ratio decreases in M).
double factorial_tail(double s, int n, int q) {
    if (s == 0.0) return 0.0;
    const double log_s = std::log(s);
    double sum = 0.0;
    for (int m = n + 1;; ++m) {
        const double log_term = m * log_s - std::lgamma(m + 1.0) + q * std::log(static_cast<double>(m));
        const double term = std::exp(log_term);
        const double ratio = s / (m + 1.0) * std::pow((m + 1.0) / m, q);
        sum += term;
        if (ratio < 0.5) return sum + term * ratio / (1.0 - ratio);
        if (m > n + 100000) return std::numeric_limits<double>::infinity();
    }
}

double series_scale(const Eigen::MatrixXd& btilde, const Eigen::VectorXd& l) {
    double s = 0.0;
    for (Index x = 0; x < btilde.rows(); ++x)
        for (Index y = 0; y < btilde.cols(); ++y)
            if (x != y) s += std::abs(btilde(x, y)) * std::sqrt(l[x] * l[y]);
    return s;
}

double subset_tail(const std::vector<Index>& q, const Eigen::VectorXd& l, double s, int order) {
    double c = 1.0;
    for (Index x : q) c /= 2.0 * l[x];
    return c * factorial_tail(s, order, static_cast<int>(q.size()));
}

double operator_tail(const CofactorOperator& op, const Eigen::VectorXd& l, double s, int order) {
    double t = 0.0;
    for (std::size_t k = 0; k < op.subsets.size(); ++k)
        t += std::abs(op.weights[k]) * subset_tail(op.subsets[k], l, s, order);
    return t;
}

struct SeriesSum {
    double value = 0.0;
    std::size_t flows = 0;
};

// One pass over the flows; every subset reuses the same monomial.
SeriesSum sum_series(const std::vector<std::vector<Index>>& subsets, const std::vector<double>& weights,
                     const Eigen::MatrixXd& btilde, const Eigen::VectorXd& l, int max_total) {
    const Index m = btilde.rows();
    if (btilde.cols() != m || l.size() != m) throw Error(ErrorKind::DomainError, "weights and l differ in size");
    for (const auto& q : subsets)
        for (Index x : q)
            if (x < 0 || x >= m) throw Error(ErrorKind::DomainError, "derivative index out of range");

    const auto edges = support_of(btilde);
    auto flows = cached_balanced_flows(edges, m, max_total);

    std::vector<double> log_b, sign_b;
    for (const auto& e : edges) {
        const double w = btilde(e.from, e.to);
        log_b.push_back(std::log(std::abs(w)));
        sign_b.push_back(w < 0.0 ? -1.0 : 1.0);
    }
    std::vector<double> log_fact(static_cast<std::size_t>(max_total) + 1);
    for (std::size_t k = 0; k < log_fact.size(); ++k) log_fact[k] = std::lgamma(static_cast<double>(k) + 1.0);
    Eigen::VectorXd half_log_l = 0.5 * l.array().log();

    std::vector<int> deg(static_cast<std::size_t>(m));
    SeriesSum out;
    for (std::size_t i = 0; i < flows->size(); ++i) {
        if (flows->total(i) > max_total) continue;
        auto n = flows->flow(i);
        double log_term = 0.0;
        double sign = 1.0;
        for (std::size_t e = 0; e < n.size(); ++e) {
            if (n[e] == 0) continue;
            log_term += n[e] * log_b[e] - log_fact[n[e]];
            if (n[e] % 2) sign *= sign_b[e];
        }
        flows->degrees(i, deg);
        for (Index x = 0; x < m; ++x) log_term += deg[static_cast<std::size_t>(x)] * half_log_l[x];

        double mult = 0.0;
        for (std::size_t k = 0; k < subsets.size(); ++k) {
            double f = weights[k];
            for (Index x : subsets[k]) f *= deg[static_cast<std::size_t>(x)] / (2.0 * l[x]);
            mult += f;
        }
        if (mult != 0.0) out.value += sign * mult * std::exp(log_term);
        ++out.flows;
    }
    return out;
}

} // namespace

CofactorOperator make_cofactor_operator(const Eigen::MatrixXd& b_on_r, Index a, Index b) {
    const Index m = b_on_r.rows();
    if (b_on_r.cols() != m) throw Error(ErrorKind::DomainError, "operator matrix is not square");
    if (a < 0 || a >= m || b < 0 || b >= m) throw Error(ErrorKind::DomainError, "a or b outside the range");
    CofactorOperator op;
    op.minus_b = -b_on_r;
    op.minus_b.diagonal().setZero();
    op.a = a;
    op.b = b;

    std::vector<Index> free;
    for (Index x = 0; x < m; ++x)
        if (x != a && x != b) free.push_back(x);
    const std::size_t k = free.size();
    for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
        std::vector<Index> q, keep;
        for (std::size_t j = 0; j < k; ++j)
            if (mask >> j & 1) q.push_back(free[j]);
        for (Index x = 0; x < m; ++x)
            if (!std::binary_search(q.begin(), q.end(), x)) keep.push_back(x);
        const Index n = static_cast<Index>(keep.size());
        Eigen::MatrixXd sub(n, n);
        Index la = 0, lb = 0;
        for (Index i = 0; i < n; ++i) {
            if (keep[i] == a) la = i;
            if (keep[i] == b) lb = i;
            for (Index j = 0; j < n; ++j) sub(i, j) = op.minus_b(keep[i], keep[j]);
        }
        const double w = cofactor(sub, la, lb);
        if (w == 0.0) continue;
        op.subsets.push_back(std::move(q));
        op.weights.push_back(w);
    }
    return op;
}

SeriesValue torus_series(const Eigen::MatrixXd& btilde, const Eigen::VectorXd& l, const std::vector<Index>& q,
                         int max_total, double tol) {
    if (max_total < 0) throw Error(ErrorKind::DomainError, "max_total must be nonnegative");
    for (Index x : q)
        if (x < 0 || x >= l.size() || !(l[x] > 0.0))
            throw Error(ErrorKind::DomainError, "derivative coordinate needs l_x > 0");
    for (Index x = 0; x < l.size(); ++x)
        if (!(l[x] >= 0.0)) throw Error(ErrorKind::DomainError, "negative local time");
    if (!q.empty())
        for (Index x = 0; x < btilde.rows(); ++x)
            for (Index y = 0; y < btilde.cols(); ++y)
                if (x != y && btilde(x, y) < 0.0)
                    throw Error(ErrorKind::DomainError, "derivative series needs nonnegative weights");

    SeriesValue v;
    v.order = max_total;
    v.tail_bound = subset_tail(q, l, series_scale(btilde, l), max_total);
    if (v.tail_bound > tol)
        throw Error(ErrorKind::NonConvergedTruncation, "tail bound " + std::to_string(v.tail_bound) +
                                                           " above tolerance at order " + std::to_string(max_total));
    v.value = sum_series({q}, {1.0}, btilde, l, max_total).value;
    return v;
}

SeriesValue apply_cofactor_operator(const CofactorOperator& op, const Eigen::MatrixXd& btilde,
                                    const Eigen::VectorXd& l, int max_total, double tol) {
    SeriesValue v;
    v.order = max_total;
    v.tail_bound = operator_tail(op, l, series_scale(btilde, l), max_total);
    if (v.tail_bound > tol)
        throw Error(ErrorKind::NonConvergedTruncation, "tail bound " + std::to_string(v.tail_bound) +
                                                           " above tolerance at order " + std::to_string(max_total));
    if (op.subsets.empty()) return v;
    v.value = sum_series(op.subsets, op.weights, btilde, l, max_total).value;
    return v;
}

int series_order_for(const CofactorOperator& op, const Eigen::MatrixXd& btilde, const Eigen::VectorXd& l,
                     double tol, int max_order) {
    const double s = series_scale(btilde, l);
    for (int n = 0; n <= max_order; ++n)
        if (operator_tail(op, l, s, n) <= tol) return n;
    return -1;
}

DensityValue density_certified(const Generator& g, const SimplexPoint& l, Index a, Index b,
                               const DensityOptions& options) {
    const Index la = l.position(a);
    const Index lb = l.position(b);
    const Eigen::MatrixXd bmat = off_diagonal_on(g, l.range);
    Eigen::MatrixXd btilde = bmat;
    if (options.conjugation) {
        const auto& r = *options.conjugation;
        if (r.size() != bmat.rows() || (r.array() <= 0.0).any())
            throw Error(ErrorKind::DomainError, "conjugation weights must be positive, one per state");
        btilde = r.asDiagonal() * bmat * r.cwiseInverse().asDiagonal();
    }
    const auto op = make_cofactor_operator(bmat, la, lb);
    const double prefactor = std::exp(diagonal_exponent(g, l));

    DensityValue out;
    if (op.subsets.empty()) return out;
    const double series_tol = options.tol / prefactor;
    const int order = series_order_for(op, btilde, l.values, series_tol, options.max_order);
    if (order < 0)
        throw Error(ErrorKind::NonConvergedTruncation,
                    "no series order up to " + std::to_string(options.max_order) + " meets the tolerance");
    const auto sum = sum_series(op.subsets, op.weights, btilde, l.values, order);
    out.value = prefactor * sum.value;
    out.tail_bound = prefactor * operator_tail(op, l.values, series_scale(btilde, l.values), order);
    out.order = order;
    out.flows = sum.flows;
    return out;
}

double density(const Generator& g, const SimplexPoint& l, Index a, Index b, double tol) {
    DensityOptions o;
    o.tol = tol;
    return density_certified(g, l, a, b, o).value;
}

namespace {

using cplx = std::complex<double>;

struct TorusSum {
    cplx value;
    double magnitude; // mean modulus of the integrand, sets the rounding floor
};

TorusSum quadrature_sum(const Generator& g, const SimplexPoint& l, Index la, Index lb, int grid) {
    const Index m = l.size();
    Eigen::MatrixXd a(m, m);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < m; ++j) a(i, j) = g(l.range[i], l.range[j]);
    Eigen::MatrixXd bmat = a;
    bmat.diagonal().setZero();
    const Eigen::VectorXd root = l.values.cwiseSqrt();

    std::vector<cplx> phase(static_cast<std::size_t>(grid));
    for (int k = 0; k < grid; ++k) phase[static_cast<std::size_t>(k)] = std::polar(1.0, 2.0 * std::numbers::pi * k / grid);

    using SmallMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>;
    using SmallVec = Eigen::Matrix<cplx, Eigen::Dynamic, 1, 0, 4, 1>;
    const SmallMat ac = a.cast<cplx>();
    const SmallMat bc = bmat.cast<cplx>();
    std::vector<int> idx(static_cast<std::size_t>(m), 0);
    SmallVec u(m); // sqrt(l_x) e^{i theta_x}
    SmallVec bu(m);
    SmallMat mat(m, m);
    std::size_t points = 1;
    for (Index i = 1; i < m; ++i) points *= static_cast<std::size_t>(grid);

    cplx total = 0.0;
    double magnitude = 0.0;
    for (std::size_t p = 0; p < points; ++p) {
        std::size_t rest = p;
        for (Index i = 1; i < m; ++i) {
            idx[static_cast<std::size_t>(i)] = static_cast<int>(rest % static_cast<std::size_t>(grid));
            rest /= static_cast<std::size_t>(grid);
        }
        for (Index i = 0; i < m; ++i) u[i] = root[i] * phase[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];

        const cplx exponent = u.transpose() * ac * u.conjugate();
        bu.noalias() = bc * u.conjugate();
        mat = -bc;
        for (Index x = 0; x < m; ++x) mat(x, x) = u[x] * bu[x] / l.values[x];
        const cplx term = cofactor(mat, la, lb) * std::exp(exponent);
        total += term;
        magnitude += std::abs(term);
    }
    return {total / static_cast<double>(points), magnitude / static_cast<double>(points)};
}

} // namespace

double density_quadrature(const Generator& g, const SimplexPoint& l, Index a, Index b,
                          const QuadratureOptions& options) {
    const Index la = l.position(a);
    const Index lb = l.position(b);
    const Index m = l.size();
    if (m > 4) throw Error(ErrorKind::DomainError, "quadrature is limited to ranges of at most four states");
    if (options.grid_size < 1) throw Error(ErrorKind::DomainError, "grid size must be positive");

    auto points_for = [&](int grid) {
        double p = 1.0;
        for (Index i = 1; i < m; ++i) p *= grid;
        return p;
    };
    int grid = options.grid_size;
    TorusSum previous = quadrature_sum(g, l, la, lb, grid);
    for (;;) {
        if (m == 1) break;
        grid *= 2;
        if (points_for(grid) > static_cast<double>(options.max_points))
            throw Error(ErrorKind::NonConvergedTruncation, "quadrature grid budget exhausted before agreement");
        const TorusSum current = quadrature_sum(g, l, la, lb, grid);
        const double floor = 1e3 * std::numeric_limits<double>::epsilon() * current.magnitude;
        const bool agree =
            std::abs(current.value - previous.value) <= options.tol * std::abs(current.value) + floor + 1e-15;
        previous = current;
        if (agree) break;
    }
    const cplx v = previous.value;
    if (std::abs(v.imag()) > 1e-8 * std::abs(v.real()) + 1e-12)
        throw Error(ErrorKind::ResidualImaginary, "imaginary part " + std::to_string(v.imag()) + " does not vanish");
    return v.real();
}

std::vector<Index> interval_order(const Generator& g, const std::vector<Index>& range) {
    std::vector<std::pair<long, Index>> keyed;
    for (Index x : range) {
        const auto& s = g.label(x);
        long v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size())
            throw Error(ErrorKind::NotInterval, "label '" + s + "' is not an integer");
        keyed.emplace_back(v, x);
    }
    std::sort(keyed.begin(), keyed.end());
    for (std::size_t k = 1; k < keyed.size(); ++k)
        if (keyed[k].first != keyed[k - 1].first + 1)
            throw Error(ErrorKind::NotInterval, "range labels are not consecutive integers");
    std::vector<Index> out;
    for (const auto& kv : keyed) out.push_back(kv.second);
    return out;
}

double density_tridiagonal(const Generator& g, const SimplexPoint& l, Index a, Index b) {
    l.position(a);
    l.position(b);
    std::vector<Index> order = interval_order(g, l.range);
    const std::size_t m = order.size();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if ((i > j + 1 || j > i + 1) && g(order[i], order[j]) != 0.0)
                throw Error(ErrorKind::NotTridiagonal, "rate between non-neighbouring sites");

    auto pa = static_cast<std::size_t>(std::find(order.begin(), order.end(), a) - order.begin());
    auto pb = static_cast<std::size_t>(std::find(order.begin(), order.end(), b) - order.begin());
    if (pa > pb) {
        std::reverse(order.begin(), order.end());
        pa = m - 1 - pa;
        pb = m - 1 - pb;
    }
    std::vector<double> lv(m);
    for (std::size_t i = 0; i < m; ++i) lv[i] = l.values[l.position(order[i])];

    double log_prefactor = 0.0;
    for (std::size_t i = 0; i < m; ++i) log_prefactor += g(order[i], order[i]) * lv[i];
    double prod = 1.0;
    for (std::size_t k = 0; k + 1 < m; ++k) {
        const double forward = g(order[k], order[k + 1]);
        const double c = forward * g(order[k + 1], order[k]);
        if (k < pa) {
            prod *= edge_kernel_derivative(c, lv[k], lv[k + 1]);
        } else if (k < pb) {
            prod *= forward * edge_kernel(c, lv[k], lv[k + 1]);
        } else {
            prod *= edge_kernel_derivative(c, lv[k + 1], lv[k]);
        }
    }
    return std::exp(log_prefactor) * prod;
}

} // namespace loctime
