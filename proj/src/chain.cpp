#include "loctime/chain.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "loctime/error.hpp"

namespace loctime {

Eigen::MatrixXd Generator::off_diagonal() const {
    Eigen::MatrixXd b = rates_;
    b.diagonal().setZero();
    return b;
}

Index Generator::index_of(std::string_view label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw Error(ErrorKind::UnknownLabel, "no state labelled '" + std::string(label) + "'");
    return static_cast<Index>(it - labels_.begin());
}

std::vector<Index> Generator::indices_of(const std::vector<std::string>& labels) const {
    std::vector<Index> out;
    out.reserve(labels.size());
    for (const auto& l : labels) out.push_back(index_of(l));
    return out;
}

bool Generator::is_symmetric(double tol) const {
    return ((rates_ - rates_.transpose()).cwiseAbs().maxCoeff() <= tol);
}

Generator validate_generator(std::vector<std::string> labels, const Eigen::MatrixXd& rates, Diagonal mode) {
    const Index n = rates.rows();
    if (rates.cols() != n) throw Error(ErrorKind::DomainError, "rate matrix is not square");
    if (static_cast<Index>(labels.size()) != n)
        throw Error(ErrorKind::DomainError, "label count does not match the rate matrix");
    if (n < 2) throw Error(ErrorKind::TooSmall, "a generator needs at least two states");
    if (std::set<std::string>(labels.begin(), labels.end()).size() != labels.size())
        throw Error(ErrorKind::DomainError, "duplicate state labels");
    if (!rates.allFinite()) throw Error(ErrorKind::DomainError, "rate matrix has non-finite entries");

    Generator g;
    g.labels_ = std::move(labels);
    g.rates_ = rates;
    for (Index x = 0; x < n; ++x) {
        double row = 0.0;
        double scale = 1.0;
        for (Index y = 0; y < n; ++y) {
            if (x == y) continue;
            if (rates(x, y) < 0.0)
                throw Error(ErrorKind::NegativeRate, "rate " + g.labels_[x] + "->" + g.labels_[y] + " is negative");
            row += rates(x, y);
            scale += rates(x, y);
        }
        if (mode == Diagonal::Check) {
            if (std::abs(rates(x, x) + row) > 1e-12 * scale)
                throw Error(ErrorKind::NonConservative, "row " + g.labels_[x] + " does not sum to zero");
        }
        g.rates_(x, x) = -row;
    }
    return g;
}

Generator validate_generator(const Eigen::MatrixXd& rates, Diagonal mode) {
    std::vector<std::string> labels;
    for (Index i = 0; i < rates.rows(); ++i) labels.push_back(std::to_string(i));
    return validate_generator(std::move(labels), rates, mode);
}

Generator two_state_chain(double rate) {
    Eigen::MatrixXd a(2, 2);
    a << 0.0, rate, rate, 0.0;
    return validate_generator({"1", "2"}, a);
}

Generator srw_interval(int lo, int hi) {
    if (hi <= lo) throw Error(ErrorKind::TooSmall, "interval needs at least two sites");
    const Index n = hi - lo + 1;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    std::vector<std::string> labels;
    for (Index i = 0; i < n; ++i) {
        labels.push_back(std::to_string(lo + i));
        if (i > 0) a(i, i - 1) = 1.0;
        if (i + 1 < n) a(i, i + 1) = 1.0;
    }
    return validate_generator(std::move(labels), a);
}

Generator RestrictedGenerator::as_generator() const {
    std::vector<std::string> labels;
    for (Index x : subset) labels.push_back(base.label(x));
    return validate_generator(std::move(labels), restricted, Diagonal::Check);
}

RestrictedGenerator restrict(const Generator& g, std::vector<Index> subset) {
    if (subset.empty()) throw Error(ErrorKind::EmptySubset, "restriction to the empty set");
    std::sort(subset.begin(), subset.end());
    if (std::adjacent_find(subset.begin(), subset.end()) != subset.end())
        throw Error(ErrorKind::DomainError, "subset contains a state twice");
    for (Index x : subset)
        if (x < 0 || x >= g.size()) throw Error(ErrorKind::UnknownLabel, "state index out of range");

    const Index m = static_cast<Index>(subset.size());
    RestrictedGenerator r;
    r.subset = subset;
    r.base = g;
    r.restricted = Eigen::MatrixXd::Zero(m, m);
    r.killing = Eigen::VectorXd::Zero(m);
    std::vector<bool> inside(static_cast<std::size_t>(g.size()), false);
    for (Index x : subset) inside[static_cast<std::size_t>(x)] = true;

    for (Index i = 0; i < m; ++i) {
        const Index x = subset[i];
        double kept = 0.0;
        for (Index j = 0; j < m; ++j) {
            if (i == j) continue;
            r.restricted(i, j) = g(x, subset[j]);
            kept += g(x, subset[j]);
        }
        r.restricted(i, i) = -kept;
        double escape = 0.0;
        for (Index y = 0; y < g.size(); ++y)
            if (!inside[static_cast<std::size_t>(y)]) escape += g(x, y);
        r.killing(i) = escape;
    }
    return r;
}

RestrictedGenerator restrict(const Generator& g, const std::vector<std::string>& labels) {
    if (labels.empty()) throw Error(ErrorKind::EmptySubset, "restriction to the empty set");
    return restrict(g, g.indices_of(labels));
}

ChainSimulator::ChainSimulator(const Generator& g) {
    const Index n = g.size();
    exit_rates_.resize(static_cast<std::size_t>(n));
    targets_.resize(static_cast<std::size_t>(n));
    cumulative_.resize(static_cast<std::size_t>(n));
    for (Index x = 0; x < n; ++x) {
        const auto ux = static_cast<std::size_t>(x);
        double total = 0.0;
        for (Index y = 0; y < n; ++y) {
            if (y == x || g(x, y) <= 0.0) continue;
            total += g(x, y);
            targets_[ux].push_back(y);
            cumulative_[ux].push_back(total);
        }
        for (double& c : cumulative_[ux]) c /= total;
        if (!cumulative_[ux].empty()) cumulative_[ux].back() = 1.0;
        exit_rates_[ux] = total;
    }
}

Index ChainSimulator::jump(Index from, Rng& rng) const {
    const auto& cum = cumulative_[static_cast<std::size_t>(from)];
    const double u = rng.uniform();
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) --it;
    return targets_[static_cast<std::size_t>(from)][static_cast<std::size_t>(it - cum.begin())];
}

namespace {

void finish_range(PathSummary& p, Index start) {
    p.range.clear();
    for (Index x = 0; x < p.local_times.size(); ++x)
        if (p.local_times[x] > 0.0 || x == start) p.range.push_back(x);
}

} // namespace

PathSummary ChainSimulator::fixed_time(Index start, double horizon, Rng& rng) const {
    if (!(horizon > 0.0)) throw Error(ErrorKind::DomainError, "horizon must be positive");
    if (start < 0 || start >= size()) throw Error(ErrorKind::UnknownLabel, "start state out of range");

    PathSummary p;
    p.local_times = Eigen::VectorXd::Zero(size());
    double t = 0.0;
    Index x = start;
    for (;;) {
        const double rate = exit_rates_[static_cast<std::size_t>(x)];
        const double hold = rate > 0.0 ? rng.exponential(rate) : std::numeric_limits<double>::infinity();
        if (t + hold >= horizon) {
            p.local_times[x] += horizon - t;
            break;
        }
        p.local_times[x] += hold;
        t += hold;
        x = jump(x, rng);
        ++p.jumps;
    }
    p.endpoint = x;
    p.horizon = horizon;
    finish_range(p, start);
    return p;
}

InverseLocalTimeResult ChainSimulator::inverse_local_time(Index start, Index pivot, double level, Rng& rng,
                                                          const SimulationBudget& budget) const {
    if (!(level > 0.0)) throw Error(ErrorKind::DomainError, "level must be positive");
    if (start < 0 || start >= size() || pivot < 0 || pivot >= size())
        throw Error(ErrorKind::UnknownLabel, "state index out of range");

    InverseLocalTimeResult r;
    r.level = level;
    r.pivot = pivot;
    PathSummary& p = r.path;
    p.local_times = Eigen::VectorXd::Zero(size());
    double t = 0.0;
    Index x = start;
    for (;;) {
        const double rate = exit_rates_[static_cast<std::size_t>(x)];
        const double hold = rate > 0.0 ? rng.exponential(rate) : std::numeric_limits<double>::infinity();
        if (x == pivot && p.local_times[x] + hold >= level) {
            t += level - p.local_times[x];
            p.local_times[x] = level;
            break;
        }
        if (!std::isfinite(hold))
            throw Error(ErrorKind::BudgetExceeded, "walker is stuck away from the pivot");
        p.local_times[x] += hold;
        t += hold;
        if (p.jumps >= budget.max_jumps || t > budget.max_time)
            throw Error(ErrorKind::BudgetExceeded, "pivot not reached within the simulation budget");
        x = jump(x, rng);
        ++p.jumps;
    }
    p.endpoint = pivot;
    p.horizon = t;
    finish_range(p, start);
    return r;
}

PathSummary simulate_fixed_time(const Generator& g, Index start, double horizon, Rng& rng) {
    return ChainSimulator(g).fixed_time(start, horizon, rng);
}

InverseLocalTimeResult simulate_inverse_local_time(const Generator& g, Index start, Index pivot, double level,
                                                   Rng& rng, const SimulationBudget& budget) {
    return ChainSimulator(g).inverse_local_time(start, pivot, level, rng, budget);
}

} // namespace loctime
