#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "loctime/rng.hpp"

namespace loctime {

using Index = Eigen::Index;

enum class Diagonal {
    Recompute, // ignore the supplied diagonal, set it to minus the off-diagonal row sum
    Check,     // keep the supplied diagonal, reject it if rows do not sum to zero
};

// Conservative rate matrix (Q-matrix) over a finite ordered label set.
class Generator {
public:
    Generator() = default;

    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::string& label(Index x) const { return labels_.at(static_cast<std::size_t>(x)); }
    Index size() const noexcept { return rates_.rows(); }
    const Eigen::MatrixXd& rates() const noexcept { return rates_; }
    double operator()(Index x, Index y) const { return rates_(x, y); }

    // Off-diagonal part B of the rate matrix.
    Eigen::MatrixXd off_diagonal() const;
    double exit_rate(Index x) const { return -rates_(x, x); }

    // Throws UnknownLabel.
    Index index_of(std::string_view label) const;
    std::vector<Index> indices_of(const std::vector<std::string>& labels) const;

    bool is_symmetric(double tol = 0.0) const;

    friend Generator validate_generator(std::vector<std::string> labels, const Eigen::MatrixXd& rates,
                                        Diagonal mode);

private:
    std::vector<std::string> labels_;
    Eigen::MatrixXd rates_;
};

// Throws NegativeRate, TooSmall, NonConservative, DomainError (shape mismatch,
// duplicate labels, non-finite entries).
Generator validate_generator(std::vector<std::string> labels, const Eigen::MatrixXd& rates,
                             Diagonal mode = Diagonal::Recompute);

// Default labels "0", "1", ...
Generator validate_generator(const Eigen::MatrixXd& rates, Diagonal mode = Diagonal::Recompute);

// Two states "1","2" with rate `rate` in both directions.
Generator two_state_chain(double rate = 1.0);

// Nearest-neighbour walk on the integers lo..hi, unit rates, labels are the
// integers. The end rows keep a single neighbour, which makes the chain the
// trace of simple random walk on Z onto the window.
Generator srw_interval(int lo, int hi);

// Chain A^(R) on R with the escape rates moved into a diagonal killing term V^(R).
struct RestrictedGenerator {
    std::vector<Index> subset;  // indices into the base label set, ascending
    Eigen::MatrixXd restricted; // A^(R), conservative on R
    Eigen::VectorXd killing;    // diagonal of V^(R): sum of rates leaving R
    Generator base;

    Generator as_generator() const;
};

// Throws EmptySubset, UnknownLabel.
RestrictedGenerator restrict(const Generator& g, std::vector<Index> subset);
RestrictedGenerator restrict(const Generator& g, const std::vector<std::string>& labels);

struct PathSummary {
    Eigen::VectorXd local_times; // over all states of the generator
    Index endpoint = 0;
    std::vector<Index> range;    // ascending
    double horizon = 0.0;
    std::uint64_t jumps = 0;
};

struct InverseLocalTimeResult {
    PathSummary path;
    double level = 0.0;
    Index pivot = 0;
};

struct SimulationBudget {
    std::uint64_t max_jumps = 100'000'000;
    double max_time = std::numeric_limits<double>::infinity();
};

// Event-driven simulator with precomputed jump tables; build once and reuse
// across many paths.
class ChainSimulator {
public:
    explicit ChainSimulator(const Generator& g);

    // Throws DomainError for T <= 0 or a bad start.
    PathSummary fixed_time(Index start, double horizon, Rng& rng) const;

    // Runs until the local time at `pivot` reaches `level`; the sojourn at the
    // pivot in progress is cut at exactly that level. Throws BudgetExceeded.
    InverseLocalTimeResult inverse_local_time(Index start, Index pivot, double level, Rng& rng,
                                              const SimulationBudget& budget = {}) const;

    Index size() const noexcept { return static_cast<Index>(exit_rates_.size()); }

private:
    Index jump(Index from, Rng& rng) const;

    std::vector<double> exit_rates_;
    std::vector<std::vector<Index>> targets_;
    std::vector<std::vector<double>> cumulative_;
};

PathSummary simulate_fixed_time(const Generator& g, Index start, double horizon, Rng& rng);

InverseLocalTimeResult simulate_inverse_local_time(const Generator& g, Index start, Index pivot,
                                                   double level, Rng& rng,
                                                   const SimulationBudget& budget = {});

} // namespace loctime
