#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace loctime {

struct Edge {
    Eigen::Index from = 0;
    Eigen::Index to = 0;
    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Directed support of a weight matrix: all (x, y), x != y, with w(x, y) != 0,
// in row-major order.
std::vector<Edge> support_of(const Eigen::MatrixXd& weights);

// All nonnegative integer edge counts with in-degree == out-degree at every
// state and total <= max_total, stored flat. Flow i occupies
// counts()[i * edges().size() ...]. Order is lexicographic in the edge order.
class FlowSet {
public:
    FlowSet(std::vector<Edge> edges, Eigen::Index states, int max_total);

    const std::vector<Edge>& edges() const noexcept { return edges_; }
    Eigen::Index states() const noexcept { return states_; }
    int max_total() const noexcept { return max_total_; }
    std::size_t size() const noexcept { return totals_.size(); }

    std::span<const std::uint16_t> flow(std::size_t i) const {
        return {counts_.data() + i * edges_.size(), edges_.size()};
    }
    int total(std::size_t i) const { return totals_[i]; }

    // d_x = sum_y (n_xy + n_yx)
    void degrees(std::size_t i, std::span<int> out) const;

private:
    friend FlowSet enumerate_balanced_flows(const std::vector<Edge>&, Eigen::Index, int, std::size_t);

    std::vector<Edge> edges_;
    Eigen::Index states_;
    int max_total_;
    std::vector<std::uint16_t> counts_;
    std::vector<int> totals_;
};

inline constexpr std::size_t default_flow_cap = 6'000'000;

// Throws ExplosionGuard when more than `cap` flows would be produced,
// DomainError for malformed edges.
FlowSet enumerate_balanced_flows(const std::vector<Edge>& support, Eigen::Index states, int max_total,
                                 std::size_t cap = default_flow_cap);

// Thread-safe memo keyed by (states, support). A request for a lower order is
// served from a larger cached set; callers skip flows with total() above their
// order.
std::shared_ptr<const FlowSet> cached_balanced_flows(const std::vector<Edge>& support, Eigen::Index states,
                                                     int max_total, std::size_t cap = default_flow_cap);

void clear_flow_cache();

} // namespace loctime
