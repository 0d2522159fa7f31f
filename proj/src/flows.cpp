#include "loctime/flows.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <mutex>
#include <numeric>

#include "loctime/error.hpp"

namespace loctime {

std::vector<Edge> support_of(const Eigen::MatrixXd& weights) {
    std::vector<Edge> out;
    for (Eigen::Index x = 0; x < weights.rows(); ++x)
        for (Eigen::Index y = 0; y < weights.cols(); ++y)
            if (x != y && weights(x, y) != 0.0) out.push_back({x, y});
    return out;
}

FlowSet::FlowSet(std::vector<Edge> edges, Eigen::Index states, int max_total)
    : edges_(std::move(edges)), states_(states), max_total_(max_total) {}

void FlowSet::degrees(std::size_t i, std::span<int> out) const {
    std::fill(out.begin(), out.end(), 0);
    auto f = flow(i);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        out[static_cast<std::size_t>(edges_[e].from)] += f[e];
        out[static_cast<std::size_t>(edges_[e].to)] += f[e];
    }
}

namespace {

// Depth-first enumeration over a spanning forest of the undirected support.
// Vertices are closed leaves-first: once every other edge at a vertex has a
// count, the pair of edges to its parent is forced up to a common shift k, so
// only balanced flows are ever visited.
class Enumerator {
public:
    Enumerator(const std::vector<Edge>& edges, Eigen::Index states, int max_total, std::size_t cap)
        : edges_(edges), n_(static_cast<std::size_t>(states)), max_total_(max_total), cap_(cap),
          counts_(edges.size(), 0), net_(n_, 0) {
        build_forest();
    }

    void run(std::vector<std::uint16_t>& out, std::vector<int>& totals) {
        out_ = &out;
        totals_ = &totals;
        step(0, 0, max_total_);
    }

private:
    struct Closing {
        long out_edge = -1; // v -> parent
        long in_edge = -1;  // parent -> v
        std::size_t parent = 0;
    };

    void build_forest() {
        std::vector<std::vector<std::size_t>> adj(n_);
        for (const auto& e : edges_) {
            adj[static_cast<std::size_t>(e.from)].push_back(static_cast<std::size_t>(e.to));
            adj[static_cast<std::size_t>(e.to)].push_back(static_cast<std::size_t>(e.from));
        }
        for (auto& a : adj) {
            std::sort(a.begin(), a.end());
            a.erase(std::unique(a.begin(), a.end()), a.end());
        }
        std::vector<long> parent(n_, -2), depth(n_, 0);
        for (std::size_t root = 0; root < n_; ++root) {
            if (parent[root] != -2) continue;
            parent[root] = -1;
            std::deque<std::size_t> queue{root};
            while (!queue.empty()) {
                auto v = queue.front();
                queue.pop_front();
                for (auto w : adj[v]) {
                    if (parent[w] != -2) continue;
                    parent[w] = static_cast<long>(v);
                    depth[w] = depth[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        for (std::size_t v = 0; v < n_; ++v)
            if (parent[v] >= 0) order_.push_back(v);
        std::stable_sort(order_.begin(), order_.end(),
                         [&](std::size_t a, std::size_t b) { return depth[a] > depth[b]; });
        std::vector<std::size_t> position(n_, n_);
        for (std::size_t s = 0; s < order_.size(); ++s) position[order_[s]] = s;

        closing_.resize(order_.size());
        free_.resize(order_.size());
        for (std::size_t s = 0; s < order_.size(); ++s)
            closing_[s].parent = static_cast<std::size_t>(parent[order_[s]]);
        for (std::size_t e = 0; e < edges_.size(); ++e) {
            auto x = static_cast<std::size_t>(edges_[e].from);
            auto y = static_cast<std::size_t>(edges_[e].to);
            if (parent[x] == static_cast<long>(y)) {
                closing_[position[x]].out_edge = static_cast<long>(e);
            } else if (parent[y] == static_cast<long>(x)) {
                closing_[position[y]].in_edge = static_cast<long>(e);
            } else {
                free_[std::min(position[x], position[y])].push_back(e);
            }
        }
    }

    void set(std::size_t e, int c) {
        net_[static_cast<std::size_t>(edges_[e].from)] += c - counts_[e];
        net_[static_cast<std::size_t>(edges_[e].to)] -= c - counts_[e];
        counts_[e] = c;
    }

    void step(std::size_t s, std::size_t j, int remaining) {
        if (s == order_.size()) {
            emit(max_total_ - remaining);
            return;
        }
        if (j < free_[s].size()) {
            const auto e = free_[s][j];
            for (int c = 0; c <= remaining; ++c) {
                set(e, c);
                step(s, j + 1, remaining - c);
            }
            set(e, 0);
            return;
        }
        close(s, remaining);
    }

    void close(std::size_t s, int remaining) {
        const auto v = order_[s];
        const auto& cl = closing_[s];
        const int d = net_[v];
        if (cl.out_edge >= 0 && cl.in_edge >= 0) {
            const auto eo = static_cast<std::size_t>(cl.out_edge);
            const auto ei = static_cast<std::size_t>(cl.in_edge);
            const int base_out = std::max(0, -d);
            const int base_in = std::max(0, d);
            for (int k = 0; std::abs(d) + 2 * k <= remaining; ++k) {
                set(eo, base_out + k);
                set(ei, base_in + k);
                step(s + 1, 0, remaining - std::abs(d) - 2 * k);
            }
            set(eo, 0);
            set(ei, 0);
        } else if (cl.out_edge >= 0) {
            const auto eo = static_cast<std::size_t>(cl.out_edge);
            if (d <= 0 && -d <= remaining) {
                set(eo, -d);
                step(s + 1, 0, remaining + d);
                set(eo, 0);
            }
        } else {
            const auto ei = static_cast<std::size_t>(cl.in_edge);
            if (d >= 0 && d <= remaining) {
                set(ei, d);
                step(s + 1, 0, remaining - d);
                set(ei, 0);
            }
        }
    }

    void emit(int total) {
        if (totals_->size() >= cap_)
            throw Error(ErrorKind::ExplosionGuard, "balanced-flow count exceeds the cap of " + std::to_string(cap_) +
                                                       "; shrink the range or the series order");
        for (int c : counts_) out_->push_back(static_cast<std::uint16_t>(c));
        totals_->push_back(total);
    }

    const std::vector<Edge>& edges_;
    std::size_t n_;
    int max_total_;
    std::size_t cap_;
    std::vector<int> counts_;
    std::vector<int> net_;
    std::vector<std::size_t> order_;
    std::vector<Closing> closing_;
    std::vector<std::vector<std::size_t>> free_;
    std::vector<std::uint16_t>* out_ = nullptr;
    std::vector<int>* totals_ = nullptr;
};

} // namespace

FlowSet enumerate_balanced_flows(const std::vector<Edge>& support, Eigen::Index states, int max_total,
                                 std::size_t cap) {
    if (max_total < 0) throw Error(ErrorKind::DomainError, "max_total must be nonnegative");
    if (max_total > 65535) throw Error(ErrorKind::ExplosionGuard, "series order too large");
    std::vector<Edge> edges = support;
    std::sort(edges.begin(), edges.end());
    if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
        throw Error(ErrorKind::DomainError, "duplicate support edge");
    for (const auto& e : edges)
        if (e.from == e.to || e.from < 0 || e.to < 0 || e.from >= states || e.to >= states)
            throw Error(ErrorKind::DomainError, "support edge out of range or a self-loop");

    std::vector<std::uint16_t> raw;
    std::vector<int> raw_totals;
    Enumerator(edges, states, max_total, cap).run(raw, raw_totals);

    const std::size_t m = edges.size();
    std::vector<std::size_t> idx(raw_totals.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(raw.begin() + static_cast<long>(a * m),
                                            raw.begin() + static_cast<long>((a + 1) * m),
                                            raw.begin() + static_cast<long>(b * m),
                                            raw.begin() + static_cast<long>((b + 1) * m));
    });

    FlowSet fs(std::move(edges), states, max_total);
    fs.counts_.reserve(raw.size());
    fs.totals_.reserve(raw_totals.size());
    for (auto i : idx) {
        fs.counts_.insert(fs.counts_.end(), raw.begin() + static_cast<long>(i * m),
                          raw.begin() + static_cast<long>((i + 1) * m));
        fs.totals_.push_back(raw_totals[i]);
    }
    return fs;
}

namespace {

struct CacheKey {
    Eigen::Index states;
    std::vector<Edge> edges;
    friend auto operator<=>(const CacheKey&, const CacheKey&) = default;
};

std::mutex cache_mutex;
std::map<CacheKey, std::shared_ptr<const FlowSet>> cache;

} // namespace

std::shared_ptr<const FlowSet> cached_balanced_flows(const std::vector<Edge>& support, Eigen::Index states,
                                                     int max_total, std::size_t cap) {
    CacheKey key{states, support};
    std::sort(key.edges.begin(), key.edges.end());
    {
        std::lock_guard lock(cache_mutex);
        auto it = cache.find(key);
        if (it != cache.end() && it->second->max_total() >= max_total) return it->second;
    }
    auto fresh = std::make_shared<const FlowSet>(enumerate_balanced_flows(support, states, max_total, cap));
    std::lock_guard lock(cache_mutex);
    if (cache.size() >= 64) cache.clear();
    auto& slot = cache[key];
    if (!slot || slot->max_total() < fresh->max_total()) slot = fresh;
    return slot;
}

void clear_flow_cache() {
    std::lock_guard lock(cache_mutex);
    cache.clear();
}

} // namespace loctime
