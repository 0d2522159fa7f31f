#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "loctime/chain.hpp"
#include "loctime/density.hpp"
#include "loctime/error.hpp"
#include "loctime/rng.hpp"

namespace testing {

using loctime::Index;

// Nearest-neighbour chain on the integers lo..hi with rates in [0.3, 2).
inline loctime::Generator random_tridiagonal(int lo, int hi, loctime::Rng& rng) {
    const Index n = hi - lo + 1;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (Index i = 0; i + 1 < n; ++i) {
        a(i, i + 1) = 0.3 + 1.7 * rng.uniform();
        a(i + 1, i) = 0.3 + 1.7 * rng.uniform();
    }
    std::vector<std::string> labels;
    for (int x = lo; x <= hi; ++x) labels.push_back(std::to_string(x));
    return loctime::validate_generator(labels, a);
}

inline loctime::Generator random_dense(Index n, double density, loctime::Rng& rng, bool symmetric = false) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = symmetric ? i + 1 : 0; j < n; ++j) {
            if (i == j || rng.uniform() > density) continue;
            a(i, j) = 0.2 + 1.8 * rng.uniform();
            if (symmetric) a(j, i) = a(i, j);
        }
    return loctime::validate_generator(a);
}

// Uniform point on the open simplex of total t, floored away from the faces.
inline Eigen::VectorXd random_simplex(Index m, double t, loctime::Rng& rng, double floor = 0.02) {
    Eigen::VectorXd e(m);
    for (Index i = 0; i < m; ++i) e[i] = rng.exponential(1.0) + floor;
    return t * e / e.sum();
}

inline std::vector<Index> interval(Index first, Index count) {
    std::vector<Index> r;
    for (Index i = 0; i < count; ++i) r.push_back(first + i);
    return r;
}

// Series value for small ranges, the torus quadrature for four states (dense
// four-state supports have too many balanced flows at moderate orders).
inline double density_any(const loctime::Generator& g, const loctime::SimplexPoint& l, Index a, Index b) {
    if (l.size() >= 4) {
        loctime::QuadratureOptions q;
        q.grid_size = 16;
        return loctime::density_quadrature(g, l, a, b, q);
    }
    try {
        return loctime::density(g, l, a, b);
    } catch (const loctime::Error& e) {
        if (e.kind() != loctime::ErrorKind::ExplosionGuard) throw;
        return loctime::density_quadrature(g, l, a, b);
    }
}

} // namespace testing
