#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "loctime/chain.hpp"

namespace loctime {

// Strictly positive local-time vector on a range R. Integrals against the
// surface measure use Lebesgue measure in all coordinates but one.
struct SimplexPoint {
    std::vector<Index> range; // generator indices, ascending
    Eigen::VectorXd values;   // l_x, aligned with range

    double total() const { return values.sum(); }
    Index size() const noexcept { return values.size(); }
    // Position of a generator index inside range; throws DomainError.
    Index position(Index state) const;
};

inline constexpr double min_local_time = 1e-12;

// Sorts range and values jointly. Throws DomainError on a size mismatch,
// repeated states, or any value below min_local_time.
SimplexPoint make_simplex_point(std::vector<Index> range, Eigen::VectorXd values);
SimplexPoint make_simplex_point(const Generator& g, const std::vector<std::string>& labels,
                                const std::vector<double>& values);

struct SeriesValue {
    double value = 0.0;
    double tail_bound = 0.0;
    int order = 0;
};

// det_ab(-B + d_l) expanded over Q subsets of R \ {a, b}. All indices local to R.
struct CofactorOperator {
    Eigen::MatrixXd minus_b;
    Index a = 0;
    Index b = 0;
    std::vector<std::vector<Index>> subsets; // Q, only those with a nonzero weight
    std::vector<double> weights;             // det^{(R\Q)}_ab(-B)
};

CofactorOperator make_cofactor_operator(const Eigen::MatrixXd& b_on_r, Index a, Index b);

// Sum over balanced flows n with total <= max_total of
//   d^Q prod_{x,y} (btilde_xy sqrt(l_x l_y))^{n_xy} / n_xy!
// plus a bound on everything left out. Throws NonConvergedTruncation when the
// bound exceeds `tol` (pass infinity to skip the check).
SeriesValue torus_series(const Eigen::MatrixXd& btilde, const Eigen::VectorXd& l, const std::vector<Index>& q,
                         int max_total, double tol = std::numeric_limits<double>::infinity());

// Weighted sum of torus_series over the operator's subsets, sharing one flow
// enumeration. The tail bound is the weighted sum of the per-subset bounds.
SeriesValue apply_cofactor_operator(const CofactorOperator& op, const Eigen::MatrixXd& btilde,
                                    const Eigen::VectorXd& l, int max_total,
                                    double tol = std::numeric_limits<double>::infinity());

// Smallest order whose tail bound for the operator is <= tol, or -1 if none
// up to max_order.
int series_order_for(const CofactorOperator& op, const Eigen::MatrixXd& btilde, const Eigen::VectorXd& l,
                     double tol, int max_order);

struct DensityOptions {
    double tol = 1e-13;   // absolute, on rho
    int max_order = 400;
    // Optional positive weights r: the series runs on r_x B_xy / r_y.
    std::optional<Eigen::VectorXd> conjugation;
};

struct DensityValue {
    double value = 0.0;
    double tail_bound = 0.0; // on rho, after the exponential prefactor
    int order = 0;
    std::size_t flows = 0;
};

// rho^{(R)}_{ab}(l) by the balanced-flow series. Throws NonConvergedTruncation,
// ExplosionGuard, DomainError.
DensityValue density_certified(const Generator& g, const SimplexPoint& l, Index a, Index b,
                               const DensityOptions& options = {});

double density(const Generator& g, const SimplexPoint& l, Index a, Index b, double tol = 1e-13);

struct QuadratureOptions {
    int grid_size = 32;
    double tol = 1e-12;                 // relative agreement of successive grids
    std::size_t max_points = 20'000'000; // per refinement
};

// Derivative-free torus integral, periodic trapezoid rule in |R| - 1 angles
// (one angle is fixed by rotation invariance). Throws ResidualImaginary,
// NonConvergedTruncation, DomainError for |R| > 4.
double density_quadrature(const Generator& g, const SimplexPoint& l, Index a, Index b,
                          const QuadratureOptions& options = {});

// Product of edge kernels for nearest-neighbour chains on an integer interval.
// Labels of R must be consecutive integers. a > b is handled by reflection.
// Throws NotTridiagonal, NotInterval.
double density_tridiagonal(const Generator& g, const SimplexPoint& l, Index a, Index b);

// Range R as generator indices ordered by integer label; throws NotInterval.
std::vector<Index> interval_order(const Generator& g, const std::vector<Index>& range);

} // namespace loctime
