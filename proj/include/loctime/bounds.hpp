#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "loctime/chain.hpp"
#include "loctime/density.hpp"
#include "loctime/error.hpp"

namespace loctime {

// max(largest row sum, largest column sum of |B| over R, 1).
template <typename Derived>
typename Derived::Scalar eta(const Eigen::MatrixBase<Derived>& b_on_r) {
    using Scalar = typename Derived::Scalar;
    const auto& b = b_on_r.derived();
    // plain left-to-right sums keep eta exactly monotone under inclusion
    Scalar e(1);
    for (Eigen::Index x = 0; x < b.rows(); ++x) {
        Scalar row(0), col(0);
        for (Eigen::Index y = 0; y < b.cols(); ++y) {
            if (y == x) continue;
            row += std::abs(b(x, y));
            col += std::abs(b(y, x));
        }
        e = std::max({e, row, col});
    }
    return e;
}

// Throws EmptySubset.
double eta(const Generator& g, const std::vector<Index>& range);

// Rate matrix of the chain killed on leaving R: A on R x R, full diagonal.
Eigen::MatrixXd killed_rates(const Generator& g, const std::vector<Index>& range);

// <sqrt(mu), -A sqrt(mu)>. Throws NotSymmetric, DomainError (mu not a
// probability vector).
template <typename Derived, typename OtherDerived>
typename Derived::Scalar rate_symmetric(const Eigen::MatrixBase<Derived>& a, const Eigen::MatrixBase<OtherDerived>& mu) {
    using Scalar = typename Derived::Scalar;
    if (a.rows() != a.cols() || a.rows() != mu.size()) throw Error(ErrorKind::DomainError, "size mismatch");
    const Scalar scale = a.cwiseAbs().maxCoeff() + Scalar(1);
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12) * scale)
        throw Error(ErrorKind::NotSymmetric, "rate matrix is not symmetric");
    if ((mu.array() < Scalar(0)).any() || std::abs(mu.sum() - Scalar(1)) > Scalar(1e-9))
        throw Error(ErrorKind::DomainError, "mu is not a probability vector");
    const auto root = mu.cwiseSqrt().eval();
    return -root.dot(a * root);
}

double rate_symmetric(const Generator& g, const Eigen::VectorXd& mu);

struct RateSolution {
    double value = 0.0;
    Eigen::VectorXd minimizer; // g, zero off the support, g[first support state] = 1
    int iterations = 0;
    double final_gradient_norm = 0.0;
};

struct RateOptions {
    double tol = 1e-10;
    int max_iterations = 500;
};

// I_A(mu) = -inf_{u} sum_x mu_x (A e^u)_x / e^{u_x} over the support of mu,
// damped Newton with u fixed at the first support state. Throws Unbounded
// when the support is not strongly connected, NotConverged.
RateSolution rate_general(const Eigen::MatrixXd& a, const Eigen::VectorXd& mu, const RateOptions& options = {});
RateSolution rate_general(const Generator& g, const Eigen::VectorXd& mu, const RateOptions& options = {});

// The objective sum_x mu_x (A g)_x / g_x at a positive g on the support.
double rate_objective(const Eigen::MatrixXd& a, const Eigen::VectorXd& mu, const Eigen::VectorXd& g);

// Pointwise bound on rho^{(R)}_{ab}(l), conjugated by g = sqrt(l) when A is
// symmetric on R and by the minimizer from rate_general otherwise.
double density_upper_bound(const Generator& g, const SimplexPoint& l, Index a, Index b);

// Finite-T log bounds for chains confined to S. Throw TooEarly for T < 1,
// NotSymmetric.
double ldp_probability_bound(const Generator& g, const std::vector<Index>& s, double inf_rate, double horizon);
double ldp_varadhan_bound(const Generator& g, const std::vector<Index>& s, double sup_value, double horizon);

// inf of <sqrt(mu), -A_S sqrt(mu)> over probability vectors on S with
// <c, mu> >= threshold; A_S the killed rates on S, |S| <= 3. Returns +inf for
// an empty constraint set.
double halfspace_inf_rate(const Generator& g, const std::vector<Index>& s, const Eigen::VectorXd& c,
                          double threshold);

// sup_mu [<v, mu> - <sqrt(mu), -A_S sqrt(mu)>] = largest eigenvalue of A_S + diag(v).
double linear_sup_value(const Generator& g, const std::vector<Index>& s, const Eigen::VectorXd& v);

// log E_start[exp(<v, l_T>) 1{range within S}] = log (exp(T (A_S + diag v)) 1)_start.
double log_feynman_kac(const Generator& g, const std::vector<Index>& s, const Eigen::VectorXd& v, Index start,
                       double horizon);

// Functional on nonnegative grid functions phi (one value per box site). The
// gradient may be left empty; central differences are used then.
struct GridFunctional {
    std::function<double(const Eigen::VectorXd&)> value;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
};

struct ChiOptions {
    int dimension = 1;
    double tol = 1e-8;
    int restarts = 8;
    int max_iterations = 5000;
    std::uint64_t seed = 1;
};

struct ChiResult {
    double value = 0.0;
    Eigen::VectorXd mu; // box sites in lexicographic order
    double gradient_norm = 0.0;
};

// inf over probability vectors mu on {-r..r}^d of
//   alpha^2 / 2 sum_{x~y in box} (sqrt mu_x - sqrt mu_y)^2 - F(alpha^d mu).
// Throws NotConverged when no restart reaches the gradient tolerance.
ChiResult rescaled_chi_discrete(int box_radius, double alpha, const GridFunctional& f, const ChiOptions& options = {});

// Sites of the box {-r..r}^d in the order used by rescaled_chi_discrete.
std::vector<std::vector<int>> box_sites(int box_radius, int dimension);

} // namespace loctime
