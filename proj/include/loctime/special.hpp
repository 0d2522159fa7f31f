#pragma once

#include <cmath>
#include <limits>

#include "loctime/error.hpp"

namespace loctime {

// Modified Bessel functions of the first kind by their power series,
//   I0(x) = sum_k (x/2)^{2k} / (k!)^2,   I1(x) = sum_k (x/2)^{2k+1} / (k! (k+1)!).
// All terms are positive for x >= 0, so summing until the term ratio drops the
// next term below relative 1e-16 gives full double precision on 0 <= x <= 50.
template <typename Scalar>
Scalar bessel_i0(Scalar x) {
    if (x < Scalar(0)) x = -x;
    const Scalar q = x * x / Scalar(4);
    Scalar term = Scalar(1);
    Scalar sum = Scalar(1);
    for (int k = 1; k < 500; ++k) {
        term *= q / (Scalar(k) * Scalar(k));
        sum += term;
        if (term <= Scalar(1e-17) * sum) break;
    }
    return sum;
}

template <typename Scalar>
Scalar bessel_i1(Scalar x) {
    const bool negative = x < Scalar(0);
    if (negative) x = -x;
    const Scalar q = x * x / Scalar(4);
    Scalar term = x / Scalar(2);
    Scalar sum = term;
    for (int k = 1; k < 500; ++k) {
        term *= q / (Scalar(k) * Scalar(k + 1));
        sum += term;
        if (term <= Scalar(1e-17) * sum) break;
    }
    return negative ? -sum : sum;
}

// e^{-x} I_nu(x) for nu in {0, 1}, x >= 0: the series below 30, the
// asymptotic expansion sum_k (-1)^k prod_{j<=k} (4 nu^2 - (2j-1)^2) / (k! (8x)^k)
// above, truncated at its smallest term.
template <typename Scalar>
Scalar bessel_scaled(int nu, Scalar x) {
    using std::exp;
    using std::sqrt;
    if (x < Scalar(30)) return exp(-x) * (nu == 0 ? bessel_i0(x) : bessel_i1(x));
    const Scalar mu = Scalar(4 * nu * nu);
    Scalar term = Scalar(1);
    Scalar sum = Scalar(1);
    for (int k = 1; k < 60; ++k) {
        const Scalar next = -term * (mu - Scalar((2 * k - 1) * (2 * k - 1))) / (Scalar(k) * Scalar(8) * x);
        if (std::abs(next) >= std::abs(term)) break;
        term = next;
        sum += term;
        if (std::abs(term) <= Scalar(1e-17) * std::abs(sum)) break;
    }
    return sum / sqrt(Scalar(2) * Scalar(3.14159265358979323846) * x);
}

// g(t) = \oint exp(t (b_xy e^{i th} + b_yx e^{-i th})) dth / 2pi at t = sqrt(l_x l_y),
// i.e. sum_k (c l_x l_y)^k / (k!)^2 with c = b_xy * b_yx.
template <typename Scalar>
Scalar edge_kernel(Scalar c, Scalar lx, Scalar ly) {
    const Scalar z = c * lx * ly;
    Scalar term = Scalar(1);
    Scalar sum = Scalar(1);
    for (int k = 1; k < 500; ++k) {
        term *= z / (Scalar(k) * Scalar(k));
        sum += term;
        if (std::abs(term) <= Scalar(1e-17) * std::abs(sum)) break;
    }
    return sum;
}

// d/dl_x of edge_kernel(c, l_x, l_y):
//   sum_{k>=1} k c^k l_x^{k-1} l_y^k / (k!)^2 = c l_y sum_{j>=0} (c l_x l_y)^j / (j! (j+1)!).
template <typename Scalar>
Scalar edge_kernel_derivative(Scalar c, Scalar lx, Scalar ly) {
    const Scalar z = c * lx * ly;
    Scalar term = Scalar(1);
    Scalar sum = Scalar(1);
    for (int j = 1; j < 500; ++j) {
        term *= z / (Scalar(j) * Scalar(j + 1));
        sum += term;
        if (std::abs(term) <= Scalar(1e-17) * std::abs(sum)) break;
    }
    return c * ly * sum;
}

} // namespace loctime
