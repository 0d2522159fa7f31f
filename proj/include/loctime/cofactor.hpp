#pragma once

#include <Eigen/Dense>

#include "loctime/error.hpp"

namespace loctime {

// (b,a) cofactor of a square matrix: the determinant of
//   (1_{x!=b} M_{x,y} 1_{y!=a} + 1_{x=b, y=a})_{x,y}.
// Row b and column a are cleared and a single 1 is placed at (b,a). Works for
// any scalar type Eigen can LU-factorise (real or complex).
template <typename Derived>
typename Derived::Scalar cofactor(const Eigen::MatrixBase<Derived>& m, Eigen::Index a, Eigen::Index b) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = m.rows();
    if (m.cols() != n) throw Error(ErrorKind::DomainError, "cofactor of a non-square matrix");
    if (a < 0 || a >= n || b < 0 || b >= n) throw Error(ErrorKind::DomainError, "cofactor index out of range");

    auto fill = [&](auto& r) {
        r = m;
        r.row(b).setZero();
        r.col(a).setZero();
        r(b, a) = Scalar(1);
    };
    if (n <= 8) {
        // small sizes stay on the stack
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, 8, 8> r(n, n);
        fill(r);
        return r.partialPivLu().determinant();
    }
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> r(n, n);
    fill(r);
    return r.partialPivLu().determinant();
}

} // namespace loctime
