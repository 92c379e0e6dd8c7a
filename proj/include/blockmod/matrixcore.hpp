// Copyright 2026 The blockmod Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense linear algebra used throughout: Hermitian eigendecomposition,
// Kronecker products, partial traces and block resolvents.
//
// Tensor layout convention: in kron(A, B) the left factor is the outer
// index, so an element of M_d (x) M_m is a d x d grid of contiguous m x m
// blocks.

#ifndef BLOCKMOD_MATRIXCORE_HPP
#define BLOCKMOD_MATRIXCORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <string>

#include "blockmod/errors.hpp"

namespace blockmod {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

template <typename Derived>
using PlainMatrix = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

template <typename Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived>& a, double rel_tol = 1e-10) {
  if (a.rows() != a.cols()) return false;
  const double scale = max_abs(a);
  return max_abs(a - a.adjoint()) <= rel_tol * (scale > 0 ? scale : 1.0);
}

template <typename Scalar>
struct HermitianEig {
  Eigen::VectorXd values;  // descending
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> vectors;
};

/// Eigendecomposition A = V diag(values) V* of a Hermitian matrix.
///
/// The input is symmetrized before decomposition. Eigenvalues come back in
/// descending order and each eigenvector has its first non-negligible entry
/// made real and positive, so the output is reproducible.
template <typename Derived>
HermitianEig<typename Derived::Scalar> hermitian_eig(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.rows() != a.cols()) throw InvalidInput("hermitian_eig: matrix is not square");
  if (!is_hermitian(a)) throw InvalidInput("hermitian_eig: matrix is not Hermitian");
  const Eigen::Index n = a.rows();
  PlainMatrix<Derived> sym = (a + a.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<PlainMatrix<Derived>> solver(sym);
  if (solver.info() != Eigen::Success) throw InvalidInput("hermitian_eig: eigensolver failed");

  HermitianEig<Scalar> out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = solver.eigenvalues()(n - 1 - k);
    out.vectors.col(k) = solver.eigenvectors().col(n - 1 - k);
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    auto col = out.vectors.col(k);
    const double cutoff = 1e-10 * col.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(col(i)) > cutoff) {
        if constexpr (Eigen::NumTraits<Scalar>::IsComplex) {
          col *= std::conj(col(i)) / std::abs(col(i));
          col(i) = Scalar(std::real(col(i)), 0.0);
        } else if (col(i) < 0) {
          col *= -1.0;
        }
        break;
      }
    }
  }
  return out;
}

/// Kronecker product with the left factor as the outer index.
template <typename DA, typename DB>
PlainMatrix<DA> kron(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  PlainMatrix<DA> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

enum class TraceSide { Left, Right };

/// Traces out one tensor factor of a (dim_left * dim_right)-square matrix.
/// Side::Right keeps the left factor: out(a, b) = sum_j A[(a, j), (b, j)].
template <typename Derived>
PlainMatrix<Derived> partial_trace(const Eigen::MatrixBase<Derived>& a, Eigen::Index dim_left,
                                   Eigen::Index dim_right, TraceSide side) {
  if (dim_left < 1 || dim_right < 1 || a.rows() != dim_left * dim_right ||
      a.cols() != dim_left * dim_right) {
    throw InvalidInput("partial_trace: dimension mismatch (" + std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()) + " vs " + std::to_string(dim_left) + "*" +
                       std::to_string(dim_right) + ")");
  }
  if (side == TraceSide::Right) {
    PlainMatrix<Derived> out = PlainMatrix<Derived>::Zero(dim_left, dim_left);
    for (Eigen::Index p = 0; p < dim_left; ++p)
      for (Eigen::Index q = 0; q < dim_left; ++q)
        out(p, q) = a.block(p * dim_right, q * dim_right, dim_right, dim_right).trace();
    return out;
  }
  PlainMatrix<Derived> out = PlainMatrix<Derived>::Zero(dim_right, dim_right);
  for (Eigen::Index k = 0; k < dim_left; ++k)
    out += a.block(k * dim_right, k * dim_right, dim_right, dim_right);
  return out;
}

/// Returns (b (x) I - A)^{-1}; the identity factor size is rows(A) / rows(b).
template <typename DA, typename DB>
PlainMatrix<DA> resolvent(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || b.rows() == 0 || a.rows() % b.rows() != 0)
    throw InvalidInput("resolvent: dimension mismatch");
  const Eigen::Index k = a.rows() / b.rows();
  PlainMatrix<DA> shifted = kron(b, PlainMatrix<DA>::Identity(k, k)) - a;
  Eigen::PartialPivLU<PlainMatrix<DA>> lu(shifted);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-15)) throw NumericalSingularity("resolvent: singular system", 1.0 / rcond);
  return lu.inverse();
}

/// Inverse of a small dense square matrix, throwing on numerical singularity.
template <typename Derived>
PlainMatrix<Derived> checked_inverse(const Eigen::MatrixBase<Derived>& a, const char* where) {
  Eigen::PartialPivLU<PlainMatrix<Derived>> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-15)) throw NumericalSingularity(std::string(where) + ": singular matrix", 1.0 / rcond);
  return lu.inverse();
}

}  // namespace blockmod

#endif  // BLOCKMOD_MATRIXCORE_HPP
