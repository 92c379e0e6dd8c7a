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

// Shared fixtures and independent oracles for the unit tests.

#ifndef BLOCKMOD_TESTS_TEST_SUPPORT_HPP
#define BLOCKMOD_TESTS_TEST_SUPPORT_HPP

#include <cmath>
#include <random>
#include <vector>

#include "blockmod/choi.hpp"
#include "blockmod/measures.hpp"
#include "blockmod/simulate.hpp"

namespace blockmod::testing {

inline CMatrix random_matrix(int rows, int cols, std::mt19937_64& rng) { return ginibre(rows, cols, rng); }

inline CMatrix random_hermitian(int n, std::mt19937_64& rng) {
  const CMatrix a = ginibre(n, n, rng);
  return (a + a.adjoint()) / 2.0;
}

/// Coefficients of a random hermiticity-preserving map M_m -> M_n.
inline CoefficientTensor random_coefficients(int m, int n, std::mt19937_64& rng) {
  return coeffs_from_choi(random_hermitian(n * m, rng), m, n);
}

/// phi(X)(i, l) = sum_jk c(i, j, k, l) X(j, k), straight from the definition.
inline CMatrix apply_coefficients(const CoefficientTensor& c, const CMatrix& x) {
  CMatrix out = CMatrix::Zero(c.n(), c.n());
  for (int i = 0; i < c.n(); ++i)
    for (int l = 0; l < c.n(); ++l)
      for (int j = 0; j < c.m(); ++j)
        for (int k = 0; k < c.m(); ++k) out(i, l) += c(i, j, k, l) * x(j, k);
  return out;
}

/// phi(A) = [[11 a11 + 15 a22 - 25 a12 - 25 a21, 36 a21], [36 a12, 11 a11 - 4 a22]].
inline CoefficientTensor example_coefficients() {
  CoefficientTensor c(2, 2);
  c(0, 0, 0, 0) = 11.0;
  c(0, 1, 1, 0) = 15.0;
  c(0, 0, 1, 0) = -25.0;
  c(0, 1, 0, 0) = -25.0;
  c(0, 1, 0, 1) = 36.0;
  c(1, 0, 1, 0) = 36.0;
  c(1, 0, 0, 1) = 11.0;
  c(1, 1, 1, 1) = -4.0;
  return c;
}

inline LinearBlockMap example_map() { return generic_map(example_coefficients()); }

/// The n^2 x n^2 flip, F (a (x) b) = b (x) a.
inline CMatrix flip_matrix(int n) {
  CMatrix f = CMatrix::Zero(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) f(i * n + j, j * n + i) = 1.0;
  return f;
}

inline CMatrix unit(int n, int i, int j) {
  CMatrix e = CMatrix::Zero(n, n);
  e(i, j) = 1.0;
  return e;
}

/// Choi matrix sum_jk phi(E_jk) (x) E_jk evaluated through apply_map.
inline CMatrix choi_by_definition(const LinearBlockMap& map) {
  CMatrix c = CMatrix::Zero(map.n * map.m, map.n * map.m);
  for (int j = 0; j < map.m; ++j)
    for (int k = 0; k < map.m; ++k) {
      const CMatrix img = apply_map(map, unit(map.m, j, k));
      for (int i = 0; i < map.n; ++i)
        for (int l = 0; l < map.n; ++l) c(i * map.m + j, l * map.m + k) += img(i, l);
    }
  return c;
}

/// Moments of a measure by brute-force integration: atoms plus a fine
/// midpoint rule on the density of sample_curve.
inline double numeric_moment(const DensityCurve& c, int k) {
  double s = 0.0;
  for (std::size_t i = 1; i < c.grid.size(); ++i) {
    const double x0 = c.grid[i - 1], x1 = c.grid[i];
    s += 0.5 * (x1 - x0) * (c.density[i - 1] * std::pow(x0, k) + c.density[i] * std::pow(x1, k));
  }
  for (const auto& a : c.atoms) s += a.mass * std::pow(a.location, k);
  return s;
}

/// Catalan number C_k.
inline double catalan(int k) {
  double c = 1.0;
  for (int i = 0; i < k; ++i) c = c * 2.0 * (2.0 * i + 1.0) / (i + 2.0);
  return c;
}

}  // namespace blockmod::testing

#endif  // BLOCKMOD_TESTS_TEST_SUPPORT_HPP
