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

#include <doctest.h>

#include "blockmod/matrixcore.hpp"
#include "test_support.hpp"

using namespace blockmod;
using namespace blockmod::testing;

TEST_CASE("hermitian_eig: identity, flip and diagonal") {
  auto id = hermitian_eig(CMatrix::Identity(2, 2));
  CHECK(id.values(0) == doctest::Approx(1.0));
  CHECK(id.values(1) == doctest::Approx(1.0));

  auto f = hermitian_eig(flip_matrix(2));
  CHECK(f.values(0) == doctest::Approx(1.0));
  CHECK(f.values(1) == doctest::Approx(1.0));
  CHECK(f.values(2) == doctest::Approx(1.0));
  CHECK(f.values(3) == doctest::Approx(-1.0));

  Eigen::MatrixXd d(2, 2);
  d << 1.0, 0.0, 0.0, 2.0;
  auto e = hermitian_eig(d);
  CHECK(e.values(0) == doctest::Approx(2.0));
  CHECK(e.values(1) == doctest::Approx(1.0));
  CHECK(std::abs(e.vectors(1, 0) - 1.0) < 1e-14);
  CHECK(std::abs(e.vectors(0, 1) - 1.0) < 1e-14);
}

TEST_CASE("hermitian_eig: reconstruction and orthonormality on random inputs") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> size(1, 64);
  double worst_rec = 0.0, worst_orth = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = trial < 100 ? size(rng) : 1 + trial % 12;
    const CMatrix a = random_hermitian(n, rng);
    const auto e = hermitian_eig(a);
    const double scale = max_abs(a);
    worst_rec = std::max(worst_rec, max_abs(a * e.vectors - e.vectors * e.values.asDiagonal()) / scale);
    worst_orth = std::max(worst_orth, max_abs(e.vectors.adjoint() * e.vectors - CMatrix::Identity(n, n)));
    for (int k = 1; k < n; ++k) REQUIRE(e.values(k - 1) >= e.values(k));
  }
  CHECK(worst_rec <= 1e-10);
  CHECK(worst_orth <= 1e-10);
}

TEST_CASE("hermitian_eig: rejects non-square and non-Hermitian input") {
  CHECK_THROWS_AS(hermitian_eig(CMatrix::Zero(2, 3)), InvalidInput);
  CMatrix a = CMatrix::Zero(2, 2);
  a(0, 1) = 1.0;
  CHECK_THROWS_AS(hermitian_eig(a), InvalidInput);
}

TEST_CASE("hermitian_eig: phase convention is reproducible") {
  std::mt19937_64 rng(3);
  const CMatrix a = random_hermitian(6, rng);
  const auto e1 = hermitian_eig(a);
  const auto e2 = hermitian_eig(a);
  CHECK(max_abs(e1.vectors - e2.vectors) == 0.0);
  for (int k = 0; k < 6; ++k) {
    int first = 0;
    while (std::abs(e1.vectors(first, k)) <= 1e-10) ++first;
    CHECK(std::abs(e1.vectors(first, k).imag()) < 1e-14);
    CHECK(e1.vectors(first, k).real() > 0.0);
  }
}

TEST_CASE("kron: layout and identities") {
  CHECK(max_abs(kron(CMatrix::Identity(2, 2), CMatrix::Identity(3, 3)) - CMatrix::Identity(6, 6)) == 0.0);
  const CMatrix e = kron(unit(2, 0, 0), unit(2, 1, 1));
  CHECK(e(1, 1) == cplx(1.0));
  CHECK(e.cwiseAbs().sum() == doctest::Approx(1.0));

  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const CMatrix a = random_matrix(2, 2, rng), b = random_matrix(2, 2, rng);
    const CMatrix c = random_matrix(2, 2, rng), d = random_matrix(2, 2, rng);
    CHECK(max_abs(kron(a, b) * kron(c, d) - kron(CMatrix(a * c), CMatrix(b * d))) < 1e-12);
    const CMatrix x = random_matrix(2, 3, rng), y = random_matrix(3, 2, rng), z = random_matrix(2, 2, rng);
    CHECK(max_abs(kron(kron(x, y), z) - kron(x, kron(y, z))) < 1e-12);
  }
}

TEST_CASE("partial_trace: tensor products, Bell projector and flip") {
  std::mt19937_64 rng(7);
  for (int p = 1; p <= 6; ++p)
    for (int q = 1; q <= 6; ++q) {
      const CMatrix a = random_matrix(p, p, rng), b = random_matrix(q, q, rng);
      const CMatrix ab = kron(a, b);
      CHECK(max_abs(partial_trace(ab, p, q, TraceSide::Right) - b.trace() * a) < 1e-10);
      CHECK(max_abs(partial_trace(ab, p, q, TraceSide::Left) - a.trace() * b) < 1e-10);
    }
  for (int n = 2; n <= 4; ++n) {
    CVector omega = CVector::Zero(n * n);
    for (int i = 0; i < n; ++i) omega(i * n + i) = 1.0;
    const CMatrix bell = omega * omega.adjoint();
    CHECK(max_abs(partial_trace(bell, n, n, TraceSide::Right) - CMatrix::Identity(n, n)) < 1e-14);
    CHECK(max_abs(partial_trace(flip_matrix(n), n, n, TraceSide::Right) - CMatrix::Identity(n, n)) < 1e-14);
  }
  CHECK_THROWS_AS(partial_trace(CMatrix::Identity(5, 5), 2, 2, TraceSide::Right), InvalidInput);
}

TEST_CASE("resolvent: closed forms and residual") {
  const cplx z(0.3, 2.0);
  CMatrix b(1, 1);
  b(0, 0) = z;
  CHECK(max_abs(resolvent(CMatrix::Zero(3, 3), b) - CMatrix::Identity(3, 3) / z) < 1e-15);

  CMatrix a = CMatrix::Zero(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = -1.0;
  b(0, 0) = cplx(0.0, 2.0);
  const CMatrix r = resolvent(a, b);
  CHECK(std::abs(r(0, 0) - 1.0 / cplx(-1.0, 2.0)) < 1e-15);
  CHECK(std::abs(r(1, 1) - 1.0 / cplx(1.0, 2.0)) < 1e-15);

  std::mt19937_64 rng(9);
  for (int t = 0; t < 20; ++t) {
    const CMatrix h = random_hermitian(6, rng);
    CMatrix bb = CMatrix::Identity(2, 2) * cplx(0.5, 1e-3);
    const CMatrix res = resolvent(h, bb);
    CHECK(max_abs((kron(bb, CMatrix::Identity(3, 3)) - h) * res - CMatrix::Identity(6, 6)) <= 1e-9);
    const auto e = hermitian_eig(h);
    cplx expected = 0.0;
    for (int i = 0; i < 6; ++i) expected += 1.0 / (z - e.values(i));
    CMatrix zb(1, 1);
    zb(0, 0) = z;
    CHECK(std::abs(resolvent(h, zb).trace() - expected) < 1e-9);
  }
}

TEST_CASE("resolvent: singular system reports a condition estimate") {
  CMatrix b(1, 1);
  b(0, 0) = 1.0;
  try {
    resolvent(CMatrix::Identity(2, 2), b);
    FAIL("expected NumericalSingularity");
  } catch (const NumericalSingularity& e) {
    CHECK(e.condition() > 1e15);
  }
}
