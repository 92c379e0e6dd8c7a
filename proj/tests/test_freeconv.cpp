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

#include <numbers>

#include "blockmod/freeconv.hpp"
#include "test_support.hpp"

using namespace blockmod;
using namespace blockmod::testing;

namespace {

// Cumulants of the plan from moments of each term: kappa_k(D_s mu) = s^k kappa_k(mu), summed with multiplicity.
std::vector<double> oracle_plan_cumulants(const ConvolutionPlan& plan, int k) {
  std::vector<double> out(static_cast<std::size_t>(k), 0.0);
  for (const auto& t : plan.terms) {
    std::vector<double> m;
    for (int j = 1; j <= k; ++j) m.push_back(moment(t.measure, j));
    const auto kappa = free_cumulants(m);
    for (int j = 0; j < k; ++j) out[j] += t.power * std::pow(t.scale, j + 1) * kappa[j];
  }
  return out;
}

double curve_raw_moment(const DensityCurve& c, int k) { return numeric_moment(c, k); }

}  // namespace

TEST_CASE("total_r_transform: cumulant additivity examples") {
  const cplx z(0.1, 0.05);
  ConvolutionPlan sc{{{Semicircle{}, 1.0, 2}}, {}};
  CHECK(std::abs(total_r_transform(sc, z) - 2.0 * z) < 1e-15);

  ConvolutionPlan fp2{{{FreePoisson{1.0}, 1.0, 1}, {FreePoisson{1.0}, 1.0, 1}}, {}};
  CHECK(std::abs(total_r_transform(fp2, z) - r_transform(FreePoisson{2.0}, z)) < 1e-14);

  const double lambda = 0.8;
  ConvolutionPlan tr{{{FreePoisson{lambda}, 0.5, 3}, {FreePoisson{lambda}, -0.5, 1}}, {}};
  const cplx want = (1.5 * lambda) / (1.0 - z / 2.0) + (-0.5 * lambda) / (1.0 + z / 2.0);
  CHECK(std::abs(total_r_transform(tr, z) - want) < 1e-14);
  const auto got = plan_cumulants(tr, 8);
  const auto oracle = oracle_plan_cumulants(tr, 8);
  for (int k = 0; k < 8; ++k) CHECK(got[k] == doctest::Approx(oracle[k]).epsilon(1e-12));
}

TEST_CASE("evaluate_convolution: identity plan recovers the semicircle") {
  ConvolutionPlan plan{{{Semicircle{}, 1.0, 1}}, {}};
  const auto c = evaluate_convolution(plan);
  const auto exact = sample_curve(Semicircle{}, c.grid);
  CHECK(density_l1(c, exact) <= 5e-3);
  CHECK(curve_mass(c) == doctest::Approx(1.0).epsilon(5e-3));
}

TEST_CASE("evaluate_convolution: Bernoulli free square is the arcsine law on [0, 2]") {
  ConvolutionPlan plan{{{Bernoulli{0.5}, 1.0, 2}}, {}};
  plan.grid.atoms_hint = {0.0, 1.0, 2.0};
  const auto c = evaluate_convolution(plan);
  const auto exact = sample_curve(Arcsine{0.0, 2.0}, c.grid);
  CHECK(cdf_l1(c, exact) <= 5e-3);
  CHECK(c.atoms.empty());
  const auto m = nc_moments(oracle_plan_cumulants(plan, 6));
  for (int k = 1; k <= 6; ++k) CHECK(curve_raw_moment(c, k) == doctest::Approx(m[k - 1]).epsilon(1e-2));
}

TEST_CASE("evaluate_convolution: moments, mass and permutation invariance") {
  const std::vector<ConvolutionPlan> plans{
      {{{FreePoisson{1.0}, 0.5, 3}, {FreePoisson{1.0}, -0.5, 1}}, {}},
      {{{Semicircle{}, 0.5, 3}, {Semicircle{}, -0.5, 1}}, {}},
      {{{Bernoulli{0.5}, 0.5, 3}, {Bernoulli{0.5}, -0.5, 1}}, {}},
      {{{Arcsine{-2.0, 2.0}, 1.0, 1}, {Semicircle{}, 0.7, 2}}, {}},
  };
  for (auto plan : plans) {
    for (const auto& t : plan.terms)
      for (const auto& a : atoms_of(t.measure)) plan.grid.atoms_hint.push_back(a.location * t.scale * t.power);
    ConvolutionTelemetry tel;
    const auto c = evaluate_convolution(plan, &tel);
    CHECK(tel.failed_points == 0);
    const double mass = curve_mass(c);
    CHECK(mass >= 0.995);
    CHECK(mass <= 1.005);
    const auto m = nc_moments(oracle_plan_cumulants(plan, 6));
    for (int k = 1; k <= 6; ++k) {
      const double scale = std::max(std::abs(m[k - 1]), std::pow(std::sqrt(std::max(m[1], 1e-3)), k));
      CHECK_MESSAGE(std::abs(curve_raw_moment(c, k) - m[k - 1]) <= 1e-2 * scale, "k=", k);
    }
    auto swapped = plan;
    std::reverse(swapped.terms.begin(), swapped.terms.end());
    const auto d = evaluate_convolution(swapped);
    CHECK(density_l1(c, d) <= 1e-6);
  }
}

TEST_CASE("evaluate_convolution: positive inputs stay on the positive axis") {
  ConvolutionPlan plan{{{FreePoisson{1.0}, 0.5, 3}, {FreePoisson{0.5}, 1.0, 1}}, {}};
  plan.grid.atoms_hint = {0.0};
  const auto c = evaluate_convolution(plan);
  for (std::size_t i = 0; i < c.grid.size(); ++i)
    if (c.grid[i] < -0.05) CHECK(c.density[i] <= 1e-3);
}

TEST_CASE("classical_mixture: single component, atoms and identical parts") {
  const auto grid = uniform_grid(-3.0, 3.0, 601);
  const auto sc = sample_curve(Semicircle{}, grid);
  // The mixture lives on its own common grid, so equality holds up to
  // linear interpolation error.
  const auto one = classical_mixture({{sc, 1.0}});
  CHECK(density_l1(one, sc) <= 1e-4);

  const auto atoms = classical_mixture({{SpectralMeasure{Atomic{{{0.0, 1.0}}}}, 0.5},
                                        {SpectralMeasure{Atomic{{{1.0, 1.0}}}}, 0.5}});
  REQUIRE(atoms.atoms.size() == 2);
  CHECK(atoms.atoms[0].location == 0.0);
  CHECK(atoms.atoms[0].mass == doctest::Approx(0.5));
  CHECK(atoms.atoms[1].location == 1.0);
  CHECK(atoms.atoms[1].mass == doctest::Approx(0.5));

  const auto three = classical_mixture({{sc, 1.0 / 3}, {sc, 1.0 / 3}, {sc, 1.0 / 3}});
  CHECK(density_l1(three, one) <= 1e-12);

  CHECK_THROWS_AS(classical_mixture({{sc, 0.5}, {sc, 0.4}}), InvalidInput);
}

TEST_CASE("free_compression: cumulants scale by m^(1-k)") {
  const auto a = free_compression(Atomic{{{1.5, 1.0}}}, 3);
  for (int k = 1; k <= 5; ++k) CHECK(moment(a, k) == doctest::Approx(std::pow(1.5, k)).epsilon(1e-12));

  const auto s = std::get<Semicircle>(free_compression(Semicircle{0.0, 1.0}, 2));
  CHECK(s.mean == doctest::Approx(0.0));
  CHECK(s.variance == doctest::Approx(0.5));

  const double lambda = 0.6;
  const int m = 3;
  const auto k1 = cumulants_of(free_compression(FreePoisson{lambda}, m), 6);
  const auto k2 = cumulants_of(dilate(FreePoisson{lambda * m}, 1.0 / m), 6);
  for (int k = 1; k <= 6; ++k) {
    CHECK(k1[k - 1] == doctest::Approx(lambda * std::pow(m, 1 - k)).epsilon(1e-12));
    CHECK(k1[k - 1] == doctest::Approx(k2[k - 1]).epsilon(1e-12));
  }
}
