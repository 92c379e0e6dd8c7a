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

#include "blockmod/measures.hpp"
#include "test_support.hpp"

using namespace blockmod;
using namespace blockmod::testing;

namespace {

constexpr double kPi = std::numbers::pi;

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Moments from the defining formulas of each family.
double oracle_moment(const SpectralMeasure& mu, int k) {
  if (const auto* s = std::get_if<Semicircle>(&mu)) {
    double out = 0.0;
    for (int j = 0; j <= k; j += 2)
      out += binom(k, j) * std::pow(s->mean, k - j) * std::pow(s->variance, j / 2) * catalan(j / 2);
    return out;
  }
  if (const auto* f = std::get_if<FreePoisson>(&mu)) {
    if (k == 0) return 1.0;
    double out = 0.0;
    for (int j = 1; j <= k; ++j) out += binom(k, j) * binom(k, j - 1) / k * std::pow(f->rate, j);
    return out;
  }
  if (const auto* b = std::get_if<Bernoulli>(&mu)) return k == 0 ? 1.0 : b->t;
  if (const auto* a = std::get_if<Arcsine>(&mu)) {
    const double c = 0.5 * (a->lower + a->upper), r = 0.5 * (a->upper - a->lower);
    double out = 0.0;
    for (int j = 0; j <= k; j += 2) out += binom(k, j) * std::pow(c, k - j) * std::pow(r, j) * binom(j, j / 2) / std::pow(2.0, j);
    return out;
  }
  if (const auto* at = std::get_if<Atomic>(&mu)) {
    double out = 0.0;
    for (const auto& x : at->atoms) out += x.mass * std::pow(x.location, k);
    return out;
  }
  return NAN;
}

// Cauchy transform by a smooth angular quadrature of the defining integral.
cplx oracle_cauchy(const SpectralMeasure& mu, cplx z) {
  const int n = 20000;
  cplx s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double th = kPi * (i + 0.5) / n;
    const double w = kPi / n;
    if (std::holds_alternative<Semicircle>(mu)) {
      const double x = 2.0 * std::cos(th);
      s += w * (2.0 / kPi) * std::sin(th) * std::sin(th) / (z - x);
    } else if (const auto* f = std::get_if<FreePoisson>(&mu)) {
      REQUIRE(f->rate == 1.0);
      const double x = 2.0 - 2.0 * std::cos(th);
      s += w * (1.0 + std::cos(th)) / kPi / (z - x);
    } else if (const auto* a = std::get_if<Arcsine>(&mu)) {
      const double x = 0.5 * (a->lower + a->upper) + 0.5 * (a->upper - a->lower) * std::cos(th);
      s += w / kPi / (z - x);
    }
  }
  return s;
}

double semicircle_density(double x) { return std::abs(x) < 2.0 ? std::sqrt(4.0 - x * x) / (2.0 * kPi) : 0.0; }
double mp_density(double x) { return x > 0.0 && x < 4.0 ? std::sqrt(x * (4.0 - x)) / (2.0 * kPi * x) : 0.0; }

std::vector<SpectralMeasure> closed_forms() {
  return {Semicircle{0.0, 1.0},  Semicircle{0.5, 2.0},          FreePoisson{1.0}, FreePoisson{0.4},
          FreePoisson{2.5},      CompoundFreePoisson{{{1.0, 0.7}, {-2.0, 0.3}}},
          Bernoulli{0.5},        Bernoulli{0.2},                Arcsine{-2.0, 2.0}, Arcsine{1.0, 3.0},
          Atomic{{{-1.0, 0.25}, {2.0, 0.75}}}};
}

// Radius inside which r_transform is documented to converge.
double r_radius(const SpectralMeasure& mu) {
  if (std::holds_alternative<Semicircle>(mu)) return 1.0;
  if (const auto* c = std::get_if<CompoundFreePoisson>(&mu)) {
    double t = 0.0;
    for (const auto& a : c->parameter) t = std::max(t, std::abs(a.location));
    return 1.0 / t;
  }
  if (std::holds_alternative<FreePoisson>(mu) || std::holds_alternative<Bernoulli>(mu)) return 1.0;
  if (const auto* a = std::get_if<Arcsine>(&mu)) return 2.0 / (a->upper - a->lower) / (1.0 + std::abs(a->lower + a->upper));
  return 1.0 / 6.0;
}

}  // namespace

TEST_CASE("moment: closed-form families against their defining formulas") {
  CHECK(moment(Semicircle{0.0, 1.0}, 4) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(moment(FreePoisson{1.0}, 3) == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(moment(Atomic{{{1.7, 1.0}}}, 5) == doctest::Approx(std::pow(1.7, 5)).epsilon(1e-14));
  for (const auto& mu : closed_forms()) {
    if (std::holds_alternative<CompoundFreePoisson>(mu)) continue;
    for (int k = 0; k <= 8; ++k)
      CHECK_MESSAGE(moment(mu, k) == doctest::Approx(oracle_moment(mu, k)).epsilon(1e-12), kind_name(mu), " k=", k);
  }
}

TEST_CASE("moment: compound free Poisson from its cumulants") {
  const CompoundFreePoisson mu{{{1.0, 0.7}, {-2.0, 0.3}}};
  std::vector<double> kappa;
  for (int k = 1; k <= 6; ++k) kappa.push_back(0.7 + 0.3 * std::pow(-2.0, k));
  const auto m = nc_moments(kappa);
  for (int k = 1; k <= 6; ++k) CHECK(moment(mu, k) == doctest::Approx(m[k - 1]).epsilon(1e-12));
}

TEST_CASE("moment: numeric measures integrate their curve") {
  const auto grid = uniform_grid(-2.5, 2.5, 4001);
  DensityCurve c;
  c.grid = grid;
  for (double x : grid) c.density.push_back(semicircle_density(x));
  const SpectralMeasure mu = Numeric{c};
  CHECK(moment(mu, 2) == doctest::Approx(1.0).epsilon(2e-3));
  CHECK(moment(mu, 4) == doctest::Approx(2.0).epsilon(2e-3));
}

TEST_CASE("cauchy: closed forms against quadrature of the density") {
  const std::vector<cplx> points{{0.3, 0.5}, {-1.7, 0.1}, {5.0, 2.0}, {2.0, 1e-2}, {0.0, 3.0}};
  for (const SpectralMeasure& mu : {SpectralMeasure{Semicircle{}}, SpectralMeasure{FreePoisson{1.0}},
                                    SpectralMeasure{Arcsine{-2.0, 2.0}}, SpectralMeasure{Arcsine{1.0, 3.0}}})
    for (cplx z : points) {
      if (z.imag() < 0.05) continue;
      CHECK_MESSAGE(std::abs(cauchy(mu, z) - oracle_cauchy(mu, z)) < 1e-8, kind_name(mu), " z=", z.real(), "+i", z.imag());
    }
  const cplx z(0.4, 0.7);
  CHECK(std::abs(cauchy(Atomic{{{0.0, 1.0}}}, z) - 1.0 / z) < 1e-15);
  CHECK(std::abs(cauchy(Semicircle{}, z) - 0.5 * (z - std::sqrt(z - 2.0) * std::sqrt(z + 2.0))) < 1e-13);
  CHECK(std::abs(cauchy(Bernoulli{0.3}, z) - (0.7 / z + 0.3 / (z - 1.0))) < 1e-15);
}

TEST_CASE("cauchy: Nevanlinna property and decay at infinity for every variant") {
  auto all = closed_forms();
  DensityCurve c;
  c.grid = uniform_grid(-2.5, 2.5, 2001);
  for (double x : c.grid) c.density.push_back(semicircle_density(x));
  all.push_back(Numeric{c});
  for (const auto& mu : all) {
    if (std::holds_alternative<CompoundFreePoisson>(mu)) continue;
    for (double x = -6.0; x <= 6.0; x += 0.37)
      for (double eps : {1e-3, 1e-1, 1.0}) CHECK(cauchy(mu, cplx(x, eps)).imag() < 0.0);
    // |z G(z) - 1| <= R / (|z| - R) for support inside [-R, R].
    const auto [lo, hi] = support_bounds(mu);
    const double reach = std::max(std::abs(lo), std::abs(hi));
    for (double phase = 0.1; phase < kPi; phase += 0.3)
      for (double r : {10.0, 40.0}) {
        const cplx z = std::polar(r, phase);
        CHECK(std::abs(z * cauchy(mu, z) - 1.0) <= reach / (r - reach) + 1e-12);
      }
  }
  // The 2/|z| bound for the unit-scale member of each family.
  for (const SpectralMeasure& mu :
       {SpectralMeasure{Semicircle{}}, SpectralMeasure{FreePoisson{1.0}}, SpectralMeasure{Bernoulli{0.5}},
        SpectralMeasure{Arcsine{-2.0, 2.0}}, SpectralMeasure{Atomic{{{0.0, 1.0}}}},
        SpectralMeasure{CompoundFreePoisson{{{1.0, 1.0}}}}, SpectralMeasure{Numeric{c}}})
    for (double phase = 0.1; phase < kPi; phase += 0.3)
      for (double r : {10.0, 40.0}) {
        const cplx z = std::polar(r, phase);
        CHECK(std::abs(z * cauchy(mu, z) - 1.0) <= 2.0 / r);
      }
  const CompoundFreePoisson cfp{{{1.0, 0.7}, {-2.0, 0.3}}};
  CHECK(cauchy(cfp, cplx(0.5, 0.2)).imag() < 0.0);
  CHECK_THROWS_AS(cauchy(Semicircle{}, cplx(0.5, 0.0)), InvalidInput);
}

TEST_CASE("r_transform: closed forms and Taylor coefficients match free cumulants of the moments") {
  const cplx z(0.2, 0.1);
  CHECK(std::abs(r_transform(Semicircle{0.5, 2.0}, z) - (0.5 + 2.0 * z)) < 1e-15);
  CHECK(std::abs(r_transform(CompoundFreePoisson{{{1.0, 0.8}}}, 0.0) - 0.8) < 1e-15);
  CHECK(std::abs(r_transform(FreePoisson{0.8}, z) - 0.8 / (1.0 - z)) < 1e-14);
  CHECK(std::abs(r_transform(FreePoisson{0.8}, z) - r_transform(CompoundFreePoisson{{{1.0, 0.8}}}, z)) < 1e-14);
  CHECK_THROWS_AS(r_transform(Numeric{}, z), UnsupportedVariant);

  for (const auto& mu : closed_forms()) {
    std::vector<double> moments;
    for (int k = 1; k <= 6; ++k) moments.push_back(moment(mu, k));
    const auto kappa = free_cumulants(moments);
    // Taylor coefficients by the trapezoid rule on a circle inside the radius.
    const double r = 0.2 * r_radius(mu);
    const int nodes = 128;
    for (int k = 1; k <= 6; ++k) {
      cplx coef = 0.0;
      for (int j = 0; j < nodes; ++j) {
        const cplx w = std::polar(r, 2.0 * kPi * j / nodes);
        coef += r_transform(mu, w) * std::pow(w, -(k - 1)) / static_cast<double>(nodes);
      }
      const double scale = std::max(1.0, std::abs(kappa[k - 1]));
      CHECK_MESSAGE(std::abs(coef - kappa[k - 1]) / scale <= 1e-6, kind_name(mu), " k=", k);
    }
  }
}

TEST_CASE("dilate: pushforward examples and group action") {
  const auto s = std::get<Semicircle>(dilate(Semicircle{0.0, 1.0}, 2.0));
  CHECK(s.mean == 0.0);
  CHECK(s.variance == doctest::Approx(4.0));
  const auto a = std::get<Atomic>(dilate(Atomic{{{1.0, 1.0}}}, -1.0));
  REQUIRE(a.atoms.size() == 1);
  CHECK(a.atoms[0].location == -1.0);
  const auto fp = std::get<CompoundFreePoisson>(dilate(FreePoisson{0.7}, 1.5));
  REQUIRE(fp.parameter.size() == 1);
  CHECK(fp.parameter[0].location == doctest::Approx(1.5));
  CHECK(fp.parameter[0].mass == doctest::Approx(0.7));
  const auto kappa = cumulants_of(dilate(FreePoisson{0.7}, 1.5), 6);
  for (int k = 1; k <= 6; ++k) CHECK(kappa[k - 1] == doctest::Approx(0.7 * std::pow(1.5, k)).epsilon(1e-12));
  CHECK_THROWS_AS(dilate(Semicircle{}, 0.0), InvalidInput);

  for (const auto& mu : closed_forms())
    for (double s1 : {-0.5, 2.0})
      for (double s2 : {0.3, -3.0})
        for (int k = 1; k <= 8; ++k) {
          const double lhs = moment(dilate(dilate(mu, s1), s2), k);
          const double rhs = moment(dilate(mu, s1 * s2), k);
          CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(rhs)));
          CHECK(std::abs(rhs - std::pow(s1 * s2, k) * moment(mu, k)) <= 1e-10 * std::max(1.0, std::abs(rhs)));
        }
}

TEST_CASE("validate: rejects out-of-range parameters") {
  CHECK_THROWS_AS(validate(Semicircle{0.0, -1.0}), InvalidInput);
  CHECK_THROWS_AS(validate(FreePoisson{0.0}), InvalidInput);
  CHECK_THROWS_AS(validate(Bernoulli{1.5}), InvalidInput);
  CHECK_THROWS_AS(validate(Arcsine{1.0, 1.0}), InvalidInput);
  CHECK_THROWS_AS(validate(Atomic{{{0.0, 0.4}, {1.0, 0.4}}}), InvalidInput);
  CHECK_NOTHROW(validate(CompoundFreePoisson{{{2.0, 3.0}}}));
}

TEST_CASE("stieltjes_invert: semicircle and free Poisson from sampled Cauchy transforms") {
  auto invert = [](const SpectralMeasure& mu, double lo, double hi) {
    const auto grid = uniform_grid(lo, hi, 3001, 0.0);
    std::vector<CauchySamples> levels;
    for (double eps : {1e-3, 2e-3}) {
      CauchySamples s{eps, {}};
      for (double x : grid) s.values.push_back(cauchy(mu, cplx(x, eps)));
      levels.push_back(s);
    }
    InversionOptions opt;
    opt.richardson = true;
    double raw = 0.0;
    auto c = stieltjes_invert(grid, levels, opt, &raw);
    CHECK(std::abs(raw - 1.0) <= 5e-3);
    return c;
  };
  const auto sc = invert(Semicircle{}, -3.0, 3.0);
  CHECK(curve_density_at(sc, 0.0) == doctest::Approx(1.0 / kPi).epsilon(2e-3 * kPi));
  double outside = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i < sc.grid.size(); ++i) {
    if (std::abs(sc.grid[i]) > 2.2) outside = std::max(outside, sc.density[i]);
    if (i > 0) {
      const double h = sc.grid[i] - sc.grid[i - 1];
      l1 += 0.5 * h * (std::abs(sc.density[i] - semicircle_density(sc.grid[i])) +
                       std::abs(sc.density[i - 1] - semicircle_density(sc.grid[i - 1])));
    }
  }
  CHECK(outside <= 1e-3);
  CHECK(l1 <= 5e-3);

  const auto fp = invert(FreePoisson{1.0}, -0.5, 4.5);
  CHECK(std::abs(curve_density_at(fp, 1.0) - std::sqrt(3.0) / (2.0 * kPi)) <= 2e-3);
  l1 = 0.0;
  for (std::size_t i = 1; i < fp.grid.size(); ++i) {
    const double h = fp.grid[i] - fp.grid[i - 1];
    const double xm = 0.5 * (fp.grid[i] + fp.grid[i - 1]);
    if (xm > 0.05) l1 += h * std::abs(0.5 * (fp.density[i] + fp.density[i - 1]) - mp_density(xm));
  }
  // The 1/sqrt(x) edge at 0 is excluded from the pointwise comparison; the
  // CDF distance covers it.
  CHECK(l1 <= 5e-3);
  const auto exact = sample_curve(FreePoisson{1.0}, fp.grid);
  CHECK(cdf_l1(fp, exact) <= 5e-3);
}

TEST_CASE("stieltjes_invert: atoms of a Bernoulli law") {
  const SpectralMeasure mu = Bernoulli{0.3};
  const auto grid = uniform_grid(-1.0, 2.0, 1501, 0.0);
  CauchySamples s{1e-3, {}};
  for (double x : grid) s.values.push_back(cauchy(mu, cplx(x, 1e-3)));
  InversionOptions opt;
  opt.atoms_hint = {0.0, 1.0};
  const auto c = stieltjes_invert(grid, {s}, opt);
  REQUIRE(c.atoms.size() == 2);
  CHECK(c.atoms[0].location == doctest::Approx(0.0));
  CHECK(c.atoms[0].mass == doctest::Approx(0.7).epsilon(1e-2));
  CHECK(c.atoms[1].location == doctest::Approx(1.0));
  CHECK(c.atoms[1].mass == doctest::Approx(0.3).epsilon(1e-2));
}

TEST_CASE("curve utilities: CDF, distances and normalization") {
  const auto grid = uniform_grid(-3.0, 3.0, 2001);
  const auto a = sample_curve(Semicircle{}, grid);
  CHECK(curve_mass(a) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(curve_cdf(a, 0.0) == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(density_l1(a, a) == 0.0);
  CHECK(cdf_l1(a, a) == 0.0);
  const auto b = sample_curve(Semicircle{0.1, 1.0}, grid);
  // int |F(x) - F(x - 0.1)| dx = 0.1 for a pure shift.
  CHECK(cdf_l1(a, b) == doctest::Approx(0.1).epsilon(1e-2));
  DensityCurve d{grid, std::vector<double>(grid.size(), 0.0), {{0.5, 2.0}}};
  normalize(d);
  CHECK(d.atoms[0].mass == doctest::Approx(1.0));
  const CurveCdf f(d);
  CHECK(f(0.5) == doctest::Approx(1.0));
  CHECK(f.left_limit(0.5) == doctest::Approx(0.0));
  const auto pinned = uniform_grid(-1.0, 2.0, 10, 0.0);
  CHECK(std::find(pinned.begin(), pinned.end(), 0.0) != pinned.end());
}
