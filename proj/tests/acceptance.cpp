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

// Runs the ten acceptance criteria and prints one PASS/FAIL line per
// criterion. Exits non-zero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "blockmod/analytic.hpp"
#include "blockmod/opvalued.hpp"
#include "blockmod/simulate.hpp"
#include "test_support.hpp"

using namespace blockmod;
using namespace blockmod::testing;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

EnsembleSpec ensemble(EnsembleKind kind, int d, int m, std::uint64_t seed) {
  EnsembleSpec s;
  s.kind = std::move(kind);
  s.d = d;
  s.m = m;
  s.trials = 20;
  s.seed = seed;
  return s;
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Moments from the textbook formulas: Catalan numbers, Narayana polynomials,
// central binomials and the Bernoulli law.
double oracle_moment(const SpectralMeasure& mu, int k) {
  if (const auto* s = std::get_if<Semicircle>(&mu)) {
    double total = 0.0;
    for (int j = 0; 2 * j <= k; ++j)
      total += binomial(k, 2 * j) * std::pow(s->mean, k - 2 * j) * std::pow(s->variance, j) * catalan(j);
    return total;
  }
  if (const auto* f = std::get_if<FreePoisson>(&mu)) {
    double total = 0.0;
    for (int j = 1; j <= k; ++j) total += binomial(k, j) * binomial(k, j - 1) / k * std::pow(f->rate, j);
    return total;
  }
  if (const auto* b = std::get_if<Bernoulli>(&mu)) return b->t;
  const auto& a = std::get<Arcsine>(mu);
  const double c = 0.5 * (a.lower + a.upper), r = 0.5 * (a.upper - a.lower);
  double total = 0.0;
  for (int j = 0; 2 * j <= k; ++j)
    total += binomial(k, 2 * j) * std::pow(c, k - 2 * j) * std::pow(r, 2 * j) * binomial(2 * j, j) / std::pow(4.0, j);
  return total;
}

double relative(double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

// Left and right ends of the region where the curve carries density.
std::pair<double, double> numeric_support(const DensityCurve& c) {
  double peak = 0.0;
  for (double d : c.density) peak = std::max(peak, d);
  const double cut = 1e-3 * peak;
  double lo = c.grid.back(), hi = c.grid.front();
  for (std::size_t i = 0; i < c.grid.size(); ++i)
    if (c.density[i] > cut) {
      lo = std::min(lo, c.grid[i]);
      hi = std::max(hi, c.grid[i]);
    }
  for (const auto& a : c.atoms) {
    lo = std::min(lo, a.location);
    hi = std::max(hi, a.location);
  }
  return {lo, hi};
}

// Identity behavior of unitary conjugation.
Outcome criterion1() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst_analytic = 0.0, worst_opvalued = 0.0;
  for (int n : {2, 3})
    for (const SpectralMeasure& mu : {SpectralMeasure{Semicircle{0.0, 1.0}}, SpectralMeasure{FreePoisson{1.0}}}) {
      const auto map = unitary_conj_map(haar_unitary(n, rng));
      const auto analysis = spectral_analysis(map);
      o.require(analysis.uc, "unitary_conj passes the unitarity check");
      const auto a = modified_measure_uc(mu, analysis);
      worst_analytic = std::max(worst_analytic, cdf_l1(a.curve, sample_curve(mu, a.curve.grid)));
      const auto v = modified_density_numeric(map, mu);
      worst_opvalued = std::max(worst_opvalued, cdf_l1(v.curve, sample_curve(mu, v.curve.grid)));
    }
  const double elapsed = seconds_since(t0);
  o.detail << "analytic CDF-L1 " << worst_analytic << " (<= 1e-3), opvalued CDF-L1 " << worst_opvalued
           << " (<= 2e-2), " << elapsed << " s (< 30 s)";
  o.require(worst_analytic <= 1e-3, "analytic");
  o.require(worst_opvalued <= 2e-2, "opvalued");
  o.require(elapsed < 30.0, "runtime");
  return o;
}

// GUE closed form and Monte Carlo.
Outcome criterion2() {
  Outcome o;
  const double a = 0.5, sigma2 = 1.0;
  double worst_formula = 0.0, worst_ks = 0.0;
  std::uint64_t seed = 200;
  for (int n : {2, 3})
    for (const auto& map : {transpose_map(n), reduction_map(n), generalized_map(n, 1.0, 2.0, 3.0)}) {
      const CMatrix c = choi_by_definition(map);
      const double tr = c.trace().real(), tr2 = (c * c).trace().real();
      const auto g = gue_modified(a, sigma2, spectral_analysis(map));
      worst_formula = std::max({worst_formula, std::abs(g.mean - tr / n * a) / std::max(1.0, std::abs(tr / n * a)),
                                std::abs(g.variance - sigma2 * tr2 / (n * n)) / std::max(1.0, sigma2 * tr2 / (n * n))});
      const int d = static_cast<int>(std::lround(1000.0 / n));
      const auto emp = simulate(ensemble(GueEnsemble{a, sigma2}, d, n, ++seed), map);
      const auto curve = modified_measure_uc(Semicircle{a, sigma2}, spectral_analysis(map)).curve;
      worst_ks = std::max(worst_ks, empirical_vs_predicted(emp, curve).ks);
    }
  o.detail << "mean/variance rel. err " << worst_formula << " (<= 1e-12), Monte Carlo KS " << worst_ks << " (<= 0.05)";
  o.require(worst_formula <= 1e-12, "formula");
  o.require(worst_ks <= 0.05, "KS");
  return o;
}

// Partial transpose of a Wishart matrix.
Outcome criterion3() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto analysis = spectral_analysis(transpose_map(2));
  const auto r = modified_measure_uc(FreePoisson{1.0}, analysis);
  // D_{1/2}[pi_3 boxminus pi_1] is the compound free Poisson law with jumps +-1/2 and rates 3 and 1.
  bool parameter_ok = false;
  if (r.closed_form) {
    if (const auto* c = std::get_if<CompoundFreePoisson>(&*r.closed_form)) {
      double plus = 0.0, minus = 0.0;
      for (const auto& at : c->parameter) {
        if (std::abs(at.location - 0.5) < 1e-12) plus += at.mass;
        if (std::abs(at.location + 0.5) < 1e-12) minus += at.mass;
      }
      parameter_ok = c->parameter.size() == 2 && std::abs(plus - 3.0) < 1e-12 && std::abs(minus - 1.0) < 1e-12;
    }
  }
  const auto emp = simulate(ensemble(WishartEnsemble{1.0}, 500, 2, 301), transpose_map(2));
  const double ks = empirical_vs_predicted(emp, r.curve).ks;
  const auto [lo, hi] = numeric_support(r.curve);
  const double edge = std::max(std::abs(emp.pool.front() - lo), std::abs(emp.pool.back() - hi));
  const double elapsed = seconds_since(t0);
  o.detail << "KS " << ks << " (<= 0.05), support [" << lo << ", " << hi << "] vs pool [" << emp.pool.front() << ", "
           << emp.pool.back() << "], edge gap " << edge << " (<= 0.1), " << elapsed << " s (< 120 s)";
  o.require(parameter_ok, "compound parameter 3 delta_{1/2} + delta_{-1/2}");
  o.require(ks <= 0.05, "KS");
  o.require(edge <= 0.1, "support edges");
  o.require(elapsed < 120.0, "runtime");
  return o;
}

// Reduction map: compound free Poisson cumulants and Monte Carlo.
Outcome criterion4() {
  Outcome o;
  double worst = 0.0;
  for (int n : {2, 3, 4})
    for (double lambda : {0.5, 1.0, 2.0}) {
      const auto cfp = cfp_modified({{1.0, lambda}}, spectral_analysis(reduction_map(n)));
      const auto kappa = cumulants_of(cfp, 6);
      for (int k = 1; k <= 6; ++k) {
        // Cumulants of a compound free Poisson law are the moments of its parameter
        // lambda (n^2 - 1) delta_1 + lambda delta_{1-n}, scaled by 1/n.
        const double want = (lambda * (n * n - 1) + lambda * std::pow(1.0 - n, k)) / std::pow(n, k);
        // The two atoms can cancel (n = 3, k = 3), so errors are relative to the absolute moment.
        const double scale = (lambda * (n * n - 1) + lambda * std::pow(n - 1.0, k)) / std::pow(n, k);
        worst = std::max(worst, std::abs(kappa[k - 1] - want) / scale);
      }
    }
  const auto map = reduction_map(2);
  const auto emp = simulate(ensemble(WishartEnsemble{1.0}, 500, 2, 401), map);
  const auto curve = modified_measure_uc(FreePoisson{1.0}, spectral_analysis(map)).curve;
  const double ks = empirical_vs_predicted(emp, curve).ks;
  o.detail << "cumulant rel. err " << worst << " (<= 1e-10), Monte Carlo KS " << ks << " (<= 0.05)";
  o.require(worst <= 1e-10, "cumulants");
  o.require(ks <= 0.05, "KS");
  return o;
}

// General solver on the worked example map.
Outcome criterion5() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto map = example_map();
  struct Case {
    const char* name;
    SpectralMeasure mu;
    EnsembleKind kind;
  };
  const std::vector<Case> cases{{"Wigner", Semicircle{}, GueEnsemble{}},
                                {"Wishart", FreePoisson{1.0}, WishartEnsemble{1.0}},
                                {"rotated arcsine", Arcsine{-2.0, 2.0}, RotatedEnsemble{Arcsine{-2.0, 2.0}}}};
  std::uint64_t seed = 500;
  for (const auto& c : cases) {
    const auto curve = modified_density_numeric(map, c.mu).curve;
    const auto emp = simulate(ensemble(c.kind, 500, 2, ++seed), map);
    const double ks = empirical_vs_predicted(emp, curve).ks;
    o.detail << c.name << " KS " << ks << ", ";
    o.require(ks <= 0.05, c.name);
  }
  const double elapsed = seconds_since(t0);
  o.detail << "(each <= 0.05), " << elapsed << " s (< 600 s)";
  o.require(elapsed < 600.0, "runtime");
  return o;
}

// Operator-valued solver against the analytic path on UC maps.
Outcome criterion6() {
  Outcome o;
  std::mt19937_64 rng(601);
  const int n = 2;
  const std::vector<LinearBlockMap> maps{transpose_map(n), reduction_map(n), generalized_map(n, 1.0, 2.0, 3.0),
                                         unitary_conj_map(haar_unitary(n, rng)),
                                         weyl_mixture_map({0.7, -0.2, 0.4, 0.1}, weyl_operators(n))};
  const std::vector<SpectralMeasure> inputs{Semicircle{0.0, 1.0}, FreePoisson{1.0}, Bernoulli{0.5}};
  double worst = 0.0, worst_stability = 0.0;
  for (const auto& map : maps)
    for (const auto& mu : inputs) {
      const auto v = modified_density_numeric(map, mu);
      worst_stability = std::max(worst_stability, v.stability_l1.value_or(1.0));
      // The analytic plan is evaluated on the grid and heights of the operator-valued curve.
      GridSpec grid;
      grid.auto_range = false;
      grid.xmin = v.curve.grid.front();
      grid.xmax = v.curve.grid.back();
      grid.points = static_cast<int>(v.curve.grid.size());
      auto spec = make_modified_spec(mu, spectral_analysis(map), grid);
      for (const auto& at : atoms_of(mu))
        for (const auto& t : spec.plan.terms) spec.plan.grid.atoms_hint.push_back(at.location * t.scale * t.power);
      const auto a = evaluate_convolution(spec.plan);
      const double l1 = density_l1(v.curve, a);
      worst = std::max(worst, l1);
      if (l1 > 2e-2) o.detail << " " << kind_name(map) << "/" << kind_name(mu) << "=" << l1;
    }
  o.detail << " opvalued vs analytic density-L1 " << worst << " (<= 2e-2), delta stability " << worst_stability
           << " (<= 1e-2)";
  o.require(worst <= 2e-2, "L1");
  o.require(worst_stability <= 1e-2, "stability");
  return o;
}

// Moment-cumulant round trips and R-transform Taylor coefficients.
Outcome criterion7() {
  Outcome o;
  std::mt19937_64 rng(701);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double worst_moment = 0.0, worst_cumulant = 0.0;
  std::vector<std::vector<double>> cases;
  for (int t = 0; t < 200; ++t) {
    std::vector<double> kappa(8);
    for (double& x : kappa) x = u(rng);
    cases.push_back(kappa);
  }
  for (const SpectralMeasure& mu : {SpectralMeasure{Semicircle{0.5, 2.0}}, SpectralMeasure{FreePoisson{0.7}},
                                    SpectralMeasure{Bernoulli{0.3}}, SpectralMeasure{Arcsine{-1.0, 3.0}}})
    cases.push_back(cumulants_of(mu, 8));
  for (const auto& kappa : cases) {
    const auto m = nc_moments(kappa);
    const auto back = free_cumulants(m);
    const auto again = nc_moments(back);
    double scale = 1.0;
    for (double x : m) scale = std::max(scale, std::abs(x));
    for (int k = 0; k < 8; ++k) {
      worst_moment = std::max(worst_moment, relative(again[k], m[k]));
      worst_cumulant = std::max(worst_cumulant, std::abs(back[k] - kappa[k]) / scale);
    }
  }

  double worst_r = 0.0;
  const std::vector<std::pair<SpectralMeasure, double>> laws{{Semicircle{0.0, 1.0}, 1.0}, {Semicircle{0.5, 2.0}, 0.5},
                                                             {FreePoisson{1.0}, 1.0},     {FreePoisson{0.4}, 1.0},
                                                             {Bernoulli{0.5}, 1.0},       {Bernoulli{0.2}, 1.0},
                                                             {Arcsine{-2.0, 2.0}, 0.5},   {Arcsine{1.0, 3.0}, 0.2}};
  for (const auto& [mu, radius] : laws) {
    std::vector<double> moments;
    for (int k = 1; k <= 6; ++k) moments.push_back(oracle_moment(mu, k));
    const auto kappa = free_cumulants(moments);
    const double r = 0.2 * radius;
    const int nodes = 128;
    for (int k = 1; k <= 6; ++k) {
      cplx coef = 0.0;
      for (int j = 0; j < nodes; ++j) {
        const cplx w = std::polar(r, 2.0 * kPi * j / nodes);
        coef += r_transform(mu, w) * std::pow(w, -(k - 1)) / static_cast<double>(nodes);
      }
      worst_r = std::max(worst_r, std::abs(coef - kappa[k - 1]) / std::max(1.0, std::abs(kappa[k - 1])));
    }
  }
  o.detail << "moment round trip " << worst_moment << ", cumulant round trip " << worst_cumulant
           << " (both <= 1e-12), R-transform coefficients " << worst_r << " (<= 1e-6)";
  o.require(worst_moment <= 1e-12, "moments");
  o.require(worst_cumulant <= 1e-12, "cumulants");
  o.require(worst_r <= 1e-6, "R-transform");
  return o;
}

// Covariance lemma on random maps.
Outcome criterion8() {
  Outcome o;
  std::mt19937_64 rng(801);
  double worst = 0.0;
  for (int m = 1; m <= 3; ++m)
    for (int n = 1; n <= 3; ++n)
      for (int t = 0; t < 10; ++t)
        worst = std::max(worst, covariance_check(spectral_analysis(generic_map(random_coefficients(m, n, rng)))));
  o.detail << "covariance deviation " << worst << " (<= 1e-12)";
  o.require(worst <= 1e-12, "covariance");
  return o;
}

// Dual map spectra.
Outcome criterion9() {
  Outcome o;
  std::mt19937_64 rng(901);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int m = 1 + t % 3, n = 1 + (t / 3) % 3;
    const CMatrix c = choi_from_coeffs(random_coefficients(m, n, rng));
    const auto a = hermitian_eig(c).values, b = hermitian_eig(dual_choi(c, m, n)).values;
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  o.detail << "spectral deviation " << worst << " (<= 1e-10)";
  o.require(worst <= 1e-10, "spectra");
  return o;
}

// Diagonal map with all-ones weights against the generalized map.
Outcome criterion10() {
  Outcome o;
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(2, 2);
  const auto analysis = spectral_analysis(generalized_map(2, 0.0, 1.0, 0.0));
  double worst = 0.0;
  for (const SpectralMeasure& mu : {SpectralMeasure{Semicircle{0.0, 1.0}}, SpectralMeasure{FreePoisson{1.0}},
                                    SpectralMeasure{Bernoulli{0.5}}, SpectralMeasure{Arcsine{-2.0, 2.0}}}) {
    const auto d = diagonal_map_cumulants(mu, ones, 6);
    const auto g = modified_cumulants(mu, analysis, 6);
    for (int k = 0; k < 6; ++k) worst = std::max(worst, relative(d[k], g[k]));
  }
  o.detail << "cumulant rel. err " << worst << " (<= 1e-8)";
  o.require(worst <= 1e-8, "cumulants");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"1 identity behavior", criterion1},      {"2 GUE closed form", criterion2},
      {"3 partial transpose of Wishart", criterion3}, {"4 reduction map", criterion4},
      {"5 general solver on the example map", criterion5}, {"6 cross-path oracle", criterion6},
      {"7 combinatorial oracle", criterion7},   {"8 covariance lemma", criterion8},
      {"9 dual map spectra", criterion9},       {"10 diagonal map", criterion10},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    std::string line;
    bool pass = false;
    try {
      const auto outcome = run();
      pass = outcome.pass;
      line = outcome.detail.str();
    } catch (const std::exception& e) {
      line = std::string("exception: ") + e.what();
    }
    if (!pass) ++failures;
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << name << ": " << line << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
