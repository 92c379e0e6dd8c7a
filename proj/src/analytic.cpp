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

#include "blockmod/analytic.hpp"

#include <algorithm>
#include <cmath>

#include "internal.hpp"

namespace blockmod {

using internal::overloaded;

namespace {

void require_uc(const ChoiAnalysis& analysis, const char* where) {
  if (!analysis.uc)
    throw UnsupportedConfiguration(std::string(where) +
                                   ": the Choi matrix fails the unitarity condition; use the operator-valued solver "
                                   "(method=opvalued) for square maps");
  int total = 0;
  for (const auto& g : analysis.groups) total += g.rank;
  if (total + analysis.kernel_rank > analysis.n * analysis.m)
    throw InvalidInput(std::string(where) + ": group ranks exceed the Choi dimension");
}

DensityCurve point_mass(double x) {
  DensityCurve c;
  c.grid = {x - 1.0, x, x + 1.0};
  c.density = {0.0, 0.0, 0.0};
  c.atoms = {{x, 1.0}};
  return c;
}

// Curve of a closed-form law on the grid's range (or its padded support).
DensityCurve closed_form_curve(const SpectralMeasure& mu, const GridSpec& grid) {
  if (const auto* c = std::get_if<CompoundFreePoisson>(&mu); c && c->parameter.size() > 1) {
    ConvolutionPlan plan{{{mu, 1.0, 1}}, grid};
    return evaluate_convolution(plan);
  }
  double lo = grid.xmin, hi = grid.xmax;
  if (grid.auto_range) {
    const auto [a, b] = support_bounds(mu);
    const double pad = 0.05 * std::max(b - a, 1e-3) + 10.0 * grid.eps_levels.front();
    lo = a - pad;
    hi = b + pad;
  }
  auto curve = sample_curve(mu, uniform_grid(lo, hi, grid.points, 0.0), grid.eps_levels.front());
  return curve;
}

std::vector<PlanTerm> nonzero_terms(const SpectralMeasure& mu, const std::vector<std::pair<double, int>>& sp) {
  std::vector<PlanTerm> out;
  for (const auto& [scale, power] : sp)
    if (scale != 0.0 && power > 0) out.push_back({mu, scale, static_cast<double>(power)});
  return out;
}

}  // namespace

ModifiedSpec make_modified_spec(const SpectralMeasure& mu, const ChoiAnalysis& analysis, const GridSpec& grid) {
  require_uc(analysis, "make_modified_spec");
  validate(mu);
  ModifiedSpec spec{mu, analysis, {{}, grid}};
  for (const auto& g : analysis.groups) spec.plan.terms.push_back({mu, g.rho / analysis.m, static_cast<double>(g.rank) * analysis.m / analysis.n});
  return spec;
}

std::vector<double> modified_cumulants(const SpectralMeasure& mu, const ChoiAnalysis& analysis, int k) {
  const auto spec = make_modified_spec(mu, analysis);
  if (spec.plan.terms.empty()) return std::vector<double>(static_cast<std::size_t>(k), 0.0);
  return plan_cumulants(spec.plan, k);
}

Semicircle gue_modified(double a, double sigma2, const ChoiAnalysis& analysis) {
  require_uc(analysis, "gue_modified");
  if (!(sigma2 >= 0.0)) throw InvalidInput("gue_modified: variance must be nonnegative");
  const double n = analysis.n, m = analysis.m;
  const double tr = analysis.choi.trace().real();
  const double tr2 = analysis.choi.squaredNorm();
  return {a * tr / n, sigma2 * tr2 / (n * m)};
}

CompoundFreePoisson cfp_modified(const std::vector<Atom>& nu, const ChoiAnalysis& analysis) {
  require_uc(analysis, "cfp_modified");
  CompoundFreePoisson out;
  for (const auto& g : analysis.groups)
    for (const auto& at : nu) {
      const double loc = at.location * g.rho / analysis.m;
      const double weight = static_cast<double>(g.rank) * analysis.m / analysis.n;
      if (loc != 0.0 && at.mass != 0.0) out.parameter.push_back({loc, weight * at.mass});
    }
  return out;
}

ModifiedResult modified_measure_uc(const SpectralMeasure& mu, const ChoiAnalysis& analysis, const GridSpec& grid) {
  auto spec = make_modified_spec(mu, analysis, grid);
  ModifiedResult out;
  if (spec.plan.terms.empty()) {
    out.closed_form = Atomic{{{0.0, 1.0}}};
    out.curve = point_mass(0.0);
    out.route = "dilation";
    return out;
  }
  if (const auto* s = std::get_if<Semicircle>(&mu)) {
    out.closed_form = gue_modified(s->mean, s->variance, analysis);
    out.route = "semicircle";
  } else if (const auto* f = std::get_if<FreePoisson>(&mu)) {
    auto cfp = cfp_modified({{1.0, f->rate}}, analysis);
    if (!cfp.parameter.empty()) {
      out.closed_form = cfp;
      out.route = "compound_free_poisson";
    }
  } else if (const auto* c = std::get_if<CompoundFreePoisson>(&mu)) {
    auto cfp = cfp_modified(c->parameter, analysis);
    if (!cfp.parameter.empty()) {
      out.closed_form = cfp;
      out.route = "compound_free_poisson";
    }
  } else if (spec.plan.terms.size() == 1 && spec.plan.terms.front().power == 1) {
    out.closed_form = dilate(mu, spec.plan.terms.front().scale);
    out.route = "dilation";
  }
  if (out.closed_form) {
    out.curve = closed_form_curve(*out.closed_form, grid);
    return out;
  }
  out.route = "numeric";
  for (const auto& at : atoms_of(mu))
    for (const auto& t : spec.plan.terms) spec.plan.grid.atoms_hint.push_back(at.location * t.scale * t.power);
  out.curve = evaluate_convolution(spec.plan, &out.telemetry);
  return out;
}

DensityCurve diagonal_map_modified(const SpectralMeasure& mu, const Eigen::MatrixXd& alpha, const GridSpec& grid,
                                   int mixture_points) {
  validate(mu);
  if (alpha.size() == 0 || !alpha.allFinite()) throw InvalidInput("diagonal_map_modified: alpha must be finite and non-empty");
  const double n = alpha.rows();
  const int m = static_cast<int>(alpha.cols());
  std::vector<MixtureComponent> parts;
  for (Eigen::Index i = 0; i < alpha.rows(); ++i) {
    std::vector<std::pair<double, int>> sp;
    for (int j = 0; j < m; ++j) sp.emplace_back(alpha(i, j) / m, m);
    ConvolutionPlan plan{nonzero_terms(mu, sp), grid};
    if (plan.terms.empty()) {
      parts.push_back({SpectralMeasure{Atomic{{{0.0, 1.0}}}}, 1.0 / n});
      continue;
    }
    for (const auto& at : atoms_of(mu))
      for (const auto& t : plan.terms) plan.grid.atoms_hint.push_back(at.location * t.scale * t.power);
    parts.push_back({evaluate_convolution(plan), 1.0 / n});
  }
  return classical_mixture(parts, mixture_points);
}

std::vector<double> diagonal_map_cumulants(const SpectralMeasure& mu, const Eigen::MatrixXd& alpha, int k) {
  const auto kappa = cumulants_of(mu, k);
  const int m = static_cast<int>(alpha.cols());
  std::vector<double> moments(static_cast<std::size_t>(k), 0.0);
  for (Eigen::Index i = 0; i < alpha.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(k), 0.0);
    for (int j = 0; j < m; ++j) {
      const double s = alpha(i, j) / m;
      double p = s;
      for (int q = 0; q < k; ++q, p *= s) row[q] += m * p * kappa[q];
    }
    const auto mom = moments_from_cumulants(row);
    for (int q = 0; q < k; ++q) moments[q] += mom[q] / static_cast<double>(alpha.rows());
  }
  return free_cumulants(moments);
}

ConvolutionPlan catalog_plan(const LinearBlockMap& map, const SpectralMeasure& mu, const GridSpec& grid) {
  validate(map);
  validate(mu);
  const int n = map.n;
  const double nd = n;
  std::vector<std::pair<double, int>> sp = std::visit(
      overloaded{
          [&](const Transpose&) -> std::vector<std::pair<double, int>> {
            return {{1.0 / nd, n * (n + 1) / 2}, {-1.0 / nd, n * (n - 1) / 2}};
          },
          [&](const Reduction&) -> std::vector<std::pair<double, int>> {
            return {{1.0 / nd, n * n - 1}, {-(nd - 1.0) / nd, 1}};
          },
          [&](const TraceForm& t) {
            std::vector<std::pair<double, int>> out;
            const Eigen::VectorXd lambda = hermitian_eig(t.a).values;
            for (double l : lambda) out.emplace_back(std::abs(l) < 1e-12 ? 0.0 : l / map.m, map.m);
            return out;
          },
          [&](const Replicate& r) -> std::vector<std::pair<double, int>> { return {{r.x, 1}}; },
          [&](const UnitaryConj&) -> std::vector<std::pair<double, int>> { return {{1.0, 1}}; },
          [&](const Generalized& g) -> std::vector<std::pair<double, int>> {
            return {{g.alpha + (g.beta + g.gamma) / nd, 1},
                    {(g.beta + g.gamma) / nd, n * (n + 1) / 2 - 1},
                    {(g.beta - g.gamma) / nd, n * (n - 1) / 2}};
          },
          [&](const WeylMixture& w) {
            std::vector<std::pair<double, int>> out;
            for (double a : w.coeffs) out.emplace_back(a, 1);
            return out;
          },
          [&](const DiagonalSchur&) -> std::vector<std::pair<double, int>> {
            throw UnsupportedConfiguration("catalog_plan: diagonal_schur maps use diagonal_map_modified");
          },
          [&](const Generic&) -> std::vector<std::pair<double, int>> {
            throw UnsupportedConfiguration("catalog_plan: generic maps have no catalog formula");
          },
      },
      map.kind);
  ConvolutionPlan plan{nonzero_terms(mu, sp), grid};
  for (const auto& at : atoms_of(mu))
    for (const auto& t : plan.terms) plan.grid.atoms_hint.push_back(at.location * t.scale * t.power);
  return plan;
}

DensityCurve catalog_modified(const LinearBlockMap& map, const SpectralMeasure& mu, const GridSpec& grid,
                              ConvolutionTelemetry* telemetry) {
  const auto plan = catalog_plan(map, mu, grid);
  if (plan.terms.empty()) return point_mass(0.0);
  return evaluate_convolution(plan, telemetry);
}

}  // namespace blockmod
