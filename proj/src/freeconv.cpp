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

#include "blockmod/freeconv.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include "blockmod/parallel.hpp"
#include "internal.hpp"

namespace blockmod {

using internal::finite;
using internal::kPi;

void validate(const ConvolutionPlan& plan) {
  if (plan.terms.empty()) throw InvalidInput("convolution plan: no terms");
  for (const auto& t : plan.terms) {
    if (t.scale == 0.0 || !std::isfinite(t.scale)) throw InvalidInput("convolution plan: scales must be nonzero");
    if (!(t.power >= 1.0) || !std::isfinite(t.power)) throw InvalidInput("convolution plan: powers must be at least 1");
    validate(t.measure);
  }
  const auto& g = plan.grid;
  if (g.points < 3) throw InvalidInput("convolution plan: need at least 3 grid points");
  if (!g.auto_range && !(g.xmax > g.xmin)) throw InvalidInput("convolution plan: empty x-range");
  if (g.eps_levels.empty()) throw InvalidInput("convolution plan: no eps levels");
  for (double e : g.eps_levels)
    if (!(e > 0.0)) throw InvalidInput("convolution plan: eps levels must be positive");
}

cplx total_r_transform(const ConvolutionPlan& plan, cplx z) {
  cplx out = 0.0;
  for (const auto& t : plan.terms) out += t.power * t.scale * r_transform(t.measure, t.scale * z);
  return out;
}

cplx total_r_transform_derivative(const ConvolutionPlan& plan, cplx z) {
  cplx out = 0.0;
  for (const auto& t : plan.terms)
    out += t.power * t.scale * t.scale * r_transform_derivative(t.measure, t.scale * z);
  return out;
}

std::vector<double> plan_cumulants(const ConvolutionPlan& plan, int k) {
  std::vector<double> out(k, 0.0);
  for (const auto& t : plan.terms) {
    const auto kappa = cumulants_of(t.measure, k);
    for (int j = 0; j < k; ++j) out[j] += t.power * std::pow(t.scale, j + 1) * kappa[j];
  }
  return out;
}

std::pair<double, double> plan_support_bound(const ConvolutionPlan& plan) {
  double lo = 0.0, hi = 0.0;
  for (const auto& t : plan.terms) {
    const auto [a, b] = support_bounds(t.measure);
    lo += t.power * std::min(t.scale * a, t.scale * b);
    hi += t.power * std::max(t.scale * a, t.scale * b);
  }
  return {lo, hi};
}

std::pair<double, double> estimate_support(const ConvolutionPlan& plan) {
  const auto [blo, bhi] = plan_support_bound(plan);
  const auto kappa = plan_cumulants(plan, 2);
  const double sigma = std::sqrt(std::max(0.0, kappa[1]));
  const double lo = std::max(blo, kappa[0] - 4.0 * sigma);
  const double hi = std::min(bhi, kappa[0] + 4.0 * sigma);
  if (!(hi > lo)) return {blo, bhi};
  return {lo, hi};
}

namespace {

struct SubordinationState {
  cplx g;
  std::vector<cplx> omega;
};

// Cauchy transform of D_s mu and its derivative.
cplx dilated_cauchy(const PlanTerm& t, cplx w) { return cauchy(t.measure, w / t.scale) / t.scale; }
cplx dilated_cauchy_derivative(const PlanTerm& t, cplx w) {
  return cauchy_derivative(t.measure, w / t.scale) / (t.scale * t.scale);
}

class Solver {
 public:
  explicit Solver(const ConvolutionPlan& plan) : plan_(plan) {
    for (const auto& t : plan.terms) {
      total_power_ += t.power;
      means_.push_back(t.scale * mean(t.measure));
    }
    const auto [lo, hi] = plan_support_bound(plan);
    far_ = 2.0 * std::max({1.0, std::abs(lo), std::abs(hi)});
    kappa1_ = 0.0;
    for (std::size_t j = 0; j < plan.terms.size(); ++j) kappa1_ += plan.terms[j].power * means_[j];
  }

  double far() const { return far_; }

  SubordinationState initial(cplx z) const {
    SubordinationState s;
    s.g = 1.0 / (z - kappa1_);
    for (double m : means_) s.omega.push_back(1.0 / s.g + m);
    return s;
  }

  double residual(const SubordinationState& s, cplx z) const {
    const std::size_t J = plan_.terms.size();
    double r = 0.0;
    cplx sum = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      r = std::max(r, std::abs(dilated_cauchy(plan_.terms[j], s.omega[j]) - s.g) / std::abs(s.g));
      sum += plan_.terms[j].power * s.omega[j];
    }
    r = std::max(r, std::abs(sum - z - (total_power_ - 1.0) / s.g) / (1.0 + std::abs(z)));
    return r;
  }

  bool admissible(const SubordinationState& s, cplx z) const {
    if (!finite(s.g) || !(s.g.imag() < 0.0)) return false;
    for (const auto& w : s.omega)
      if (!finite(w) || !(w.imag() >= z.imag() * (1.0 - 1e-6))) return false;
    return true;
  }

  bool newton(cplx z, SubordinationState& s, int& iterations) const {
    const int J = static_cast<int>(plan_.terms.size());
    if (J == 1 && plan_.terms[0].power == 1) {
      s.omega[0] = z;
      s.g = dilated_cauchy(plan_.terms[0], z);
      ++iterations;
      return s.g.imag() < 0.0;
    }
    Eigen::MatrixXcd jac(J + 1, J + 1);
    Eigen::VectorXcd f(J + 1);
    for (int it = 0; it < 80; ++it) {
      ++iterations;
      jac.setZero();
      cplx sum = 0.0;
      for (int j = 0; j < J; ++j) {
        const auto& t = plan_.terms[j];
        f(j) = dilated_cauchy(t, s.omega[j]) - s.g;
        jac(j, j) = dilated_cauchy_derivative(t, s.omega[j]);
        jac(j, J) = -1.0;
        jac(J, j) = t.power;
        sum += t.power * s.omega[j];
      }
      f(J) = sum - z - (total_power_ - 1.0) / s.g;
      jac(J, J) = (total_power_ - 1.0) / (s.g * s.g);
      if (!f.allFinite() || !jac.allFinite()) return false;
      Eigen::PartialPivLU<Eigen::MatrixXcd> lu(jac);
      Eigen::VectorXcd step = lu.solve(f);
      if (!step.allFinite()) return false;
      SubordinationState next = s;
      for (int h = 0; h < 40; ++h) {
        next.g = s.g - step(J);
        for (int j = 0; j < J; ++j) next.omega[j] = s.omega[j] - step(j);
        if (admissible(next, z)) break;
        step *= 0.5;
      }
      if (!admissible(next, z)) return false;
      double scale = std::abs(next.g);
      for (const auto& w : next.omega) scale = std::max(scale, std::abs(w));
      const bool done = step.cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + scale);
      s = next;
      if (done) break;
    }
    return residual(s, z) < 1e-9;
  }

  // Damped iteration on G = 1/(z - R(G)); needs closed-form R-transforms.
  bool fixed_point(cplx z, SubordinationState& s, int& iterations) const {
    try {
      cplx g = s.g;
      bool converged = false;
      for (int it = 0; it < 5000; ++it) {
        ++iterations;
        const cplx next = 0.5 * g + 0.5 / (z - total_r_transform(plan_, g));
        if (!finite(next)) return false;
        converged = std::abs(next - g) < 1e-12 * (1.0 + std::abs(next));
        g = next;
        if (converged) break;
      }
      if (!converged || !(g.imag() < 0.0)) return false;
      s.g = g;
      for (std::size_t j = 0; j < plan_.terms.size(); ++j) {
        const auto& t = plan_.terms[j];
        s.omega[j] = 1.0 / g + t.scale * r_transform(t.measure, t.scale * g);
      }
      return true;
    } catch (const UnsupportedVariant&) {
      return false;
    }
  }

  struct Outcome {
    std::vector<cplx> values;  // one per requested height, descending
    int iterations = 0;
    bool fixed_point = false;
    bool failed = false;
    double residual = 0.0;
  };

  // Vertical continuation at abscissa x through the requested heights.
  Outcome solve_column(double x, const std::vector<double>& heights_desc) const {
    Outcome out;
    double h = std::max(far_, heights_desc.front());
    SubordinationState s = initial(cplx(x, h));
    std::size_t next_target = 0;
    while (next_target < heights_desc.size()) {
      const cplx z(x, h);
      SubordinationState trial = s;
      if (!newton(z, trial, out.iterations)) {
        trial = s;
        out.fixed_point = true;
        if (!fixed_point(z, trial, out.iterations)) {
          out.failed = true;
          out.values.assign(heights_desc.size(), cplx(0.0, std::numeric_limits<double>::quiet_NaN()));
          return out;
        }
      }
      s = trial;
      if (h <= heights_desc[next_target]) {
        out.values.push_back(s.g);
        out.residual = std::max(out.residual, residual(s, z));
        ++next_target;
        if (next_target == heights_desc.size()) break;
      }
      h = std::max(heights_desc[next_target], 0.5 * h);
    }
    return out;
  }

 private:
  const ConvolutionPlan& plan_;
  double total_power_ = 0.0;
  double far_ = 1.0;
  double kappa1_ = 0.0;
  std::vector<double> means_;
};

std::vector<double> descending(std::vector<double> v) {
  std::sort(v.begin(), v.end(), std::greater<>());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

cplx plan_cauchy(const ConvolutionPlan& plan, cplx z, ScalarSolveStats* stats) {
  validate(plan);
  if (!(z.imag() > 0.0)) throw InvalidInput("plan_cauchy: need Im z > 0");
  Solver solver(plan);
  const auto out = solver.solve_column(z.real(), {z.imag()});
  if (out.failed) throw ConvergenceError("plan_cauchy: subordination did not converge", out.residual);
  if (stats) *stats = {out.iterations, out.fixed_point, out.residual};
  return out.values.front();
}

DensityCurve evaluate_convolution(const ConvolutionPlan& plan, ConvolutionTelemetry* telemetry) {
  validate(plan);
  const GridSpec& spec = plan.grid;
  const Solver solver(plan);
  const auto heights = descending(spec.eps_levels);
  const double eps_min = heights.back();
  const double eps_max = heights.front();

  double lo, hi;
  if (spec.auto_range) {
    std::tie(lo, hi) = estimate_support(plan);
    const double width = std::max(hi - lo, 1e-3);
    const double pad = 0.15 * width + 50.0 * eps_max;
    lo -= pad;
    hi += pad;
  } else {
    lo = spec.xmin;
    hi = spec.xmax;
  }

  ConvolutionTelemetry tel;
  std::vector<double> grid;
  std::vector<std::vector<cplx>> values;  // [height][point]
  auto sample = [&](int points, int round) {
    grid = uniform_grid(lo, hi, points, 0.0);
    const int n = static_cast<int>(grid.size());
    values.assign(heights.size(), std::vector<cplx>(n));
    std::vector<Solver::Outcome> outcomes(n);
    parallel_for(n, [&](int i) { outcomes[i] = solver.solve_column(grid[i], heights); });

    tel = ConvolutionTelemetry{};
    tel.points = n;
    tel.expansions = round;
    for (int i = 0; i < n; ++i) {
      const auto& o = outcomes[i];
      tel.total_iterations += o.iterations;
      tel.max_iterations = std::max(tel.max_iterations, o.iterations);
      tel.fixed_point_points += o.fixed_point ? 1 : 0;
      tel.failed_points += o.failed ? 1 : 0;
      if (!o.failed) tel.max_residual = std::max(tel.max_residual, o.residual);
      for (std::size_t l = 0; l < heights.size(); ++l) values[l][i] = o.values[l];
    }
    if (tel.failed_points > 0.01 * n) {
      std::ostringstream msg;
      msg << "evaluate_convolution: " << tel.failed_points << " of " << n << " grid points did not converge";
      throw ConvergenceError(msg.str(), tel.max_residual);
    }
    // Fill isolated failures from neighbours.
    for (auto& row : values) {
      for (int i = 0; i < n; ++i) {
        if (finite(row[i])) continue;
        int a = i - 1, b = i + 1;
        while (a >= 0 && !finite(row[a])) --a;
        while (b < n && !finite(row[b])) ++b;
        if (a >= 0 && b < n)
          row[i] = row[a] + (row[b] - row[a]) * (grid[i] - grid[a]) / (grid[b] - grid[a]);
        else
          row[i] = a >= 0 ? row[a] : row[b];
      }
    }
  };

  for (int round = 0;; ++round) {
    sample(spec.points, round);
    if (!spec.auto_range || round >= 6) break;
    // Mass near an end that does not shrink with eps means the support
    // reaches the boundary; Poisson tails halve when eps halves.
    const int n = static_cast<int>(grid.size());
    const int edge = std::max(2, n / 40);
    auto inside_support = [&](int i) {
      const double rho = -values.back()[i].imag() / kPi;
      if (rho <= 1e-4) return false;
      const auto wide = solver.solve_column(grid[i], {2.0 * eps_min});
      if (wide.failed) return true;
      const double rho2 = -wide.values.front().imag() / kPi;
      return rho > 0.75 * rho2;
    };
    bool grow_lo = false, grow_hi = false;
    for (int i = 1; i <= edge && !grow_lo; ++i) grow_lo = inside_support(i);
    for (int i = n - 2; i >= n - 1 - edge && !grow_hi; --i) grow_hi = inside_support(i);
    if (!grow_lo && !grow_hi) break;
    const double width = hi - lo;
    if (grow_lo) lo -= 0.25 * width;
    if (grow_hi) hi += 0.25 * width;
  }

  InversionOptions opt;
  opt.richardson = spec.richardson;
  opt.mass_tolerance = spec.mass_tolerance;
  opt.atoms_hint = spec.atoms_hint;
  opt.atoms_hint.push_back(0.0);
  // Singular edges need a step comparable to eps before the trapezoid mass
  // settles; refine a few times before reporting an accuracy failure.
  for (int points = spec.points;;) {
    std::vector<CauchySamples> levels;
    for (std::size_t l = 0; l < heights.size(); ++l) levels.push_back({heights[l], values[l]});
    try {
      auto curve = stieltjes_invert(grid, std::move(levels), opt);
      tel.xmin = grid.front();
      tel.xmax = grid.back();
      if (telemetry) *telemetry = tel;
      return curve;
    } catch (const AccuracyError&) {
      const double step = (hi - lo) / (points - 1);
      if (step < 0.5 * eps_min || points >= 32001) throw;
      points = 2 * points - 1;
      sample(points, tel.expansions);
    }
  }
}

DensityCurve classical_mixture(const std::vector<MixtureComponent>& components, int points) {
  if (components.empty()) throw InvalidInput("classical_mixture: no components");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight >= 0.0)) throw InvalidInput("classical_mixture: negative weight");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidInput("classical_mixture: weights must sum to 1");

  double lo = std::numeric_limits<double>::infinity(), hi = -lo, step = lo;
  bool any_curve = false;
  for (const auto& c : components) {
    if (const auto* curve = std::get_if<DensityCurve>(&c.part)) {
      if (curve->grid.size() < 2) throw InvalidInput("classical_mixture: curve without grid");
      lo = std::min(lo, curve->grid.front());
      hi = std::max(hi, curve->grid.back());
      for (std::size_t i = 1; i < curve->grid.size(); ++i) step = std::min(step, curve->grid[i] - curve->grid[i - 1]);
      any_curve = true;
    }
  }
  for (const auto& c : components) {
    if (const auto* mu = std::get_if<SpectralMeasure>(&c.part)) {
      auto [a, b] = support_bounds(*mu);
      const double pad = 0.05 * std::max(b - a, 1.0);
      lo = std::min(lo, a - pad);
      hi = std::max(hi, b + pad);
    }
  }
  int n = points;
  if (any_curve) n = std::max(points, static_cast<int>(std::ceil((hi - lo) / step)) + 1);
  n = std::min(n, 200001);
  const auto grid = uniform_grid(lo, hi, n);

  DensityCurve out;
  out.grid = grid;
  out.density.assign(grid.size(), 0.0);
  std::map<double, double> atoms;
  for (const auto& c : components) {
    if (c.weight == 0.0) continue;
    DensityCurve part;
    if (const auto* curve = std::get_if<DensityCurve>(&c.part)) {
      part = *curve;
    } else {
      part = sample_curve(std::get<SpectralMeasure>(c.part), grid);
    }
    for (std::size_t i = 0; i < grid.size(); ++i) out.density[i] += c.weight * curve_density_at(part, grid[i]);
    for (const auto& a : part.atoms) atoms[a.location] += c.weight * a.mass;
  }
  for (const auto& [x, m] : atoms)
    if (m > 0.0) out.atoms.push_back({x, m});
  out.density.front() = 0.0;
  out.density.back() = 0.0;
  return out;
}

SpectralMeasure free_compression(const SpectralMeasure& mu, int m, const GridSpec& grid) {
  if (m < 1) throw InvalidInput("free_compression: m must be >= 1");
  if (m == 1) return mu;
  const double md = m;
  if (const auto* s = std::get_if<Semicircle>(&mu)) return Semicircle{s->mean, s->variance / md};
  if (const auto* f = std::get_if<FreePoisson>(&mu)) return CompoundFreePoisson{{{1.0 / md, f->rate * md}}};
  if (const auto* c = std::get_if<CompoundFreePoisson>(&mu)) {
    CompoundFreePoisson out = *c;
    for (auto& a : out.parameter) {
      a.location /= md;
      a.mass *= md;
    }
    return out;
  }
  if (const auto* a = std::get_if<Atomic>(&mu)) {
    int nonzero = 0;
    for (const auto& at : a->atoms) nonzero += at.mass > 0.0 ? 1 : 0;
    if (nonzero == 1) return mu;
  }
  if (!is_closed_form(mu)) throw UnsupportedVariant("free_compression: needs a closed-form measure");
  ConvolutionPlan plan{{{mu, 1.0 / md, md}}, grid};
  return Numeric{evaluate_convolution(plan)};
}

}  // namespace blockmod
