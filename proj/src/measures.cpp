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

#include "blockmod/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "internal.hpp"

namespace blockmod {

using internal::finite;
using internal::kPi;
using internal::overloaded;
using internal::trapz;

namespace {

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double out = 1.0;
  for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return std::round(out);
}

double catalan(int p) { return binomial(2 * p, p) / (p + 1); }

// sqrt(w - a) * sqrt(w - b): analytic off [a, b] and ~ w at infinity.
cplx paired_root(cplx w, double a, double b) { return std::sqrt(w - a) * std::sqrt(w - b); }

std::pair<double, double> free_poisson_edges(double rate) {
  const double r = std::sqrt(rate);
  return {(1.0 - r) * (1.0 - r), (1.0 + r) * (1.0 + r)};
}

double semicircle_density(const Semicircle& s, double x) {
  const double d = 4.0 * s.variance - (x - s.mean) * (x - s.mean);
  return d > 0.0 ? std::sqrt(d) / (2.0 * kPi * s.variance) : 0.0;
}

double free_poisson_density(const FreePoisson& f, double x) {
  const auto [a, b] = free_poisson_edges(f.rate);
  if (x <= a || x >= b || x <= 0.0) return 0.0;
  return std::sqrt((b - x) * (x - a)) / (2.0 * kPi * x);
}

double arcsine_density(const Arcsine& s, double x) {
  if (x <= s.lower || x >= s.upper) return 0.0;
  return 1.0 / (kPi * std::sqrt((x - s.lower) * (s.upper - x)));
}

// Gauss-Legendre nodes and weights on [-1, 1].
std::vector<std::pair<double, double>> gauss_legendre(int n) {
  std::vector<std::pair<double, double>> out;
  for (int i = 1; i <= n; ++i) {
    double x = std::cos(kPi * (i - 0.25) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    out.emplace_back(x, 2.0 / ((1.0 - x * x) * dp * dp));
  }
  return out;
}

const std::vector<std::pair<double, double>>& gauss_legendre_16() {
  static const auto rule = gauss_legendre(16);
  return rule;
}

// Integral of f over [p, q] with the substitution x = p + (q-p)(1-cos t)/2,
// which absorbs inverse square-root endpoint singularities.
template <typename F>
double integrate_cell(const F& f, double p, double q) {
  if (!(q > p)) return 0.0;
  double s = 0.0;
  for (const auto& [node, weight] : gauss_legendre_16()) {
    const double t = 0.5 * kPi * (node + 1.0);
    const double x = p + 0.5 * (q - p) * (1.0 - std::cos(t));
    s += weight * f(x) * 0.5 * (q - p) * std::sin(t);
  }
  return s * 0.5 * kPi;
}

// Cell averages of f around each grid node, splitting cells at breakpoints.
template <typename F>
std::vector<double> cell_averages(const F& f, const std::vector<double>& grid,
                                  std::vector<double> breakpoints) {
  std::sort(breakpoints.begin(), breakpoints.end());
  const std::size_t n = grid.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double lo = 0.5 * (grid[i - 1] + grid[i]);
    const double hi = 0.5 * (grid[i] + grid[i + 1]);
    double a = lo, s = 0.0;
    for (double b : breakpoints) {
      if (b > lo && b < hi) {
        s += integrate_cell(f, a, b);
        a = b;
      }
    }
    s += integrate_cell(f, a, hi);
    out[i] = s / (hi - lo);
  }
  return out;
}

cplx bernoulli_r(double t, cplx w) {
  const cplx d = 1.0 + (4.0 * t - 2.0) * w + w * w;
  return 2.0 * t / (std::sqrt(d) + 1.0 - w);
}

cplx bernoulli_dr(double t, cplx w) {
  const cplx d = 1.0 + (4.0 * t - 2.0) * w + w * w;
  const cplx s = std::sqrt(d);
  const cplx ds = ((4.0 * t - 2.0) + 2.0 * w) / (2.0 * s);
  const cplx den = s + 1.0 - w;
  return -2.0 * t * (ds - 1.0) / (den * den);
}

double numeric_trapz_moment(const DensityCurve& c, int k) {
  std::vector<double> y(c.grid.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::pow(c.grid[i], k) * c.density[i];
  double s = trapz(c.grid, y);
  for (const auto& a : c.atoms) s += a.mass * std::pow(a.location, k);
  return s;
}

// Exact Cauchy transform of a piecewise-linear density plus its atoms.
cplx numeric_cauchy(const DensityCurve& c, cplx z) {
  cplx s = 0.0;
  for (std::size_t i = 1; i < c.grid.size(); ++i) {
    const double x0 = c.grid[i - 1], x1 = c.grid[i];
    const double r0 = c.density[i - 1], r1 = c.density[i];
    if (r0 == 0.0 && r1 == 0.0) continue;
    const double k = (r1 - r0) / (x1 - x0);
    const cplx a = r0 + k * (z - x0);
    s += a * (std::log(z - x0) - std::log(z - x1)) - k * (x1 - x0);
  }
  for (const auto& at : c.atoms) s += at.mass / (z - at.location);
  return s;
}

cplx numeric_cauchy_derivative(const DensityCurve& c, cplx z) {
  cplx s = 0.0;
  for (std::size_t i = 1; i < c.grid.size(); ++i) {
    const double x0 = c.grid[i - 1], x1 = c.grid[i];
    const double r0 = c.density[i - 1], r1 = c.density[i];
    if (r0 == 0.0 && r1 == 0.0) continue;
    const double k = (r1 - r0) / (x1 - x0);
    const cplx a = r0 + k * (z - x0);
    s += k * (std::log(z - x0) - std::log(z - x1)) + a * (1.0 / (z - x0) - 1.0 / (z - x1));
  }
  for (const auto& at : c.atoms) s -= at.mass / ((z - at.location) * (z - at.location));
  return s;
}

double cfp_far_height(const CompoundFreePoisson& c) {
  const auto [lo, hi] = support_bounds(SpectralMeasure{c});
  return 2.0 * std::max({1.0, std::abs(lo), std::abs(hi)});
}

cplx cfp_cauchy(const CompoundFreePoisson& c, cplx z) {
  const SpectralMeasure mu{c};
  return solve_cauchy_equation([&](cplx w) { return r_transform(mu, w); },
                               [&](cplx w) { return r_transform_derivative(mu, w); }, z,
                               cfp_far_height(c));
}

// Two-atom measures are affine images of a Bernoulli law.
struct AffineBernoulli {
  double shift, scale, t;
};

AffineBernoulli as_affine_bernoulli(const Atomic& a) {
  std::vector<Atom> atoms;
  for (const auto& at : a.atoms)
    if (at.mass > 0.0) atoms.push_back(at);
  if (atoms.size() == 1) return {atoms[0].location, 0.0, 0.0};
  if (atoms.size() != 2)
    throw UnsupportedVariant("r_transform: atomic measures with more than two atoms have no closed form");
  return {atoms[0].location, atoms[1].location - atoms[0].location, atoms[1].mass};
}

void check_grid(const std::vector<double>& grid, const char* where) {
  if (grid.size() < 3) throw InvalidInput(std::string(where) + ": grid needs at least 3 points");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw InvalidInput(std::string(where) + ": grid must be strictly increasing");
}

}  // namespace

void validate(const SpectralMeasure& mu) {
  std::visit(overloaded{
                 [](const Semicircle& s) {
                   if (!std::isfinite(s.mean) || !std::isfinite(s.variance) || s.variance < 0.0)
                     throw InvalidInput("semicircle: need finite mean and variance >= 0");
                 },
                 [](const FreePoisson& f) {
                   if (!std::isfinite(f.rate) || !(f.rate > 0.0))
                     throw InvalidInput("free_poisson: rate must be positive");
                 },
                 [](const CompoundFreePoisson& c) {
                   if (c.parameter.empty()) throw InvalidInput("compound_free_poisson: empty parameter measure");
                   for (const auto& a : c.parameter)
                     if (!std::isfinite(a.location) || !std::isfinite(a.mass) || !(a.mass > 0.0))
                       throw InvalidInput("compound_free_poisson: weights must be positive and finite");
                 },
                 [](const Bernoulli& b) {
                   if (!(b.t > 0.0 && b.t < 1.0)) throw InvalidInput("bernoulli: t must lie in (0, 1)");
                 },
                 [](const Arcsine& a) {
                   if (!std::isfinite(a.lower) || !std::isfinite(a.upper) || !(a.lower < a.upper))
                     throw InvalidInput("arcsine: need lower < upper");
                 },
                 [](const Atomic& a) {
                   if (a.atoms.empty()) throw InvalidInput("atomic: no atoms");
                   double total = 0.0;
                   for (const auto& at : a.atoms) {
                     if (!std::isfinite(at.location) || !(at.mass >= 0.0))
                       throw InvalidInput("atomic: masses must be non-negative");
                     total += at.mass;
                   }
                   if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("atomic: masses must sum to 1");
                 },
                 [](const Numeric& n) {
                   const auto& c = n.curve;
                   if (c.grid.size() != c.density.size())
                     throw InvalidInput("numeric: grid and density lengths differ");
                   check_grid(c.grid, "numeric");
                   for (double d : c.density)
                     if (!std::isfinite(d) || d < 0.0) throw InvalidInput("numeric: density must be non-negative");
                   for (const auto& at : c.atoms)
                     if (!(at.mass >= 0.0)) throw InvalidInput("numeric: negative atom mass");
                   if (std::abs(curve_mass(c) - 1.0) > 5e-3) throw InvalidInput("numeric: total mass is not 1");
                 },
             },
             mu);
}

std::string kind_name(const SpectralMeasure& mu) {
  static const char* names[] = {"semicircle", "free_poisson", "compound_free_poisson", "bernoulli",
                                "arcsine",    "atomic",       "numeric"};
  return names[mu.index()];
}

bool is_closed_form(const SpectralMeasure& mu) { return !std::holds_alternative<Numeric>(mu); }

double moment(const SpectralMeasure& mu, int k) {
  if (k < 0) throw InvalidInput("moment: negative order");
  if (k == 0) return 1.0;
  return std::visit(
      overloaded{
          [k](const Semicircle& s) {
            double out = 0.0;
            for (int j = 0; j <= k; j += 2)
              out += binomial(k, j) * std::pow(s.mean, k - j) * std::pow(s.variance, j / 2) * catalan(j / 2);
            return out;
          },
          [k](const FreePoisson& f) {
            double out = 0.0;
            for (int j = 1; j <= k; ++j) out += binomial(k, j) * binomial(k, j - 1) / k * std::pow(f.rate, j);
            return out;
          },
          [k, &mu](const CompoundFreePoisson&) { return moments_from_cumulants(cumulants_of(mu, k))[k - 1]; },
          [](const Bernoulli& b) { return b.t; },
          [k](const Arcsine& a) {
            const double c = 0.5 * (a.lower + a.upper), r = 0.5 * (a.upper - a.lower);
            double out = 0.0;
            for (int j = 0; j <= k; j += 2)
              out += binomial(k, j) * std::pow(c, k - j) * std::pow(r, j) * binomial(j, j / 2) / std::pow(2.0, j);
            return out;
          },
          [k](const Atomic& a) {
            double out = 0.0;
            for (const auto& at : a.atoms) out += at.mass * std::pow(at.location, k);
            return out;
          },
          [k](const Numeric& n) { return numeric_trapz_moment(n.curve, k); },
      },
      mu);
}

double mean(const SpectralMeasure& mu) { return moment(mu, 1); }

double variance(const SpectralMeasure& mu) {
  const double m1 = moment(mu, 1);
  return std::max(0.0, moment(mu, 2) - m1 * m1);
}

std::vector<double> cumulants_of(const SpectralMeasure& mu, int k) {
  if (k < 0) throw InvalidInput("cumulants_of: negative order");
  std::vector<double> out(k, 0.0);
  if (const auto* s = std::get_if<Semicircle>(&mu)) {
    if (k > 0) out[0] = s->mean;
    if (k > 1) out[1] = s->variance;
  } else if (const auto* f = std::get_if<FreePoisson>(&mu)) {
    std::fill(out.begin(), out.end(), f->rate);
  } else if (const auto* c = std::get_if<CompoundFreePoisson>(&mu)) {
    for (int j = 1; j <= k; ++j)
      for (const auto& a : c->parameter) out[j - 1] += a.mass * std::pow(a.location, j);
  } else {
    std::vector<double> m(k);
    for (int j = 1; j <= k; ++j) m[j - 1] = moment(mu, j);
    out = free_cumulants(m);
  }
  return out;
}

cplx r_transform(const SpectralMeasure& mu, cplx z) {
  return std::visit(
      overloaded{
          [z](const Semicircle& s) { return s.mean + s.variance * z; },
          [z](const FreePoisson& f) { return f.rate / (1.0 - z); },
          [z](const CompoundFreePoisson& c) {
            cplx out = 0.0;
            for (const auto& a : c.parameter) out += a.mass * a.location / (1.0 - a.location * z);
            return out;
          },
          [z](const Bernoulli& b) { return bernoulli_r(b.t, z); },
          [z](const Arcsine& a) {
            const double c = 0.5 * (a.lower + a.upper), r = 0.5 * (a.upper - a.lower);
            return c + r * r * z / (std::sqrt(1.0 + r * r * z * z) + 1.0);
          },
          [z](const Atomic& a) {
            const auto ab = as_affine_bernoulli(a);
            if (ab.scale == 0.0) return cplx(ab.shift);
            return ab.shift + ab.scale * bernoulli_r(ab.t, ab.scale * z);
          },
          [](const Numeric&) -> cplx {
            throw UnsupportedVariant("r_transform: numeric measures have no closed-form R-transform");
          },
      },
      mu);
}

cplx r_transform_derivative(const SpectralMeasure& mu, cplx z) {
  return std::visit(
      overloaded{
          [](const Semicircle& s) { return cplx(s.variance); },
          [z](const FreePoisson& f) { return f.rate / ((1.0 - z) * (1.0 - z)); },
          [z](const CompoundFreePoisson& c) {
            cplx out = 0.0;
            for (const auto& a : c.parameter) {
              const cplx d = 1.0 - a.location * z;
              out += a.mass * a.location * a.location / (d * d);
            }
            return out;
          },
          [z](const Bernoulli& b) { return bernoulli_dr(b.t, z); },
          [z](const Arcsine& a) {
            const double r = 0.5 * (a.upper - a.lower);
            const cplx s = std::sqrt(1.0 + r * r * z * z);
            return r * r / (s * (s + 1.0));
          },
          [z](const Atomic& a) {
            const auto ab = as_affine_bernoulli(a);
            if (ab.scale == 0.0) return cplx(0.0);
            return ab.scale * ab.scale * bernoulli_dr(ab.t, ab.scale * z);
          },
          [](const Numeric&) -> cplx {
            throw UnsupportedVariant("r_transform: numeric measures have no closed-form R-transform");
          },
      },
      mu);
}

cplx cauchy(const SpectralMeasure& mu, cplx z) {
  if (z.imag() == 0.0 || !finite(z)) throw InvalidInput("cauchy: argument must be off the real axis");
  if (z.imag() < 0.0) return std::conj(cauchy(mu, std::conj(z)));
  return std::visit(
      overloaded{
          [z](const Semicircle& s) {
            const cplx w = z - s.mean;
            if (s.variance == 0.0) return 1.0 / w;
            const double sigma = std::sqrt(s.variance);
            return 2.0 / (w + paired_root(w, -2.0 * sigma, 2.0 * sigma));
          },
          [z](const FreePoisson& f) {
            const auto [a, b] = free_poisson_edges(f.rate);
            return 2.0 / (z + 1.0 - f.rate + paired_root(z, a, b));
          },
          [z](const CompoundFreePoisson& c) { return cfp_cauchy(c, z); },
          [z](const Bernoulli& b) { return (1.0 - b.t) / z + b.t / (z - 1.0); },
          [z](const Arcsine& a) { return 1.0 / paired_root(z, a.lower, a.upper); },
          [z](const Atomic& a) {
            cplx out = 0.0;
            for (const auto& at : a.atoms) out += at.mass / (z - at.location);
            return out;
          },
          [z](const Numeric& n) { return numeric_cauchy(n.curve, z); },
      },
      mu);
}

cplx cauchy_derivative(const SpectralMeasure& mu, cplx z) {
  if (z.imag() == 0.0 || !finite(z)) throw InvalidInput("cauchy: argument must be off the real axis");
  if (z.imag() < 0.0) return std::conj(cauchy_derivative(mu, std::conj(z)));
  return std::visit(
      overloaded{
          [z](const Semicircle& s) {
            const cplx w = z - s.mean;
            if (s.variance == 0.0) return -1.0 / (w * w);
            const double sigma = std::sqrt(s.variance);
            const cplx root = paired_root(w, -2.0 * sigma, 2.0 * sigma);
            return (1.0 - w / root) / (2.0 * s.variance);
          },
          [z](const FreePoisson& f) {
            const auto [a, b] = free_poisson_edges(f.rate);
            const cplx root = paired_root(z, a, b);
            const cplx den = z + 1.0 - f.rate + root;
            return -2.0 * (1.0 + (z - 0.5 * (a + b)) / root) / (den * den);
          },
          [z, &mu](const CompoundFreePoisson&) {
            const cplx g = cauchy(mu, z);
            return 1.0 / (-1.0 / (g * g) + r_transform_derivative(mu, g));
          },
          [z](const Bernoulli& b) { return -(1.0 - b.t) / (z * z) - b.t / ((z - 1.0) * (z - 1.0)); },
          [z](const Arcsine& a) {
            const cplx g = 1.0 / paired_root(z, a.lower, a.upper);
            return -0.5 * g * (1.0 / (z - a.lower) + 1.0 / (z - a.upper));
          },
          [z](const Atomic& a) {
            cplx out = 0.0;
            for (const auto& at : a.atoms) out -= at.mass / ((z - at.location) * (z - at.location));
            return out;
          },
          [z](const Numeric& n) { return numeric_cauchy_derivative(n.curve, z); },
      },
      mu);
}

SpectralMeasure dilate(const SpectralMeasure& mu, double s) {
  if (s == 0.0 || !std::isfinite(s)) throw InvalidInput("dilate: scale must be finite and nonzero");
  if (s == 1.0) return mu;
  return std::visit(
      overloaded{
          [s](const Semicircle& m) -> SpectralMeasure { return Semicircle{s * m.mean, s * s * m.variance}; },
          [s](const FreePoisson& f) -> SpectralMeasure { return CompoundFreePoisson{{{s, f.rate}}}; },
          [s](const CompoundFreePoisson& c) -> SpectralMeasure {
            CompoundFreePoisson out = c;
            for (auto& a : out.parameter) a.location *= s;
            return out;
          },
          [s](const Bernoulli& b) -> SpectralMeasure { return Atomic{{{0.0, 1.0 - b.t}, {s, b.t}}}; },
          [s](const Arcsine& a) -> SpectralMeasure {
            return Arcsine{std::min(s * a.lower, s * a.upper), std::max(s * a.lower, s * a.upper)};
          },
          [s](const Atomic& a) -> SpectralMeasure {
            Atomic out = a;
            for (auto& at : out.atoms) at.location *= s;
            return out;
          },
          [s](const Numeric& n) -> SpectralMeasure {
            Numeric out;
            const std::size_t len = n.curve.grid.size();
            out.curve.grid.resize(len);
            out.curve.density.resize(len);
            for (std::size_t i = 0; i < len; ++i) {
              const std::size_t j = s > 0 ? i : len - 1 - i;
              out.curve.grid[i] = s * n.curve.grid[j];
              out.curve.density[i] = n.curve.density[j] / std::abs(s);
            }
            for (const auto& at : n.curve.atoms) out.curve.atoms.push_back({s * at.location, at.mass});
            return out;
          },
      },
      mu);
}

std::pair<double, double> support_bounds(const SpectralMeasure& mu) {
  return std::visit(
      overloaded{
          [](const Semicircle& s) {
            const double w = 2.0 * std::sqrt(s.variance);
            return std::pair{s.mean - w, s.mean + w};
          },
          [](const FreePoisson& f) {
            const auto [a, b] = free_poisson_edges(f.rate);
            return std::pair{f.rate < 1.0 ? 0.0 : a, b};
          },
          [](const CompoundFreePoisson& c) {
            double lo = 0.0, hi = 0.0;
            for (const auto& at : c.parameter) {
              const auto [a, b] = free_poisson_edges(at.mass);
              const double l = at.mass < 1.0 ? 0.0 : a;
              lo += std::min(at.location * l, at.location * b);
              hi += std::max(at.location * l, at.location * b);
            }
            return std::pair{lo, hi};
          },
          [](const Bernoulli&) { return std::pair{0.0, 1.0}; },
          [](const Arcsine& a) { return std::pair{a.lower, a.upper}; },
          [](const Atomic& a) {
            double lo = a.atoms.front().location, hi = lo;
            for (const auto& at : a.atoms) {
              lo = std::min(lo, at.location);
              hi = std::max(hi, at.location);
            }
            return std::pair{lo, hi};
          },
          [](const Numeric& n) {
            double lo = n.curve.grid.front(), hi = n.curve.grid.back();
            for (const auto& at : n.curve.atoms) {
              lo = std::min(lo, at.location);
              hi = std::max(hi, at.location);
            }
            return std::pair{lo, hi};
          },
      },
      mu);
}

std::vector<Atom> atoms_of(const SpectralMeasure& mu) {
  return std::visit(overloaded{
                        [](const Semicircle& s) {
                          return s.variance == 0.0 ? std::vector<Atom>{{s.mean, 1.0}} : std::vector<Atom>{};
                        },
                        [](const FreePoisson& f) {
                          return f.rate < 1.0 ? std::vector<Atom>{{0.0, 1.0 - f.rate}} : std::vector<Atom>{};
                        },
                        [](const CompoundFreePoisson& c) {
                          double total = 0.0;
                          for (const auto& a : c.parameter) total += a.mass;
                          return total < 1.0 ? std::vector<Atom>{{0.0, 1.0 - total}} : std::vector<Atom>{};
                        },
                        [](const Bernoulli& b) { return std::vector<Atom>{{0.0, 1.0 - b.t}, {1.0, b.t}}; },
                        [](const Arcsine&) { return std::vector<Atom>{}; },
                        [](const Atomic& a) { return a.atoms; },
                        [](const Numeric& n) { return n.curve.atoms; },
                    },
                    mu);
}

DensityCurve sample_curve(const SpectralMeasure& mu, const std::vector<double>& grid, double eps) {
  check_grid(grid, "sample_curve");
  DensityCurve out;
  out.grid = grid;
  out.density.assign(grid.size(), 0.0);
  if (const auto* s = std::get_if<Semicircle>(&mu)) {
    if (s->variance == 0.0) {
      out.atoms = {{s->mean, 1.0}};
    } else {
      const auto [lo, hi] = support_bounds(mu);
      out.density = cell_averages([&](double x) { return semicircle_density(*s, x); }, grid, {lo, hi});
    }
  } else if (const auto* f = std::get_if<FreePoisson>(&mu)) {
    const auto [a, b] = free_poisson_edges(f->rate);
    out.density = cell_averages([&](double x) { return free_poisson_density(*f, x); }, grid, {0.0, a, b});
    out.atoms = atoms_of(mu);
  } else if (const auto* c = std::get_if<CompoundFreePoisson>(&mu); c && c->parameter.size() == 1) {
    // A single jump size s gives the dilated free Poisson law D_s pi_rate.
    const double s = c->parameter.front().location;
    const FreePoisson f{c->parameter.front().mass};
    const auto [a, b] = free_poisson_edges(f.rate);
    out.density = cell_averages([&](double x) { return free_poisson_density(f, x / s) / std::abs(s); }, grid,
                                {0.0, std::min(s * a, s * b), std::max(s * a, s * b)});
    out.atoms = atoms_of(mu);
  } else if (const auto* a = std::get_if<Arcsine>(&mu)) {
    out.density = cell_averages([&](double x) { return arcsine_density(*a, x); }, grid, {a->lower, a->upper});
  } else if (std::holds_alternative<Bernoulli>(mu) || std::holds_alternative<Atomic>(mu)) {
    for (const auto& at : atoms_of(mu))
      if (at.mass > 0.0) out.atoms.push_back(at);
  } else if (const auto* n = std::get_if<Numeric>(&mu)) {
    for (std::size_t i = 0; i < grid.size(); ++i) out.density[i] = curve_density_at(n->curve, grid[i]);
    out.atoms = n->curve.atoms;
  } else {
    CauchySamples samples{eps, {}};
    samples.values.reserve(grid.size());
    for (double x : grid) samples.values.push_back(cauchy(mu, cplx(x, eps)));
    InversionOptions opt;
    for (const auto& at : atoms_of(mu)) opt.atoms_hint.push_back(at.location);
    return stieltjes_invert(grid, {samples}, opt);
  }
  out.density.front() = 0.0;
  out.density.back() = 0.0;
  return out;
}

std::vector<Atom> quadrature_nodes(const SpectralMeasure& mu, int points) {
  if (points < 2) throw InvalidInput("quadrature_nodes: need at least 2 points");
  validate(mu);
  std::vector<Atom> out;
  // x = lo + (hi - lo)(1 - cos t)/2 with Gauss-Legendre in t on [0, pi].
  auto angular = [&](const auto& density, double lo, double hi) {
    for (const auto& [node, weight] : gauss_legendre(points)) {
      const double t = 0.5 * kPi * (node + 1.0);
      const double x = lo + 0.5 * (hi - lo) * (1.0 - std::cos(t));
      const double w = weight * 0.5 * kPi * density(x) * 0.5 * (hi - lo) * std::sin(t);
      if (w > 0.0) out.push_back({x, w});
    }
  };
  auto tabulated = [&](const DensityCurve& c) {
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
      const double left = i > 0 ? c.grid[i] - c.grid[i - 1] : 0.0;
      const double right = i + 1 < c.grid.size() ? c.grid[i + 1] - c.grid[i] : 0.0;
      const double w = 0.5 * (left + right) * c.density[i];
      if (w > 0.0) out.push_back({c.grid[i], w});
    }
  };
  if (const auto* s = std::get_if<Semicircle>(&mu)) {
    if (s->variance > 0.0) {
      const auto [lo, hi] = support_bounds(mu);
      angular([&](double x) { return semicircle_density(*s, x); }, lo, hi);
    }
  } else if (const auto* f = std::get_if<FreePoisson>(&mu)) {
    const auto [a, b] = free_poisson_edges(f->rate);
    angular([&](double x) { return free_poisson_density(*f, x); }, a, b);
  } else if (const auto* a = std::get_if<Arcsine>(&mu)) {
    angular([&](double x) { return arcsine_density(*a, x); }, a->lower, a->upper);
  } else if (const auto* n = std::get_if<Numeric>(&mu)) {
    tabulated(n->curve);
  } else if (std::holds_alternative<CompoundFreePoisson>(mu)) {
    const auto [lo, hi] = support_bounds(mu);
    const double pad = 0.05 * (hi - lo) + 1e-2;
    auto c = sample_curve(mu, uniform_grid(lo - pad, hi + pad, std::max(points, 401), 0.0));
    tabulated(c);
    out.insert(out.end(), c.atoms.begin(), c.atoms.end());
    return out;
  }
  for (const auto& at : atoms_of(mu))
    if (at.mass > 0.0) out.push_back(at);
  return out;
}

cplx solve_cauchy_equation(const std::function<cplx(cplx)>& r, const std::function<cplx(cplx)>& dr,
                           cplx z, double far, cplx* warm, ScalarSolveStats* stats) {
  if (!(z.imag() > 0.0) || !finite(z)) throw InvalidInput("solve_cauchy_equation: need Im z > 0");
  ScalarSolveStats local;
  auto residual = [&](cplx g, cplx zz) { return std::abs(g * (zz - r(g)) - 1.0); };

  auto newton = [&](cplx zz, cplx& g) {
    for (int it = 0; it < 60; ++it) {
      ++local.iterations;
      const cplx f = 1.0 / g + r(g) - zz;
      const cplx fp = -1.0 / (g * g) + dr(g);
      if (!finite(f) || !finite(fp) || fp == 0.0) return false;
      cplx step = f / fp;
      cplx next = g - step;
      for (int h = 0; h < 40 && !(next.imag() < 0.0 && finite(next)); ++h) {
        step *= 0.5;
        next = g - step;
      }
      if (!(next.imag() < 0.0) || !finite(next)) return false;
      const bool done = std::abs(next - g) <= 1e-14 * (1.0 + std::abs(next));
      g = next;
      if (done) return residual(g, zz) < 1e-9;
    }
    return residual(g, zz) < 1e-12;
  };

  auto fixed_point = [&](cplx zz, cplx& g) {
    local.fixed_point = true;
    for (int it = 0; it < 5000; ++it) {
      ++local.iterations;
      const cplx next = 0.5 * g + 0.5 / (zz - r(g));
      if (!finite(next)) return false;
      const bool done = std::abs(next - g) < 1e-12 * (1.0 + std::abs(next));
      g = next;
      if (done) return true;
    }
    return false;
  };

  auto finish = [&](cplx g) {
    local.residual = residual(g, z);
    if (stats) *stats = local;
    if (warm) *warm = g;
    return g;
  };

  if (warm && finite(*warm) && warm->imag() < 0.0) {
    cplx g = *warm;
    if (newton(z, g)) return finish(g);
  }

  const double x = z.real(), y = z.imag();
  double h = std::max(far, y);
  cplx g = 1.0 / (cplx(x, h) - r(0.0));
  while (true) {
    const cplx zz(x, h);
    cplx trial = g;
    if (!newton(zz, trial)) {
      trial = g;
      if (!fixed_point(zz, trial))
        throw ConvergenceError("solve_cauchy_equation: no convergence at z = (" + std::to_string(x) + ", " +
                                   std::to_string(h) + ")",
                               residual(trial, zz));
    }
    g = trial;
    if (h <= y) break;
    h = std::max(y, 0.5 * h);
  }
  return finish(g);
}

DensityCurve stieltjes_invert(const std::vector<double>& grid, std::vector<CauchySamples> levels,
                              const InversionOptions& options, double* raw_mass) {
  check_grid(grid, "stieltjes_invert");
  if (levels.empty()) throw InvalidInput("stieltjes_invert: no samples");
  const std::size_t n = grid.size();
  for (const auto& lv : levels) {
    if (lv.values.size() != n) throw InvalidInput("stieltjes_invert: sample count does not match grid");
    if (!(lv.eps > 0.0)) throw InvalidInput("stieltjes_invert: eps must be positive");
  }
  std::sort(levels.begin(), levels.end(), [](const auto& a, const auto& b) { return a.eps < b.eps; });
  if (options.richardson && levels.size() > 2) levels.resize(2);

  std::vector<std::vector<double>> rho(levels.size(), std::vector<double>(n));
  for (std::size_t l = 0; l < levels.size(); ++l)
    for (std::size_t i = 0; i < n; ++i) rho[l][i] = -levels[l].values[i].imag() / kPi;

  const double eps0 = levels[0].eps;
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = -eps0 * levels[0].values[i].imag();

  // (index, strong): strong candidates exceed the threshold on their own,
  // hinted ones are kept only when the Lorentzian fit succeeds.
  std::vector<std::pair<std::size_t, bool>> candidates;
  for (std::size_t i = 1; i + 1 < n; ++i)
    if (a[i] > options.atom_threshold && a[i] >= a[i - 1] && a[i] >= a[i + 1]) candidates.emplace_back(i, true);
  for (double hint : options.atoms_hint) {
    if (hint < grid.front() || hint > grid.back()) continue;
    std::size_t i = std::lower_bound(grid.begin(), grid.end(), hint) - grid.begin();
    if (i > 0 && (i == n || hint - grid[i - 1] < grid[i] - hint)) --i;
    while (i > 0 && i + 1 < n && a[i - 1] > a[i]) --i;
    while (i + 1 < n && a[i + 1] > a[i]) ++i;
    if (i > 0 && i + 1 < n && a[i] > options.min_atom_mass) candidates.emplace_back(i, false);
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const auto& x, const auto& y) { return x.first < y.first || (x.first == y.first && x.second); });
  candidates.erase(std::unique(candidates.begin(), candidates.end(),
                               [](const auto& x, const auto& y) { return x.first == y.first; }),
                   candidates.end());

  DensityCurve out;
  out.grid = grid;
  for (const auto& [i, strong] : candidates) {
    double x0 = grid[i], p = a[i];
    bool fitted = false;
    if (a[i - 1] > 0.0 && a[i + 1] > 0.0) {
      // 1/a is quadratic in x for a pure Lorentzian peak.
      const double xa = grid[i - 1], xb = grid[i], xc = grid[i + 1];
      const double qa = 1.0 / a[i - 1], qb = 1.0 / a[i], qc = 1.0 / a[i + 1];
      const double d1 = (qb - qa) / (xb - xa), d2 = (qc - qb) / (xc - xb);
      const double curv = (d2 - d1) / (xc - xa);
      if (curv > 0.0) {
        const double lin = d1 - curv * (xa + xb);
        const double xf = -lin / (2.0 * curv);
        const double pf = 1.0 / (curv * eps0 * eps0);
        if (xf >= xa && xf <= xc && pf > 0.5 * a[i] && pf <= 1.05) {
          x0 = xf;
          p = pf;
          fitted = true;
        }
      }
    }
    if (!strong) {
      if (!fitted) continue;
      // A point mass decays like a Lorentzian two nodes away; singular
      // density edges do not.
      bool lorentzian = true;
      for (long k : {-2L, 2L}) {
        const long j = static_cast<long>(i) + k;
        if (j < 0 || j >= static_cast<long>(n)) continue;
        const double d = grid[j] - x0;
        const double predicted = p * eps0 * eps0 / (d * d + eps0 * eps0);
        if (a[j] > 1.5 * predicted + 0.1 * a[i]) lorentzian = false;
      }
      if (!lorentzian) continue;
    }
    if (p < options.min_atom_mass) continue;
    out.atoms.push_back({x0, p});
    for (std::size_t l = 0; l < levels.size(); ++l) {
      const double e = levels[l].eps;
      for (std::size_t j = 0; j < n; ++j) {
        const double d = grid[j] - x0;
        rho[l][j] -= p * e / (kPi * (d * d + e * e));
      }
    }
  }

  if (options.richardson && levels.size() >= 2) {
    const double e1 = levels[0].eps, e2 = levels[1].eps;
    out.density.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.density[i] = (e2 * rho[0][i] - e1 * rho[1][i]) / (e2 - e1);
  } else {
    out.density = rho[0];
  }
  for (double& d : out.density) d = std::max(0.0, d);
  out.density.front() = 0.0;
  out.density.back() = 0.0;

  const double mass = curve_mass(out);
  if (raw_mass) *raw_mass = mass;
  if (std::abs(mass - 1.0) > options.mass_tolerance) {
    std::ostringstream msg;
    msg << "stieltjes_invert: recovered mass " << mass << " deviates from 1 by more than "
        << options.mass_tolerance << "; use a wider or finer grid";
    throw AccuracyError(msg.str());
  }
  normalize(out);
  return out;
}

double curve_mass(const DensityCurve& c) {
  double s = trapz(c.grid, c.density);
  for (const auto& a : c.atoms) s += a.mass;
  return s;
}

double curve_moment(const DensityCurve& c, int k) { return numeric_trapz_moment(c, k); }

void normalize(DensityCurve& c) {
  const double mass = curve_mass(c);
  if (!(mass > 0.0)) throw AccuracyError("normalize: curve has no mass");
  for (double& d : c.density) d /= mass;
  for (auto& a : c.atoms) a.mass /= mass;
}

CurveCdf::CurveCdf(const DensityCurve& c) : grid_(c.grid), density_(c.density), atoms_(c.atoms) {
  cumulative_.assign(grid_.size(), 0.0);
  for (std::size_t i = 1; i < grid_.size(); ++i)
    cumulative_[i] = cumulative_[i - 1] + 0.5 * (grid_[i] - grid_[i - 1]) * (density_[i] + density_[i - 1]);
  std::sort(atoms_.begin(), atoms_.end(), [](const Atom& a, const Atom& b) { return a.location < b.location; });
  atom_cumulative_.assign(atoms_.size() + 1, 0.0);
  for (std::size_t i = 0; i < atoms_.size(); ++i) atom_cumulative_[i + 1] = atom_cumulative_[i] + atoms_[i].mass;
}

double CurveCdf::continuous(double x) const {
  if (grid_.empty() || x <= grid_.front()) return 0.0;
  if (x >= grid_.back()) return cumulative_.back();
  const std::size_t i = std::upper_bound(grid_.begin(), grid_.end(), x) - grid_.begin() - 1;
  const double t = x - grid_[i];
  const double rx = density_[i] + (density_[i + 1] - density_[i]) * t / (grid_[i + 1] - grid_[i]);
  return cumulative_[i] + 0.5 * t * (density_[i] + rx);
}

double CurveCdf::operator()(double x) const {
  const std::size_t k =
      std::upper_bound(atoms_.begin(), atoms_.end(), x, [](double v, const Atom& a) { return v < a.location; }) -
      atoms_.begin();
  return continuous(x) + atom_cumulative_[k];
}

double CurveCdf::left_limit(double x) const {
  const std::size_t k =
      std::lower_bound(atoms_.begin(), atoms_.end(), x, [](const Atom& a, double v) { return a.location < v; }) -
      atoms_.begin();
  return continuous(x) + atom_cumulative_[k];
}

double curve_cdf(const DensityCurve& c, double x) { return CurveCdf(c)(x); }

double curve_density_at(const DensityCurve& c, double x) {
  if (c.grid.empty() || x < c.grid.front() || x > c.grid.back()) return 0.0;
  if (x == c.grid.back()) return c.density.back();
  const std::size_t i = std::upper_bound(c.grid.begin(), c.grid.end(), x) - c.grid.begin() - 1;
  const double t = (x - c.grid[i]) / (c.grid[i + 1] - c.grid[i]);
  return (1.0 - t) * c.density[i] + t * c.density[i + 1];
}

namespace {

double median_spacing(const std::vector<double>& g) {
  if (g.size() < 2) return 0.0;
  std::vector<double> d(g.size() - 1);
  for (std::size_t i = 1; i < g.size(); ++i) d[i - 1] = g[i] - g[i - 1];
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  return d[d.size() / 2];
}

std::vector<double> merged_grid(const DensityCurve& a, const DensityCurve& b) {
  std::vector<double> out = a.grid;
  out.insert(out.end(), b.grid.begin(), b.grid.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

double density_l1(const DensityCurve& a, const DensityCurve& b) {
  const auto grid = merged_grid(a, b);
  std::vector<double> diff(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    diff[i] = std::abs(curve_density_at(a, grid[i]) - curve_density_at(b, grid[i]));
  double total = trapz(grid, diff);

  const double tol = 2.0 * std::max(median_spacing(a.grid), median_spacing(b.grid)) + 1e-12;
  std::vector<bool> used(b.atoms.size(), false);
  for (const auto& x : a.atoms) {
    std::size_t best = b.atoms.size();
    for (std::size_t j = 0; j < b.atoms.size(); ++j) {
      if (used[j] || std::abs(b.atoms[j].location - x.location) > tol) continue;
      if (best == b.atoms.size() ||
          std::abs(b.atoms[j].location - x.location) < std::abs(b.atoms[best].location - x.location))
        best = j;
    }
    if (best < b.atoms.size()) {
      used[best] = true;
      total += std::abs(x.mass - b.atoms[best].mass);
    } else {
      total += x.mass;
    }
  }
  for (std::size_t j = 0; j < b.atoms.size(); ++j)
    if (!used[j]) total += b.atoms[j].mass;
  return total;
}

double cdf_l1(const DensityCurve& a, const DensityCurve& b) {
  auto points = merged_grid(a, b);
  for (const auto& at : a.atoms) points.push_back(at.location);
  for (const auto& at : b.atoms) points.push_back(at.location);
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  const CurveCdf fa(a), fb(b);
  // Each point contributes its left limit and its value so jumps have zero width.
  double total = 0.0, prev_x = 0.0, prev_d = 0.0;
  bool first = true;
  for (double x : points) {
    const double dl = std::abs(fa.left_limit(x) - fb.left_limit(x));
    if (!first) total += 0.5 * (x - prev_x) * (prev_d + dl);
    prev_x = x;
    prev_d = std::abs(fa(x) - fb(x));
    first = false;
  }
  return total;
}

std::vector<double> uniform_grid(double lo, double hi, int points) {
  if (points < 3 || !(hi > lo)) throw InvalidInput("uniform_grid: need points >= 3 and hi > lo");
  std::vector<double> out(points);
  const double h = (hi - lo) / (points - 1);
  for (int i = 0; i < points; ++i) out[i] = lo + i * h;
  out.back() = hi;
  return out;
}

std::vector<double> uniform_grid(double lo, double hi, int points, double pin) {
  if (points < 3 || !(hi > lo)) throw InvalidInput("uniform_grid: need points >= 3 and hi > lo");
  if (pin > lo && pin < hi) {
    const double h = (hi - lo) / (points - 1);
    const double shift = pin - (lo + std::round((pin - lo) / h) * h);
    lo += shift;
    std::vector<double> out(points);
    for (int i = 0; i < points; ++i) out[i] = lo + i * h;
    out[static_cast<std::size_t>(std::round((pin - lo) / h))] = pin;
    return out;
  }
  return uniform_grid(lo, hi, points);
}

}  // namespace blockmod
