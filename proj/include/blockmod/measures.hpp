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

// Probability measures on the real line and the scalar transforms attached
// to them: moments, free cumulants, Cauchy and R-transforms, dilation and
// Stieltjes inversion.

#ifndef BLOCKMOD_MEASURES_HPP
#define BLOCKMOD_MEASURES_HPP

#include <complex>
#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "blockmod/errors.hpp"

namespace blockmod {

using cplx = std::complex<double>;

struct Atom {
  double location = 0.0;
  double mass = 0.0;
};

/// Sampled density on a uniform or non-uniform grid plus point masses.
struct DensityCurve {
  std::vector<double> grid;
  std::vector<double> density;
  std::vector<Atom> atoms;
};

struct Semicircle {
  double mean = 0.0;
  double variance = 1.0;
};

/// Marchenko-Pastur law with rate lambda.
struct FreePoisson {
  double rate = 1.0;
};

/// Compound free Poisson law. `parameter` is the (atomic, not necessarily
/// normalized) parameter measure; each Atom is (location t_i, weight w_i).
struct CompoundFreePoisson {
  std::vector<Atom> parameter;
};

/// (1 - t) delta_0 + t delta_1.
struct Bernoulli {
  double t = 0.5;
};

/// Arcsine law on [lower, upper].
struct Arcsine {
  double lower = -2.0;
  double upper = 2.0;
};

struct Atomic {
  std::vector<Atom> atoms;
};

struct Numeric {
  DensityCurve curve;
};

using SpectralMeasure =
    std::variant<Semicircle, FreePoisson, CompoundFreePoisson, Bernoulli, Arcsine, Atomic, Numeric>;

/// Throws InvalidInput when parameters are out of range or masses do not sum to one.
void validate(const SpectralMeasure& mu);

std::string kind_name(const SpectralMeasure& mu);

/// True for every variant except Numeric.
bool is_closed_form(const SpectralMeasure& mu);

double moment(const SpectralMeasure& mu, int k);
double mean(const SpectralMeasure& mu);
double variance(const SpectralMeasure& mu);

/// Free cumulants kappa_1..kappa_k, computed from the family's closed form
/// where one exists and from moments otherwise.
std::vector<double> cumulants_of(const SpectralMeasure& mu, int k);

/// R-transform R(z) = sum_k kappa_k z^{k-1}.
///
/// Radius of validity: unrestricted for Semicircle; |z| < 1/max|t_i| for
/// (Compound)FreePoisson; |z| < 1 for Bernoulli; |z| < 2/(b - a) for
/// Arcsine. The closed forms are also the analytic continuations used on
/// the lower half plane by the convolution solver.
cplx r_transform(const SpectralMeasure& mu, cplx z);
cplx r_transform_derivative(const SpectralMeasure& mu, cplx z);

/// G(z) = int (z - t)^{-1} dmu(t). Values at Im z < 0 follow by G(conj z) =
/// conj G(z); real z is rejected.
cplx cauchy(const SpectralMeasure& mu, cplx z);
cplx cauchy_derivative(const SpectralMeasure& mu, cplx z);

/// Pushforward under x -> s x.
SpectralMeasure dilate(const SpectralMeasure& mu, double s);

/// An interval containing the support (exact for the closed-form families
/// except CompoundFreePoisson, where it is a Minkowski-sum bound).
std::pair<double, double> support_bounds(const SpectralMeasure& mu);

/// Point masses of the measure, if any are known in closed form.
std::vector<Atom> atoms_of(const SpectralMeasure& mu);

/// Tabulates mu on `grid`. Families with an explicit density are sampled
/// exactly; CompoundFreePoisson goes through its Cauchy transform at height
/// `eps` and Stieltjes inversion.
DensityCurve sample_curve(const SpectralMeasure& mu, const std::vector<double>& grid,
                          double eps = 1e-3);

/// Discrete approximation of mu. Explicit densities use `points`
/// Gauss-Legendre nodes in the angle variable of their support interval,
/// tabulated densities use trapezoid weights; atoms are kept exactly.
std::vector<Atom> quadrature_nodes(const SpectralMeasure& mu, int points);

// Moment-cumulant machinery.

/// Moments m_1..m_k from free cumulants by enumerating non-crossing partitions.
std::vector<double> nc_moments(const std::vector<double>& cumulants);

/// Free cumulants from moments by the functional recursion M(z) = 1 + sum kappa_s z^s M(z)^s.
std::vector<double> free_cumulants(const std::vector<double>& moments);

/// Moments from free cumulants by the same recursion; used where k is too
/// large for enumeration.
std::vector<double> moments_from_cumulants(const std::vector<double>& cumulants);

/// All non-crossing partitions of {0..n-1}, each as a block label per element.
std::vector<std::vector<int>> noncrossing_partitions(int n);

// Scalar Cauchy equation solver shared with the convolution engine.

struct ScalarSolveStats {
  int iterations = 0;
  bool fixed_point = false;
  double residual = 0.0;
};

/// Solves 1/G + R(G) = z for G in the lower half plane by Newton continuation
/// from height `far` down to Im z, falling back to damped fixed-point
/// iteration G <- (G + 1/(z - R(G)))/2.
cplx solve_cauchy_equation(const std::function<cplx(cplx)>& r, const std::function<cplx(cplx)>& dr,
                           cplx z, double far, cplx* warm = nullptr,
                           ScalarSolveStats* stats = nullptr);

// Stieltjes inversion.

/// Cauchy transform samples at z = grid[i] + i*eps.
struct CauchySamples {
  double eps = 1e-3;
  std::vector<cplx> values;
};

struct InversionOptions {
  bool richardson = false;
  double atom_threshold = 0.1;
  double mass_tolerance = 5e-3;
  std::vector<double> atoms_hint;
  /// Atoms with smaller mass than this are folded back into the density.
  double min_atom_mass = 1e-3;
};

/// density(x) = -Im G(x + i eps) / pi with atom extraction, optional
/// Richardson extrapolation over two heights and mass renormalization.
/// Throws AccuracyError when the mass misses 1 by more than the tolerance;
/// the mass before renormalization is stored in `raw_mass` when given.
DensityCurve stieltjes_invert(const std::vector<double>& grid, std::vector<CauchySamples> levels,
                              const InversionOptions& options = {}, double* raw_mass = nullptr);

// Curve utilities.

double curve_mass(const DensityCurve& c);
double curve_moment(const DensityCurve& c, int k);
/// CDF at x: trapezoid integral of the density up to x plus atoms at or below x.
double curve_cdf(const DensityCurve& c, double x);

/// Precomputed CDF of a curve for repeated evaluation.
class CurveCdf {
 public:
  explicit CurveCdf(const DensityCurve& c);
  /// F(x), atoms at x included.
  double operator()(double x) const;
  /// F(x-), atoms at x excluded.
  double left_limit(double x) const;

 private:
  double continuous(double x) const;
  std::vector<double> grid_;
  std::vector<double> density_;
  std::vector<double> cumulative_;
  std::vector<Atom> atoms_;  // sorted by location
  std::vector<double> atom_cumulative_;
};

/// Linear interpolation of the density, zero outside the grid.
double curve_density_at(const DensityCurve& c, double x);
/// L1 distance of densities on the merged grid plus the atom mass mismatch.
double density_l1(const DensityCurve& a, const DensityCurve& b);
/// int |F_a - F_b| dx.
double cdf_l1(const DensityCurve& a, const DensityCurve& b);
/// Scales density and atoms so that the total mass is one.
void normalize(DensityCurve& c);

/// Uniform grid of `points` nodes on [lo, hi], shifted so that `pin` (when
/// inside the range) falls on a node.
std::vector<double> uniform_grid(double lo, double hi, int points);
std::vector<double> uniform_grid(double lo, double hi, int points, double pin);

}  // namespace blockmod

#endif  // BLOCKMOD_MEASURES_HPP
