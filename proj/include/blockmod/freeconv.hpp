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

// Free additive convolution of dilated measures, classical mixtures and
// free compression.

#ifndef BLOCKMOD_FREECONV_HPP
#define BLOCKMOD_FREECONV_HPP

#include <utility>
#include <variant>
#include <vector>

#include "blockmod/measures.hpp"

namespace blockmod {

/// The term (D_scale mu)^{boxplus power}.
struct PlanTerm {
  SpectralMeasure measure;
  double scale = 1.0;
  /// Free convolution power, at least 1; need not be an integer.
  double power = 1.0;
};

struct GridSpec {
  /// Explicit range, used when auto_range is false.
  double xmin = -1.0;
  double xmax = 1.0;
  int points = 1001;
  /// Heights at which the Cauchy transform is sampled; inversion uses the
  /// smallest (and the next one when richardson is set).
  std::vector<double> eps_levels{1e-3, 2e-3};
  bool auto_range = true;
  /// Linear extrapolation of the density to eps = 0 from the two smallest heights.
  bool richardson = true;
  double mass_tolerance = 5e-3;
  std::vector<double> atoms_hint;
};

/// Free additive convolution of all terms.
struct ConvolutionPlan {
  std::vector<PlanTerm> terms;
  GridSpec grid;
};

struct ConvolutionTelemetry {
  int points = 0;
  int total_iterations = 0;
  int max_iterations = 0;
  int fixed_point_points = 0;
  int failed_points = 0;
  int expansions = 0;
  double max_residual = 0.0;
  double xmin = 0.0;
  double xmax = 0.0;
};

void validate(const ConvolutionPlan& plan);

/// sum over terms of power * scale * R_mu(scale * z).
cplx total_r_transform(const ConvolutionPlan& plan, cplx z);
cplx total_r_transform_derivative(const ConvolutionPlan& plan, cplx z);

/// Free cumulants kappa_1..kappa_k of the convolution.
std::vector<double> plan_cumulants(const ConvolutionPlan& plan, int k);

/// Minkowski sum of the dilated term supports; always contains the support.
std::pair<double, double> plan_support_bound(const ConvolutionPlan& plan);

/// mean +- 4 sigma intersected with plan_support_bound.
std::pair<double, double> estimate_support(const ConvolutionPlan& plan);

/// Cauchy transform of the convolution at Im z > 0, from the subordination
/// system G_j(omega_j) = G, sum_j p_j omega_j = z + (P - 1)/G, where G_j is
/// the Cauchy transform of D_{s_j} mu_j and P the total power.
cplx plan_cauchy(const ConvolutionPlan& plan, cplx z, ScalarSolveStats* stats = nullptr);

/// Density of the convolution on the plan's grid.
DensityCurve evaluate_convolution(const ConvolutionPlan& plan, ConvolutionTelemetry* telemetry = nullptr);

struct MixtureComponent {
  std::variant<DensityCurve, SpectralMeasure> part;
  double weight = 1.0;
};

/// Convex combination on a common grid; measure components are sampled
/// with sample_curve.
DensityCurve classical_mixture(const std::vector<MixtureComponent>& components, int points = 2001);

/// The measure with cumulants m^{1-k} kappa_k(mu).
SpectralMeasure free_compression(const SpectralMeasure& mu, int m, const GridSpec& grid = {});

}  // namespace blockmod

#endif  // BLOCKMOD_FREECONV_HPP
