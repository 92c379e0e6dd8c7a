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

// Limiting spectrum of block-modified unitarily invariant matrices for maps
// whose Choi matrix satisfies the unitarity condition. With Choi eigenvalues
// rho_t of multiplicity r_t the R-transform of the modified law is
//
//   R(z) = sum_t (r_t / n) rho_t R_mu(rho_t z / m),
//
// i.e. the free convolution of the terms (D_{rho_t / m} mu)^{boxplus r_t m / n}.
// For square maps this is (D_{rho_t / n} mu)^{boxplus r_t}.

#ifndef BLOCKMOD_ANALYTIC_HPP
#define BLOCKMOD_ANALYTIC_HPP

#include <optional>
#include <string>
#include <vector>

#include "blockmod/choi.hpp"
#include "blockmod/freeconv.hpp"

namespace blockmod {

struct ModifiedSpec {
  SpectralMeasure input;
  ChoiAnalysis analysis;
  ConvolutionPlan plan;
};

/// Throws UnsupportedConfiguration when the analysis fails the unitarity check.
ModifiedSpec make_modified_spec(const SpectralMeasure& mu, const ChoiAnalysis& analysis, const GridSpec& grid = {});

struct ModifiedResult {
  DensityCurve curve;
  /// Set when the modified law is again in a closed-form family.
  std::optional<SpectralMeasure> closed_form;
  /// "semicircle", "compound_free_poisson", "dilation" or "numeric".
  std::string route;
  ConvolutionTelemetry telemetry;
};

ModifiedResult modified_measure_uc(const SpectralMeasure& mu, const ChoiAnalysis& analysis, const GridSpec& grid = {});

/// Free cumulants kappa_1..kappa_k of the modified law.
std::vector<double> modified_cumulants(const SpectralMeasure& mu, const ChoiAnalysis& analysis, int k);

/// Semicircle(a Tr C / n, sigma2 Tr C^2 / (n m)).
Semicircle gue_modified(double a, double sigma2, const ChoiAnalysis& analysis);

/// Compound free Poisson law with parameter sum_t (r_t m / n) D_{rho_t / m}[nu].
CompoundFreePoisson cfp_modified(const std::vector<Atom>& nu, const ChoiAnalysis& analysis);

/// Maps X -> diag(sum_j alpha(i,j) X(j,j)). The modified law is the equal
/// mixture over rows i of the free convolutions of (D_{alpha(i,j)/m} mu)^{boxplus m};
/// zero rows contribute delta_0.
DensityCurve diagonal_map_modified(const SpectralMeasure& mu, const Eigen::MatrixXd& alpha, const GridSpec& grid = {},
                                   int mixture_points = 2001);

/// Free cumulants of diagonal_map_modified's law, via the row moments.
std::vector<double> diagonal_map_cumulants(const SpectralMeasure& mu, const Eigen::MatrixXd& alpha, int k);

/// Convolution plan for a named map, written from the map's own parameters
/// (flip multiplicities, Weyl coefficients, eigenvalues of A) rather than from
/// a Choi eigendecomposition. Generic and diagonal_schur maps are unsupported.
ConvolutionPlan catalog_plan(const LinearBlockMap& map, const SpectralMeasure& mu, const GridSpec& grid = {});

DensityCurve catalog_modified(const LinearBlockMap& map, const SpectralMeasure& mu, const GridSpec& grid = {},
                              ConvolutionTelemetry* telemetry = nullptr);

}  // namespace blockmod

#endif  // BLOCKMOD_ANALYTIC_HPP
