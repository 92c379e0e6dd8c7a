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

// Operator-valued solver for square maps M_m -> M_m without the unitarity
// condition.
//
// The map is written as phi(X) = sum_s eps_s f_s X f_s^*, either with the
// N = m^2(m^2+1)/2 slots of factorize_map or with the rank(C) <= m^2 slots of
// the Choi eigendecomposition. With F the m x Nm block row [f_1 ... f_N] the modified matrix has
// the same nonzero spectrum as the product of x = F^*F (positive, in
// M_N (x) M_m) and y = Sigma (x) X (self-adjoint), which are free over
// B = M_N. The B-valued Cauchy transform of xy comes from the multiplicative
// subordination fixed point w <- b h_x(h_y(w) b).

#ifndef BLOCKMOD_OPVALUED_HPP
#define BLOCKMOD_OPVALUED_HPP

#include <array>
#include <optional>
#include <vector>

#include "blockmod/choi.hpp"
#include "blockmod/freeconv.hpp"

namespace blockmod {

struct SignedFactorization {
  int m = 0;
  int slots = 0;  // N
  std::vector<CMatrix> f;
  Eigen::VectorXd sign;
  /// Index pair (i, j, l, k) of the coefficient that produced each slot;
  /// diagonal slots have (i, j) == (l, k).
  std::vector<std::array<int, 4>> provenance;
  /// Diagonal coefficients after the off-diagonal pairs were split off.
  Eigen::MatrixXd beta;
};

/// Throws InvalidMap for non-square or non-self-adjoint coefficients.
SignedFactorization factorize_map(const CoefficientTensor& coeffs);

/// f_s = sqrt|lambda_s| mat(v_s), eps_s = sign(lambda_s) over the nonzero
/// eigenpairs of the Choi matrix. provenance and beta are left empty.
SignedFactorization spectral_factorization(const CoefficientTensor& coeffs);

/// sum_s eps_s f_s X f_s^*.
CMatrix reconstruct(const SignedFactorization& fact, const CMatrix& x);

/// The Nm x Nm matrix F^*F.
CMatrix positive_factor(const SignedFactorization& fact);

/// (id_N (x) tr_m / m)((b (x) I_m - F^*F - delta)^{-1}). The default uses the
/// Woodbury identity around (b - delta) (x) I_m, which only inverts N x N and
/// m x m matrices; `direct` inverts the full Nm x Nm resolvent.
CMatrix g_positive_factor(const CMatrix& b, const SignedFactorization& fact, double delta, bool direct = false);

/// int (b - t Sigma)^{-1} dmu(t) = G_mu(Sigma b) Sigma, evaluated through an
/// eigendecomposition of Sigma b.
CMatrix g_signed_variable(const CMatrix& b, const Eigen::VectorXd& sign, const SpectralMeasure& mu);

/// The same integral as a finite sum over quadrature_nodes(mu, quad_points).
CMatrix g_signed_variable(const CMatrix& b, const Eigen::VectorXd& sign, const std::vector<Atom>& nodes);

struct SubordinationOptions {
  double tol = 1e-10;
  int max_iter = 10000;
  /// Anderson mixing depth; 0 gives the plain (optionally damped) iteration.
  int anderson_depth = 5;
  /// Round-off limits the residual near atoms at large |b|. The best iterate
  /// is accepted when it is below stall_tol and stall_window further steps
  /// brought no improvement.
  double stall_tol = 1e-7;
  int stall_window = 50;
  /// Nodes for the quadrature variant of the y-transform; 0 selects the
  /// eigendecomposition route.
  int quad_points = 0;
};

struct SubordinationResult {
  CMatrix omega;  // omega_2(b)
  CMatrix eta;    // eta_{xy}(b) = eta_y(omega_2(b))
  int iterations = 0;
  double residual = 0.0;  // relative to max(1, |omega|)
  bool damped = false;
  bool stalled = false;
};

/// Iterates w <- b h_x(h_y(w) b) with h(w) = w^{-1} - G(w^{-1})^{-1} from
/// `warm` (default i I) until one step moves w by less than tol relative to
/// max(1, |w|). Three
/// consecutive residual increases switch to damping 0.5 and restart the
/// Anderson history.
/// Throws ConvergenceError after max_iter steps and DomainError when the
/// limit leaves the upper half plane.
SubordinationResult subordinate(const CMatrix& b, const SignedFactorization& fact, const SpectralMeasure& mu,
                                double delta, const SubordinationOptions& options = {},
                                const CMatrix* warm = nullptr);

enum class Factorization {
  Spectral,  // spectral_factorization
  Slots,     // factorize_map
};

struct OpvaluedOptions {
  GridSpec grid;
  Factorization factorization = Factorization::Spectral;
  double delta = 1e-9;
  SubordinationOptions subordination;
  /// Heights visited above the grid's eps levels before the first column.
  std::vector<double> continuation{1e-2, 5e-3};
  /// Combine the transforms at delta and delta / 10 as (10 G(delta / 10) -
  /// G(delta)) / 9, which cancels the first-order effect of the regularizer.
  /// The stability check then repeats the step one decade lower.
  bool extrapolate_delta = true;
  bool check_stability = true;
  double stability_tol = 1e-2;
};

struct OVGridResult {
  std::vector<double> eps;  // one entry per level
  std::vector<double> x;
  /// Scalar Cauchy transform of the modified law, per level and grid point.
  std::vector<std::vector<cplx>> g_phi;
  /// B-valued Cauchy transform (I - eta)^{-1} z^{-1} over the active slots at
  /// the smallest level.
  std::vector<CMatrix> g_y;
  std::vector<int> iterations;  // at the smallest level
  int max_iterations = 0;
  int total_iterations = 0;
  int damped_points = 0;
  int stalled_points = 0;
  int herglotz_violations = 0;
  double delta = 0.0;
  /// Slots with f_s != 0; only these enter the fixed point.
  int active_slots = 0;
};

/// Scalar transforms on a fixed grid; no inversion.
OVGridResult opvalued_cauchy_grid(const SignedFactorization& fact, const SpectralMeasure& mu,
                                  const std::vector<double>& x, const OpvaluedOptions& options);

/// Interval that provably contains the spectrum of the modified matrix:
/// c spec(phi(I)) +- r |sum_s f_s f_s^*| for mu inside [c - r, c + r], with f_s
/// from the Choi eigendecomposition.
std::pair<double, double> opvalued_support_bound(const LinearBlockMap& map, const SpectralMeasure& mu);

struct OpvaluedResult {
  DensityCurve curve;
  double delta = 0.0;
  /// L1 distance between the curves at delta and delta / 10, when checked.
  std::optional<double> stability_l1;
  /// Mass of the curve after the atom correction, before renormalization.
  double raw_mass = 0.0;
  OVGridResult telemetry;
};

/// Density of the modified law; m must equal n. Throws AccuracyError when the
/// rerun one decade lower in delta moves the curve by more than stability_tol
/// in L1.
OpvaluedResult modified_density_numeric(const LinearBlockMap& map, const SpectralMeasure& mu,
                                        const OpvaluedOptions& options = {});

}  // namespace blockmod

#endif  // BLOCKMOD_OPVALUED_HPP
