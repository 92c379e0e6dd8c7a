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

// Hermiticity-preserving linear maps M_m -> M_n and their Choi matrices.
//
// Coefficient convention: phi(X) = sum c(i,j,k,l) E_ij X E_kl, so that the
// (i, l) entry of phi(X) is sum_jk c(i,j,k,l) X(j,k). Indices i, l run over
// the output dimension n and j, k over the input dimension m. The Choi
// matrix C = sum_jk phi(E_jk) (x) E_jk lives in M_n (x) M_m and satisfies
// C[(i,j), (l,k)] = c(i,j,k,l) with row index i*m + j.

#ifndef BLOCKMOD_CHOI_HPP
#define BLOCKMOD_CHOI_HPP

#include <string>
#include <variant>
#include <vector>

#include "blockmod/matrixcore.hpp"

namespace blockmod {

class CoefficientTensor {
 public:
  CoefficientTensor() = default;
  CoefficientTensor(int n, int m) : n_(n), m_(m), data_(static_cast<std::size_t>(n * m * m * n), cplx(0.0)) {}

  int n() const { return n_; }
  int m() const { return m_; }

  cplx& operator()(int i, int j, int k, int l) { return data_[index(i, j, k, l)]; }
  const cplx& operator()(int i, int j, int k, int l) const { return data_[index(i, j, k, l)]; }

 private:
  std::size_t index(int i, int j, int k, int l) const {
    return ((static_cast<std::size_t>(i) * m_ + j) * m_ + k) * n_ + l;
  }
  int n_ = 0;
  int m_ = 0;
  std::vector<cplx> data_;
};

// Map kinds. Dimensions live in LinearBlockMap.
struct Transpose {};
/// X -> Tr(X) I - X.
struct Reduction {};
/// X -> Tr(A^T X), a map M_m -> M_1.
struct TraceForm {
  CMatrix a;
};
/// z -> x z I_n, a map M_1 -> M_n.
struct Replicate {
  double x = 1.0;
};
/// X -> U X U*.
struct UnitaryConj {
  CMatrix u;
};
/// X -> alpha X + beta Tr(X) I + gamma X^T.
struct Generalized {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};
/// X -> sum_i coeffs[i] U_i X U_i* with Tr(U_i U_j*) = n delta_ij.
struct WeylMixture {
  std::vector<double> coeffs;
  std::vector<CMatrix> unitaries;
};
/// X -> sum_ij alpha(i,j) E_ij X E_ji with alpha an n x m real matrix; the
/// output is diagonal with entries sum_j alpha(i,j) X(j,j).
struct DiagonalSchur {
  Eigen::MatrixXd alpha;
};
struct Generic {
  CoefficientTensor coeffs;
};

using MapKind =
    std::variant<Transpose, Reduction, TraceForm, Replicate, UnitaryConj, Generalized, WeylMixture, DiagonalSchur, Generic>;

struct LinearBlockMap {
  int m = 0;  // input dimension
  int n = 0;  // output dimension
  MapKind kind;
};

LinearBlockMap transpose_map(int n);
LinearBlockMap reduction_map(int n);
LinearBlockMap trace_form_map(const CMatrix& a);
LinearBlockMap replicate_map(int n, double x);
LinearBlockMap unitary_conj_map(const CMatrix& u);
LinearBlockMap generalized_map(int n, double alpha, double beta, double gamma);
LinearBlockMap weyl_mixture_map(const std::vector<double>& coeffs, const std::vector<CMatrix>& unitaries);
LinearBlockMap diagonal_schur_map(const Eigen::MatrixXd& alpha);
LinearBlockMap generic_map(const CoefficientTensor& coeffs);

/// The n^2 operators S^a D^b, with S the cyclic shift and D the diagonal of
/// n-th roots of unity, ordered by (a, b).
std::vector<CMatrix> weyl_operators(int n);

std::string kind_name(const LinearBlockMap& map);

/// Throws InvalidMap when dimensions or kind invariants are violated.
void validate(const LinearBlockMap& map);

/// phi(X) evaluated from the kind's defining formula.
CMatrix apply_map(const LinearBlockMap& map, const CMatrix& x);

/// n^2 x m^2 matrix T with vec(phi(X)) = T vec(X), vec row-major.
CMatrix transfer_matrix(const LinearBlockMap& map);

/// Choi matrix from the kind's closed form.
CMatrix build_choi(const LinearBlockMap& map);

CoefficientTensor coeffs_from_choi(const CMatrix& c, int m, int n);
CMatrix choi_from_coeffs(const CoefficientTensor& coeffs);
CoefficientTensor coefficients(const LinearBlockMap& map);

struct ChoiGroup {
  double rho = 0.0;
  CMatrix projector;
  int rank = 0;
  double d = 0.0;  // rank / n
  bool uc_ok = false;
  double uc_deviation = 0.0;
};

struct ChoiAnalysis {
  CMatrix choi;
  int m = 0;
  int n = 0;
  Eigen::VectorXd eigenvalues;  // descending, with multiplicity
  CMatrix eigenvectors;         // matching columns
  std::vector<ChoiGroup> groups;
  int kernel_rank = 0;
  bool uc = false;
  double group_tol = 1e-8;
  std::vector<std::string> warnings;
};

/// Groups the non-zero Choi eigenvalues that agree within
/// group_tol * max(1, ||C||) and runs the unitarity check on each group.
ChoiAnalysis spectral_analysis(const CMatrix& c, int m, int n, double group_tol = 1e-8);
ChoiAnalysis spectral_analysis(const LinearBlockMap& map, double group_tol = 1e-8);

struct UcReport {
  std::vector<bool> per_group;
  std::vector<double> deviation;
  bool global = false;
};

/// A group passes when tracing the input factor out of its projector gives
/// (rank / n) I_n within 1e-8.
UcReport check_uc(const ChoiAnalysis& analysis);

/// Choi matrix of the adjoint map M_n -> M_m.
CMatrix dual_choi(const CMatrix& c, int m, int n);

/// The n x m matrix W with W(i, j) = v(i*m + j).
CMatrix matricize(const CVector& v, int n, int m);

/// Embeds the matricized eigenvectors with non-zero eigenvalue into the
/// lower-left corner of M_{m+n} and returns the largest deviation of
/// Tr(w_s w_t*)/(m+n) from delta_st/(m+n).
double covariance_check(const ChoiAnalysis& analysis);

}  // namespace blockmod

#endif  // BLOCKMOD_CHOI_HPP
