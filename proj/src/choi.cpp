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

#include "blockmod/choi.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "internal.hpp"

namespace blockmod {

using internal::kPi;
using internal::overloaded;

namespace {

CMatrix flip(int n) {
  CMatrix f = CMatrix::Zero(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) f(j * n + i, i * n + j) = 1.0;
  return f;
}

// sum_i e_i (x) e_i, unnormalized.
CVector bell_vector(int n) {
  CVector omega = CVector::Zero(n * n);
  for (int i = 0; i < n; ++i) omega(i * n + i) = 1.0;
  return omega;
}

// Maps e_i (x) e_j in C^n (x) C^m to e_j (x) e_i in C^m (x) C^n.
CMatrix swap_operator(int n, int m) {
  CMatrix f = CMatrix::Zero(n * m, n * m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) f(j * n + i, i * m + j) = 1.0;
  return f;
}

CVector vectorize(const CMatrix& u) {
  CVector v(u.size());
  for (Eigen::Index i = 0; i < u.rows(); ++i)
    for (Eigen::Index j = 0; j < u.cols(); ++j) v(i * u.cols() + j) = u(i, j);
  return v;
}

bool is_unitary(const CMatrix& u, double tol) {
  return u.rows() == u.cols() && max_abs(u.adjoint() * u - CMatrix::Identity(u.rows(), u.cols())) <= tol;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidMap(what);
}

}  // namespace

LinearBlockMap transpose_map(int n) { return {n, n, Transpose{}}; }
LinearBlockMap reduction_map(int n) { return {n, n, Reduction{}}; }
LinearBlockMap trace_form_map(const CMatrix& a) { return {static_cast<int>(a.rows()), 1, TraceForm{a}}; }
LinearBlockMap replicate_map(int n, double x) { return {1, n, Replicate{x}}; }
LinearBlockMap unitary_conj_map(const CMatrix& u) {
  return {static_cast<int>(u.rows()), static_cast<int>(u.rows()), UnitaryConj{u}};
}
LinearBlockMap generalized_map(int n, double alpha, double beta, double gamma) {
  return {n, n, Generalized{alpha, beta, gamma}};
}
LinearBlockMap weyl_mixture_map(const std::vector<double>& coeffs, const std::vector<CMatrix>& unitaries) {
  const int n = unitaries.empty() ? 0 : static_cast<int>(unitaries.front().rows());
  return {n, n, WeylMixture{coeffs, unitaries}};
}
LinearBlockMap diagonal_schur_map(const Eigen::MatrixXd& alpha) {
  return {static_cast<int>(alpha.cols()), static_cast<int>(alpha.rows()), DiagonalSchur{alpha}};
}
LinearBlockMap generic_map(const CoefficientTensor& coeffs) { return {coeffs.m(), coeffs.n(), Generic{coeffs}}; }

std::vector<CMatrix> weyl_operators(int n) {
  if (n < 1) throw InvalidInput("weyl_operators: n must be positive");
  CMatrix shift = CMatrix::Zero(n, n), clock = CMatrix::Zero(n, n);
  for (int x = 0; x < n; ++x) {
    shift((x + 1) % n, x) = 1.0;
    clock(x, x) = std::polar(1.0, 2.0 * kPi * x / n);
  }
  std::vector<CMatrix> out;
  CMatrix sa = CMatrix::Identity(n, n);
  for (int a = 0; a < n; ++a) {
    CMatrix w = sa;
    for (int b = 0; b < n; ++b) {
      out.push_back(w);
      w = w * clock;
    }
    sa = shift * sa;
  }
  return out;
}

std::string kind_name(const LinearBlockMap& map) {
  static const char* names[] = {"transpose",     "reduction",    "trace_form",     "replicate", "unitary_conj",
                                "generalized",   "weyl_mixture", "diagonal_schur", "generic"};
  return names[map.kind.index()];
}

void validate(const LinearBlockMap& map) {
  require(map.m >= 1 && map.n >= 1, "map: dimensions must be positive");
  const int m = map.m, n = map.n;
  std::visit(overloaded{
                 [&](const Transpose&) { require(m == n, "transpose: needs m == n"); },
                 [&](const Reduction&) { require(m == n, "reduction: needs m == n"); },
                 [&](const TraceForm& t) {
                   require(n == 1, "trace_form: output dimension must be 1");
                   require(t.a.rows() == m && t.a.cols() == m, "trace_form: A must be m x m");
                   require(is_hermitian(t.a), "trace_form: A must be Hermitian");
                 },
                 [&](const Replicate& r) {
                   require(m == 1, "replicate: input dimension must be 1");
                   require(std::isfinite(r.x), "replicate: x must be finite");
                 },
                 [&](const UnitaryConj& u) {
                   require(m == n && u.u.rows() == n, "unitary_conj: U must be n x n with m == n");
                   require(is_unitary(u.u, 1e-10), "unitary_conj: U is not unitary");
                 },
                 [&](const Generalized& g) {
                   require(m == n, "generalized: needs m == n");
                   require(std::isfinite(g.alpha) && std::isfinite(g.beta) && std::isfinite(g.gamma),
                           "generalized: coefficients must be finite");
                 },
                 [&](const WeylMixture& w) {
                   require(m == n, "weyl_mixture: needs m == n");
                   require(!w.unitaries.empty() && w.coeffs.size() == w.unitaries.size(),
                           "weyl_mixture: need one coefficient per unitary");
                   require(static_cast<int>(w.unitaries.size()) <= n * n, "weyl_mixture: at most n^2 unitaries");
                   for (std::size_t i = 0; i < w.unitaries.size(); ++i) {
                     require(w.unitaries[i].rows() == n && is_unitary(w.unitaries[i], 1e-8),
                             "weyl_mixture: operator " + std::to_string(i) + " is not an n x n unitary");
                     for (std::size_t j = 0; j < i; ++j)
                       require(std::abs((w.unitaries[i] * w.unitaries[j].adjoint()).trace()) <= 1e-8 * n,
                               "weyl_mixture: operators are not orthogonal");
                   }
                 },
                 [&](const DiagonalSchur& d) {
                   require(d.alpha.rows() == n && d.alpha.cols() == m, "diagonal_schur: alpha must be n x m");
                   require(d.alpha.allFinite(), "diagonal_schur: alpha must be finite");
                 },
                 [&](const Generic& g) {
                   require(g.coeffs.n() == n && g.coeffs.m() == m, "generic: coefficient tensor has wrong shape");
                   double scale = 0.0, err = 0.0;
                   for (int i = 0; i < n; ++i)
                     for (int j = 0; j < m; ++j)
                       for (int k = 0; k < m; ++k)
                         for (int l = 0; l < n; ++l) {
                           scale = std::max(scale, std::abs(g.coeffs(i, j, k, l)));
                           err = std::max(err, std::abs(g.coeffs(i, j, k, l) - std::conj(g.coeffs(l, k, j, i))));
                         }
                   require(err <= 1e-10 * std::max(scale, 1.0),
                           "generic: coefficients violate c(i,j,k,l) = conj(c(l,k,j,i)); the map does not "
                           "preserve hermiticity");
                 },
             },
             map.kind);
}

CMatrix apply_map(const LinearBlockMap& map, const CMatrix& x) {
  if (x.rows() != map.m || x.cols() != map.m) throw InvalidInput("apply_map: input must be m x m");
  const int n = map.n;
  return std::visit(
      overloaded{
          [&](const Transpose&) -> CMatrix { return x.transpose(); },
          [&](const Reduction&) -> CMatrix { return x.trace() * CMatrix::Identity(n, n) - x; },
          [&](const TraceForm& t) -> CMatrix {
            CMatrix out(1, 1);
            out(0, 0) = (t.a.transpose() * x).trace();
            return out;
          },
          [&](const Replicate& r) -> CMatrix { return r.x * x(0, 0) * CMatrix::Identity(n, n); },
          [&](const UnitaryConj& u) -> CMatrix { return u.u * x * u.u.adjoint(); },
          [&](const Generalized& g) -> CMatrix {
            return g.alpha * x + g.beta * x.trace() * CMatrix::Identity(n, n) + g.gamma * x.transpose();
          },
          [&](const WeylMixture& w) -> CMatrix {
            CMatrix out = CMatrix::Zero(n, n);
            for (std::size_t i = 0; i < w.unitaries.size(); ++i)
              out += w.coeffs[i] * w.unitaries[i] * x * w.unitaries[i].adjoint();
            return out;
          },
          [&](const DiagonalSchur& d) -> CMatrix {
            CMatrix out = CMatrix::Zero(n, n);
            for (int i = 0; i < n; ++i)
              for (int j = 0; j < map.m; ++j) out(i, i) += d.alpha(i, j) * x(j, j);
            return out;
          },
          [&](const Generic& g) -> CMatrix {
            CMatrix out = CMatrix::Zero(n, n);
            for (int i = 0; i < n; ++i)
              for (int j = 0; j < map.m; ++j)
                for (int k = 0; k < map.m; ++k)
                  for (int l = 0; l < n; ++l) out(i, l) += g.coeffs(i, j, k, l) * x(j, k);
            return out;
          },
      },
      map.kind);
}

CMatrix transfer_matrix(const LinearBlockMap& map) {
  const auto c = coefficients(map);
  const int m = map.m, n = map.n;
  CMatrix t = CMatrix::Zero(n * n, m * m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k)
        for (int l = 0; l < n; ++l) t(i * n + l, j * m + k) = c(i, j, k, l);
  return t;
}

CMatrix build_choi(const LinearBlockMap& map) {
  validate(map);
  const int m = map.m, n = map.n;
  CMatrix c = std::visit(
      overloaded{
          [&](const Transpose&) -> CMatrix { return flip(n); },
          [&](const Reduction&) -> CMatrix {
            const CVector omega = bell_vector(n);
            return CMatrix::Identity(n * n, n * n) - omega * omega.adjoint();
          },
          [&](const TraceForm& t) -> CMatrix { return t.a; },
          [&](const Replicate& r) -> CMatrix { return r.x * CMatrix::Identity(n, n); },
          [&](const UnitaryConj& u) -> CMatrix {
            const CVector v = vectorize(u.u);
            return v * v.adjoint();
          },
          [&](const Generalized& g) -> CMatrix {
            const CVector omega = bell_vector(n);
            return g.alpha * omega * omega.adjoint() + g.beta * CMatrix::Identity(n * n, n * n) + g.gamma * flip(n);
          },
          [&](const WeylMixture& w) -> CMatrix {
            CMatrix out = CMatrix::Zero(n * n, n * n);
            for (std::size_t i = 0; i < w.unitaries.size(); ++i) {
              const CVector v = vectorize(w.unitaries[i]);
              out += w.coeffs[i] * v * v.adjoint();
            }
            return out;
          },
          [&](const DiagonalSchur& d) -> CMatrix {
            CMatrix out = CMatrix::Zero(n * m, n * m);
            for (int i = 0; i < n; ++i)
              for (int j = 0; j < m; ++j) out(i * m + j, i * m + j) = d.alpha(i, j);
            return out;
          },
          [&](const Generic& g) -> CMatrix { return choi_from_coeffs(g.coeffs); },
      },
      map.kind);
  if (!is_hermitian(c)) throw InvalidMap("build_choi: Choi matrix is not Hermitian");
  return c;
}

CoefficientTensor coeffs_from_choi(const CMatrix& c, int m, int n) {
  if (m < 1 || n < 1 || c.rows() != n * m || c.cols() != n * m)
    throw InvalidInput("coeffs_from_choi: expected a " + std::to_string(n * m) + "-square matrix");
  CoefficientTensor out(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k)
        for (int l = 0; l < n; ++l) out(i, j, k, l) = c(i * m + j, l * m + k);
  return out;
}

CMatrix choi_from_coeffs(const CoefficientTensor& coeffs) {
  const int n = coeffs.n(), m = coeffs.m();
  if (n < 1 || m < 1) throw InvalidInput("choi_from_coeffs: empty tensor");
  CMatrix c(n * m, n * m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k)
        for (int l = 0; l < n; ++l) c(i * m + j, l * m + k) = coeffs(i, j, k, l);
  return c;
}

CoefficientTensor coefficients(const LinearBlockMap& map) {
  if (const auto* g = std::get_if<Generic>(&map.kind)) {
    validate(map);
    return g->coeffs;
  }
  return coeffs_from_choi(build_choi(map), map.m, map.n);
}

ChoiAnalysis spectral_analysis(const CMatrix& c, int m, int n, double group_tol) {
  if (m < 1 || n < 1 || c.rows() != n * m || c.cols() != n * m)
    throw InvalidInput("spectral_analysis: Choi matrix must be (n*m)-square");
  if (!(group_tol > 0.0)) throw InvalidInput("spectral_analysis: group_tol must be positive");
  ChoiAnalysis out;
  out.m = m;
  out.n = n;
  out.group_tol = group_tol;
  out.choi = (c + c.adjoint()) / 2.0;
  const auto eig = hermitian_eig(out.choi);
  out.eigenvalues = eig.values;
  out.eigenvectors = eig.vectors;

  const Eigen::Index size = eig.values.size();
  const double norm = eig.values.cwiseAbs().maxCoeff();
  const double tol = group_tol * std::max(1.0, norm);

  std::vector<std::vector<Eigen::Index>> clusters;
  for (Eigen::Index s = 0; s < size; ++s) {
    if (s > 0 && eig.values(s - 1) - eig.values(s) <= tol) {
      clusters.back().push_back(s);
    } else {
      clusters.push_back({s});
    }
    if (s > 0) {
      const double gap = eig.values(s - 1) - eig.values(s);
      if (gap > tol && gap <= 100.0 * tol) {
        std::ostringstream msg;
        msg << "eigenvalues " << eig.values(s - 1) << " and " << eig.values(s) << " differ by " << gap
            << ", close to the grouping tolerance " << tol << "; grouping them would merge the two clusters";
        out.warnings.push_back(msg.str());
      }
    }
  }
  for (const auto& cl : clusters) {
    double rho = 0.0;
    for (auto s : cl) rho += eig.values(s);
    rho /= static_cast<double>(cl.size());
    if (std::abs(rho) <= tol) {
      out.kernel_rank += static_cast<int>(cl.size());
      continue;
    }
    ChoiGroup g;
    g.rho = rho;
    g.rank = static_cast<int>(cl.size());
    g.d = static_cast<double>(g.rank) / n;
    CMatrix v(size, g.rank);
    for (int k = 0; k < g.rank; ++k) v.col(k) = eig.vectors.col(cl[k]);
    g.projector = v * v.adjoint();
    out.groups.push_back(std::move(g));
  }
  const auto report = check_uc(out);
  for (std::size_t t = 0; t < out.groups.size(); ++t) {
    out.groups[t].uc_ok = report.per_group[t];
    out.groups[t].uc_deviation = report.deviation[t];
  }
  out.uc = report.global;
  return out;
}

ChoiAnalysis spectral_analysis(const LinearBlockMap& map, double group_tol) {
  return spectral_analysis(build_choi(map), map.m, map.n, group_tol);
}

UcReport check_uc(const ChoiAnalysis& analysis) {
  UcReport out;
  out.global = true;
  const int n = analysis.n, m = analysis.m;
  for (const auto& g : analysis.groups) {
    const CMatrix q = partial_trace(g.projector, n, m, TraceSide::Right);
    const double dev = max_abs(q - (static_cast<double>(g.rank) / n) * CMatrix::Identity(n, n));
    out.deviation.push_back(dev);
    out.per_group.push_back(dev <= 1e-8);
    out.global = out.global && dev <= 1e-8;
  }
  return out;
}

CMatrix dual_choi(const CMatrix& c, int m, int n) {
  if (c.rows() != n * m || c.cols() != n * m) throw InvalidInput("dual_choi: Choi matrix must be (n*m)-square");
  const CMatrix f = swap_operator(n, m);
  return f * c.transpose() * f.adjoint();
}

CMatrix matricize(const CVector& v, int n, int m) {
  if (v.size() != n * m) throw InvalidInput("matricize: vector length must be n*m");
  CMatrix w(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) w(i, j) = v(i * m + j);
  return w;
}

double covariance_check(const ChoiAnalysis& analysis) {
  const int n = analysis.n, m = analysis.m, size = n + m;
  const double tol = analysis.group_tol * std::max(1.0, analysis.eigenvalues.cwiseAbs().maxCoeff());
  std::vector<CMatrix> w;
  for (Eigen::Index s = 0; s < analysis.eigenvalues.size(); ++s) {
    if (std::abs(analysis.eigenvalues(s)) <= tol) continue;
    CMatrix e = CMatrix::Zero(size, size);
    e.block(m, 0, n, m) = matricize(analysis.eigenvectors.col(s), n, m);
    w.push_back(std::move(e));
  }
  double dev = 0.0;
  for (std::size_t s = 0; s < w.size(); ++s)
    for (std::size_t t = 0; t < w.size(); ++t) {
      const cplx tau = (w[s] * w[t].adjoint()).trace() / static_cast<double>(size);
      const double expected = s == t ? 1.0 / size : 0.0;
      dev = std::max(dev, std::abs(tau - expected));
    }
  return dev;
}

}  // namespace blockmod
