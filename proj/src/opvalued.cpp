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

#include "blockmod/opvalued.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <tuple>

#include "blockmod/parallel.hpp"
#include "internal.hpp"

namespace blockmod {

namespace {

bool purely_atomic(const SpectralMeasure& mu) {
  if (std::holds_alternative<Bernoulli>(mu) || std::holds_alternative<Atomic>(mu)) return true;
  if (const auto* s = std::get_if<Semicircle>(&mu)) return s->variance == 0.0;
  return false;
}

CMatrix inverse(const CMatrix& a, const char* where) { return checked_inverse(a, where); }

double min_imag_eigenvalue(const CMatrix& w) {
  const CMatrix im = (w - w.adjoint()) / cplx(0.0, 2.0);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(im, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// G_mu(z) extended to the lower half plane by conjugation.
cplx cauchy_anywhere(const SpectralMeasure& mu, cplx z) {
  const double floor = 1e-14 * (1.0 + std::abs(z));
  if (std::abs(z.imag()) < floor) z = cplx(z.real(), z.imag() < 0.0 ? -floor : floor);
  return cauchy(mu, z);
}

// Moves the eigenvalue at position k + 1 of the Schur form to position k.
void swap_schur(CMatrix& t, CMatrix& u, Eigen::Index k) {
  const cplx a = t(k, k), c = t(k + 1, k + 1), b = t(k, k + 1);
  const cplx x1 = b, x2 = c - a;
  const double norm = std::hypot(std::abs(x1), std::abs(x2));
  if (norm == 0.0) return;
  Eigen::Matrix2cd g;
  g << x1 / norm, -std::conj(x2) / norm, x2 / norm, std::conj(x1) / norm;
  const Eigen::Index n = t.rows();
  t.block(k, k, 2, n - k) = g.adjoint() * t.block(k, k, 2, n - k);
  t.block(0, k, k + 2, 2) = t.block(0, k, k + 2, 2) * g;
  u.middleCols(k, 2) = u.middleCols(k, 2) * g;
  t(k + 1, k) = 0.0;
  t(k, k) = c;
  t(k + 1, k + 1) = a;
}

// Solves P X - X Q = C for upper triangular P and Q with disjoint spectra.
CMatrix triangular_sylvester(const CMatrix& p, const CMatrix& q, const CMatrix& c) {
  CMatrix x(p.rows(), q.cols());
  for (Eigen::Index col = 0; col < q.cols(); ++col) {
    CVector rhs = c.col(col);
    for (Eigen::Index r = 0; r < col; ++r) rhs += x.col(r) * q(r, col);
    CMatrix shifted = p;
    shifted.diagonal().array() -= q(col, col);
    x.col(col) = shifted.triangularView<Eigen::Upper>().solve(rhs);
  }
  return x;
}

// Distance from z to the real interval [lo, hi]; either end may be infinite.
double distance_to_interval(cplx z, double lo, double hi) {
  return std::abs(z - cplx(std::clamp(z.real(), lo, hi), 0.0));
}

// A scalar function together with the distance from a point to its
// singularities, which bounds the radius of its Taylor series there.
struct ScalarFunction {
  std::function<cplx(cplx)> value;
  std::function<double(cplx)> reach;
};

// f on a block whose eigenvalues cluster around sigma: Taylor series with
// coefficients from a trapezoid rule on a circle that avoids the singularities.
CMatrix cluster_function(const CMatrix& t, const ScalarFunction& f) {
  const Eigen::Index p = t.rows();
  const cplx sigma = t.diagonal().mean();
  if (p == 1) return CMatrix::Constant(1, 1, f.value(sigma));
  const double reach = f.reach(sigma);
  const double radius = std::isfinite(reach) ? 0.5 * reach : 1.0;
  constexpr int kNodes = 64;
  std::vector<cplx> samples(kNodes), phase(kNodes);
  for (int j = 0; j < kNodes; ++j) {
    phase[j] = std::polar(1.0, 2.0 * internal::kPi * j / kNodes);
    samples[j] = f.value(sigma + radius * phase[j]);
  }
  const CMatrix shift = t - sigma * CMatrix::Identity(p, p);
  CMatrix out = CMatrix::Zero(p, p);
  CMatrix power = CMatrix::Identity(p, p);
  for (int k = 0; k < kNodes / 2; ++k) {
    cplx coeff = 0.0;
    for (int j = 0; j < kNodes; ++j) coeff += samples[j] * std::pow(phase[j], -k);
    coeff /= kNodes * std::pow(radius, k);
    const CMatrix term = coeff * power;
    out += term;
    if (k > 0 && max_abs(term) <= 1e-17 * max_abs(out)) break;
    power = power * shift;
  }
  return out;
}

// Schur-Parlett evaluation of matrix functions: eigenvalues closer than a
// small tolerance are grouped into blocks that are treated by Taylor series,
// the coupling between blocks comes from Sylvester equations.
class SchurParlett {
 public:
  explicit SchurParlett(const CMatrix& a) {
    const Eigen::Index n = a.rows();
    Eigen::ComplexSchur<CMatrix> schur(a);
    if (schur.info() != Eigen::Success) throw NumericalSingularity("SchurParlett: Schur decomposition failed", 0.0);
    t_ = schur.matrixT();
    u_ = schur.matrixU();
    std::vector<int> cluster(n, -1);
    int clusters = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (cluster[i] >= 0) continue;
      cluster[i] = clusters;
      std::vector<Eigen::Index> stack{i};
      while (!stack.empty()) {
        const auto k = stack.back();
        stack.pop_back();
        for (Eigen::Index j = 0; j < n; ++j) {
          const double tol = 1e-6 * (1.0 + std::max(std::abs(t_(k, k)), std::abs(t_(j, j))));
          if (cluster[j] < 0 && std::abs(t_(k, k) - t_(j, j)) <= tol) {
            cluster[j] = clusters;
            stack.push_back(j);
          }
        }
      }
      ++clusters;
    }
    for (bool moved = true; moved;) {
      moved = false;
      for (Eigen::Index k = 0; k + 1 < n; ++k)
        if (cluster[k] > cluster[k + 1]) {
          swap_schur(t_, u_, k);
          std::swap(cluster[k], cluster[k + 1]);
          moved = true;
        }
    }
    start_ = {0};
    for (Eigen::Index k = 1; k < n; ++k)
      if (cluster[k] != cluster[k - 1]) start_.push_back(k);
    start_.push_back(n);
  }

  CMatrix apply(const ScalarFunction& fn) const {
    const Eigen::Index n = t_.rows();
    const int blocks = static_cast<int>(start_.size()) - 1;
    CMatrix f = CMatrix::Zero(n, n);
    auto blk = [&](auto& m, int i, int j) {
      return m.block(start_[i], start_[j], start_[i + 1] - start_[i], start_[j + 1] - start_[j]);
    };
    for (int j = 0; j < blocks; ++j) {
      blk(f, j, j) = cluster_function(blk(t_, j, j), fn);
      for (int i = j - 1; i >= 0; --i) {
        CMatrix rhs = blk(f, i, i) * blk(t_, i, j) - blk(t_, i, j) * blk(f, j, j);
        for (int k = i + 1; k < j; ++k) rhs += blk(f, i, k) * blk(t_, k, j) - blk(t_, i, k) * blk(f, k, j);
        blk(f, i, j) = triangular_sylvester(blk(t_, i, i), blk(t_, j, j), rhs);
      }
    }
    return u_ * f * u_.adjoint();
  }

 private:
  CMatrix t_, u_;
  std::vector<Eigen::Index> start_;
};

ScalarFunction cauchy_function(const SpectralMeasure& mu) {
  const auto [lo, hi] = support_bounds(mu);
  return {[&mu](cplx z) { return cauchy_anywhere(mu, z); },
          [lo = lo, hi = hi](cplx z) { return distance_to_interval(z, lo, hi); }};
}

// The generating functions f1(l) = int dmu(t) / (1 - t l) and
// f2(l) = int t dmu(t) / (1 - t l), analytic on a disc around 0. Near 0 they
// are summed from moments, elsewhere f1(l) = G(1/l) / l and f2 = (f1 - 1) / l.
class MomentFunctions {
 public:
  explicit MomentFunctions(const SpectralMeasure& mu) : mu_(mu) {
    std::tie(lo_, hi_) = support_bounds(mu);
    radius_ = std::max(std::abs(lo_), std::abs(hi_));
    moments_.push_back(1.0);
    for (int k = 1; k <= kTerms + 1; ++k) moments_.push_back(moment(mu, k));
  }

  cplx f1(cplx l) const {
    if (std::abs(l) * radius_ <= 0.5) return series(l, 0);
    return cauchy_anywhere(mu_, 1.0 / l) / l;
  }
  cplx f2(cplx l) const {
    if (std::abs(l) * radius_ <= 0.5) return series(l, 1);
    return (f1(l) - 1.0) / l;
  }

  // Distance from l to {1/t : t in supp mu}.
  double reach(cplx l) const {
    const double inf = std::numeric_limits<double>::infinity();
    double d = inf;
    if (hi_ > 0.0) d = std::min(d, distance_to_interval(l, 1.0 / hi_, lo_ > 0.0 ? 1.0 / lo_ : inf));
    if (lo_ < 0.0) d = std::min(d, distance_to_interval(l, hi_ < 0.0 ? 1.0 / hi_ : -inf, 1.0 / lo_));
    return d;
  }

  ScalarFunction first() const {
    return {[this](cplx l) { return f1(l); }, [this](cplx l) { return reach(l); }};
  }
  ScalarFunction second() const {
    return {[this](cplx l) { return f2(l); }, [this](cplx l) { return reach(l); }};
  }

 private:
  static constexpr int kTerms = 60;

  cplx series(cplx l, int offset) const {
    cplx sum = 0.0;
    for (int k = kTerms; k >= 0; --k) sum = sum * l + moments_[k + offset];
    return sum;
  }

  const SpectralMeasure& mu_;
  double lo_ = 0.0, hi_ = 0.0, radius_ = 0.0;
  std::vector<double> moments_;
};

// h_y(w) = w^{-1} - G_y(w^{-1})^{-1} for y = Sigma (x) X, rewritten as
// f1(Sigma w)^{-1} f2(Sigma w) Sigma so that w is never inverted.
CMatrix h_signed(const CMatrix& w, const Eigen::VectorXd& sign, const MomentFunctions& law) {
  const CMatrix a = sign.asDiagonal() * w;
  const SchurParlett sp(a);
  return inverse(sp.apply(law.first()), "subordinate") * sp.apply(law.second()) * sign.asDiagonal();
}

CMatrix h_signed(const CMatrix& w, const Eigen::VectorXd& sign, const std::vector<Atom>& nodes) {
  const Eigen::Index n = w.rows();
  const CMatrix a = sign.asDiagonal() * w;
  CMatrix f1 = CMatrix::Zero(n, n), f2 = CMatrix::Zero(n, n);
  for (const auto& node : nodes) {
    const CMatrix r = inverse(CMatrix(CMatrix::Identity(n, n) - node.location * a), "subordinate");
    f1 += node.mass * r;
    f2 += (node.mass * node.location) * r;
  }
  return inverse(f1, "subordinate") * f2 * sign.asDiagonal();
}

// h_x(v) for x = F^*F + delta as E[(1 - x v)^{-1}]^{-1} E[x (1 - v x)^{-1}],
// with the Nm x Nm inverse reduced to N x N and m x m ones by the Woodbury
// identity around (1 - delta v) (x) I_m.
CMatrix h_positive(const CMatrix& v, const SignedFactorization& fact, double delta) {
  const int n_slots = fact.slots, m = fact.m;
  const CMatrix eye = CMatrix::Identity(n_slots, n_slots);
  const CMatrix a = inverse(CMatrix(eye - delta * v), "subordinate");
  std::vector<CMatrix> g(n_slots, CMatrix::Zero(m, m)), p(n_slots, CMatrix::Zero(m, m)),
      q(n_slots, CMatrix::Zero(m, m));
  for (int s = 0; s < n_slots; ++s)
    for (int t = 0; t < n_slots; ++t) g[t].noalias() += v(s, t) * fact.f[s];
  for (int s = 0; s < n_slots; ++s)
    for (int t = 0; t < n_slots; ++t) {
      p[t].noalias() += a(s, t) * g[s];
      q[s].noalias() += a(s, t) * fact.f[t].adjoint();
    }
  CMatrix core = CMatrix::Identity(m, m);
  for (int t = 0; t < n_slots; ++t) core.noalias() -= p[t] * fact.f[t].adjoint();
  const CMatrix k = inverse(core, "subordinate");
  const Eigen::Index mm = static_cast<Eigen::Index>(m) * m;
  CMatrix r(n_slots, mm), pr(mm, n_slots), fr(mm, n_slots);
  for (int s = 0; s < n_slots; ++s) {
    const CMatrix qk = q[s] * k;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        r(s, i * m + j) = qk(i, j);
        pr(i * m + j, s) = p[s](j, i);
        fr(i * m + j, s) = fact.f[s](j, i);
      }
  }
  const CMatrix psi = a + r * pr / static_cast<double>(m);
  const CMatrix num = r * fr / static_cast<double>(m) + delta * psi;
  return inverse(psi, "subordinate") * num;
}

}  // namespace

SignedFactorization factorize_map(const CoefficientTensor& c) {
  if (c.n() != c.m() || c.m() < 1) throw InvalidMap("factorize_map: the operator-valued solver needs m == n");
  const int m = c.m();
  double scale = 0.0, err = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k)
        for (int l = 0; l < m; ++l) {
          scale = std::max(scale, std::abs(c(i, j, k, l)));
          err = std::max(err, std::abs(c(i, j, k, l) - std::conj(c(l, k, j, i))));
        }
  if (err > 1e-10 * std::max(scale, 1.0))
    throw InvalidMap("factorize_map: coefficients are not self-adjoint, c(i,j,k,l) != conj(c(l,k,j,i))");

  SignedFactorization out;
  out.m = m;
  out.slots = m * m * (m * m + 1) / 2;
  out.beta = Eigen::MatrixXd(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) out.beta(i, j) = c(i, j, j, i).real();

  std::vector<int> diagonal_slot;
  for (int p = 0; p < m * m; ++p) {
    const int i = p / m, j = p % m;
    for (int q = p; q < m * m; ++q) {
      const int l = q / m, k = q % m;
      CMatrix f = CMatrix::Zero(m, m);
      out.provenance.push_back({i, j, l, k});
      out.sign.conservativeResize(static_cast<Eigen::Index>(out.provenance.size()));
      out.sign(out.sign.size() - 1) = 1.0;
      if (p == q) {
        diagonal_slot.push_back(static_cast<int>(out.f.size()));
        out.f.push_back(f);
        continue;
      }
      const cplx alpha = c(i, j, k, l);
      const double r = std::abs(alpha);
      if (r > 0.0) {
        const double theta = std::arg(alpha);
        f(i, j) += std::sqrt(r) * std::polar(1.0, theta / 2.0);
        f(l, k) += std::sqrt(r) * std::polar(1.0, -theta / 2.0);
        out.beta(i, j) -= r;
        out.beta(l, k) -= r;
      }
      out.f.push_back(f);
    }
  }
  for (int p = 0; p < m * m; ++p) {
    const int i = p / m, j = p % m, s = diagonal_slot[p];
    const double b = out.beta(i, j);
    out.f[s](i, j) = std::sqrt(std::abs(b));
    out.sign(s) = b < 0.0 ? -1.0 : 1.0;
  }
  return out;
}

SignedFactorization spectral_factorization(const CoefficientTensor& c) {
  if (c.n() != c.m() || c.m() < 1) throw InvalidMap("spectral_factorization: the operator-valued solver needs m == n");
  const int m = c.m();
  const CMatrix choi = choi_from_coeffs(c);
  if (!is_hermitian(choi, 1e-10)) throw InvalidMap("spectral_factorization: the Choi matrix is not Hermitian");
  const auto eig = hermitian_eig(choi);
  const double cut = 1e-12 * std::max(1.0, eig.values.cwiseAbs().maxCoeff());
  SignedFactorization out;
  out.m = m;
  std::vector<double> sign;
  for (Eigen::Index s = 0; s < eig.values.size(); ++s) {
    const double lambda = eig.values(s);
    if (std::abs(lambda) <= cut) continue;
    CMatrix f(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) f(i, j) = std::sqrt(std::abs(lambda)) * eig.vectors(i * m + j, s);
    out.f.push_back(std::move(f));
    sign.push_back(lambda < 0.0 ? -1.0 : 1.0);
  }
  out.slots = static_cast<int>(out.f.size());
  out.sign = Eigen::Map<const Eigen::VectorXd>(sign.data(), static_cast<Eigen::Index>(sign.size()));
  return out;
}

CMatrix reconstruct(const SignedFactorization& fact, const CMatrix& x) {
  if (x.rows() != fact.m || x.cols() != fact.m) throw InvalidInput("reconstruct: input must be m x m");
  CMatrix out = CMatrix::Zero(fact.m, fact.m);
  for (int s = 0; s < fact.slots; ++s) out += fact.sign(s) * fact.f[s] * x * fact.f[s].adjoint();
  return out;
}

CMatrix positive_factor(const SignedFactorization& fact) {
  const int m = fact.m;
  CMatrix big(m, static_cast<Eigen::Index>(fact.slots) * m);
  for (int s = 0; s < fact.slots; ++s) big.middleCols(s * m, m) = fact.f[s];
  return big.adjoint() * big;
}

CMatrix g_positive_factor(const CMatrix& b, const SignedFactorization& fact, double delta, bool direct) {
  const int n_slots = fact.slots, m = fact.m;
  if (b.rows() != n_slots || b.cols() != n_slots) throw InvalidInput("g_positive_factor: b must be N x N");
  const CMatrix shifted = b - delta * CMatrix::Identity(n_slots, n_slots);
  if (direct) {
    const CMatrix r = resolvent(positive_factor(fact), shifted);
    return partial_trace(r, n_slots, m, TraceSide::Right) / static_cast<double>(m);
  }
  // (A - F^*F)^{-1} = A^{-1} + A^{-1} F^* (I - F A^{-1} F^*)^{-1} F A^{-1} with A = (b - delta) (x) I_m.
  const CMatrix bi = inverse(shifted, "g_positive_factor");
  std::vector<CMatrix> v(n_slots, CMatrix::Zero(m, m)), u(n_slots, CMatrix::Zero(m, m));
  for (int s = 0; s < n_slots; ++s)
    for (int t = 0; t < n_slots; ++t) {
      if (bi(s, t) == 0.0) continue;
      v[s].noalias() += bi(s, t) * fact.f[t].adjoint();
      u[t].noalias() += bi(s, t) * fact.f[s];
    }
  CMatrix core = CMatrix::Identity(m, m);
  for (int s = 0; s < n_slots; ++s) core.noalias() -= fact.f[s] * v[s];
  const CMatrix k = inverse(core, "g_positive_factor");
  const Eigen::Index mm = static_cast<Eigen::Index>(m) * m;
  CMatrix wr(n_slots, mm), ur(mm, n_slots);
  for (int s = 0; s < n_slots; ++s) {
    const CMatrix w = v[s] * k;
    for (int a = 0; a < m; ++a)
      for (int c = 0; c < m; ++c) {
        wr(s, a * m + c) = w(a, c);
        ur(a * m + c, s) = u[s](c, a);
      }
  }
  CMatrix out = bi;
  out.noalias() += wr * ur / static_cast<double>(m);
  return out;
}

CMatrix g_signed_variable(const CMatrix& b, const Eigen::VectorXd& sign, const SpectralMeasure& mu) {
  if (b.rows() != sign.size() || b.cols() != sign.size()) throw InvalidInput("g_signed_variable: size mismatch");
  if (purely_atomic(mu)) return g_signed_variable(b, sign, atoms_of(mu));
  return SchurParlett(sign.asDiagonal() * b).apply(cauchy_function(mu)) * sign.asDiagonal();
}

CMatrix g_signed_variable(const CMatrix& b, const Eigen::VectorXd& sign, const std::vector<Atom>& nodes) {
  if (b.rows() != sign.size() || b.cols() != sign.size()) throw InvalidInput("g_signed_variable: size mismatch");
  CMatrix out = CMatrix::Zero(b.rows(), b.cols());
  for (const auto& node : nodes) {
    CMatrix shifted = b;
    shifted.diagonal() -= node.location * sign.cast<cplx>();
    out += node.mass * inverse(shifted, "g_signed_variable");
  }
  return out;
}

SubordinationResult subordinate(const CMatrix& b, const SignedFactorization& fact, const SpectralMeasure& mu,
                                double delta, const SubordinationOptions& options, const CMatrix* warm) {
  const int n_slots = fact.slots;
  if (b.rows() != n_slots || b.cols() != n_slots) throw InvalidInput("subordinate: b must be N x N");
  if (!(delta > 0.0)) throw InvalidInput("subordinate: delta must be positive");
  std::vector<Atom> nodes;
  if (options.quad_points > 0)
    nodes = quadrature_nodes(mu, options.quad_points);
  else if (purely_atomic(mu))
    nodes = atoms_of(mu);
  std::optional<MomentFunctions> law;
  if (nodes.empty()) law.emplace(mu);
  auto hy = [&](const CMatrix& w) { return nodes.empty() ? h_signed(w, fact.sign, *law) : h_signed(w, fact.sign, nodes); };

  auto map = [&](const CMatrix& w) { return CMatrix(b * h_positive(CMatrix(hy(w) * b), fact, delta)); };
  auto flat = [](const CMatrix& m) { return Eigen::Map<const CVector>(m.data(), m.size()); };

  SubordinationResult out;
  CMatrix w = warm ? *warm : CMatrix(cplx(0.0, 1.0) * CMatrix::Identity(n_slots, n_slots));
  // Anderson mixing over the last `depth` steps: w_k and f_k = map(w_k) - w_k.
  const int depth = std::max(options.anderson_depth, 0);
  std::deque<CVector> dw, df;
  CVector w_prev, f_prev;
  double last = std::numeric_limits<double>::infinity();
  double best = last;
  CMatrix best_g;
  int rising = 0, best_it = 0;
  for (int it = 1; it <= options.max_iter; ++it) {
    const CMatrix g = map(w);
    const CVector f = flat(g) - flat(w);
    const double diff = f.cwiseAbs().maxCoeff();
    if (!std::isfinite(diff)) throw DomainError("subordinate: iterate is no longer finite");
    out.iterations = it;
    out.residual = diff / std::max(1.0, max_abs(w));
    if (out.residual < options.tol) {
      w = g;
      break;
    }
    if (out.residual < best) {
      best = out.residual;
      best_g = g;
      best_it = it;
    } else if (it - best_it >= options.stall_window && best < options.stall_tol) {
      w = best_g;
      out.residual = best;
      out.stalled = true;
      break;
    }
    rising = out.residual > last ? rising + 1 : 0;
    if (rising >= 3) {
      out.damped = true;
      rising = 0;
      dw.clear();
      df.clear();
      w_prev.resize(0);
    }
    last = out.residual;
    const double beta = out.damped ? 0.5 : 1.0;
    if (depth > 0 && w_prev.size()) {
      dw.push_back(flat(w) - w_prev);
      df.push_back(f - f_prev);
      if (static_cast<int>(dw.size()) > depth) {
        dw.pop_front();
        df.pop_front();
      }
    }
    w_prev = flat(w);
    f_prev = f;
    CVector next = flat(w) + beta * f;
    if (!df.empty()) {
      CMatrix fm(f.size(), static_cast<Eigen::Index>(df.size())), wm(f.size(), fm.cols());
      for (std::size_t j = 0; j < df.size(); ++j) {
        fm.col(static_cast<Eigen::Index>(j)) = df[j];
        wm.col(static_cast<Eigen::Index>(j)) = dw[j];
      }
      const CVector gamma = fm.completeOrthogonalDecomposition().solve(f);
      if (gamma.allFinite()) next -= (wm + beta * fm) * gamma;
    }
    w = Eigen::Map<const CMatrix>(next.data(), n_slots, n_slots);
  }
  if (out.residual >= options.tol && !out.stalled)
    throw ConvergenceError("subordinate: no fixed point after " + std::to_string(options.max_iter) + " iterations",
                           out.residual);
  if (min_imag_eigenvalue(w) < -1e-8 * std::max(1.0, max_abs(w)))
    throw DomainError("subordinate: fixed point left the upper half plane");
  out.omega = w;
  out.eta = w * hy(w);
  return out;
}

namespace {

// Slots with f_s = 0 add a zero block to xy; dropping them leaves the scalar
// transform of the modified law unchanged.
SignedFactorization active_slots(const SignedFactorization& fact) {
  SignedFactorization out;
  out.m = fact.m;
  out.beta = fact.beta;
  std::vector<double> sign;
  for (int s = 0; s < fact.slots; ++s) {
    if (fact.f[s].cwiseAbs().maxCoeff() == 0.0) continue;
    out.f.push_back(fact.f[s]);
    if (!fact.provenance.empty()) out.provenance.push_back(fact.provenance[s]);
    sign.push_back(fact.sign(s));
  }
  out.slots = static_cast<int>(out.f.size());
  out.sign = Eigen::Map<const Eigen::VectorXd>(sign.data(), static_cast<Eigen::Index>(sign.size()));
  return out;
}

}  // namespace

OVGridResult opvalued_cauchy_grid(const SignedFactorization& full, const SpectralMeasure& mu,
                                  const std::vector<double>& x, const OpvaluedOptions& options) {
  const SignedFactorization fact = active_slots(full);
  const int n_slots = fact.slots;
  std::vector<double> levels = options.grid.eps_levels;
  if (levels.empty()) throw InvalidInput("opvalued_cauchy_grid: no eps levels");
  std::sort(levels.begin(), levels.end(), std::greater<>());
  std::vector<double> approach;
  for (double h : options.continuation)
    if (h > levels.front()) approach.push_back(h);
  std::sort(approach.begin(), approach.end(), std::greater<>());

  const int points = static_cast<int>(x.size());
  const std::size_t nl = levels.size();
  OVGridResult out;
  out.eps = levels;
  out.x = x;
  out.delta = options.delta;
  out.g_phi.assign(nl, std::vector<cplx>(points));
  out.g_y.assign(points, CMatrix());
  out.iterations.assign(points, 0);
  out.active_slots = n_slots;
  if (n_slots == 0) {
    for (std::size_t l = 0; l < nl; ++l)
      for (int i = 0; i < points; ++i) out.g_phi[l][i] = 1.0 / cplx(x[i], levels[l]);
    return out;
  }
  std::vector<int> damped(points, 0), stalled(points, 0), total(points, 0);
  const CMatrix eye = CMatrix::Identity(n_slots, n_slots);

  auto solve = [&](double xi, double eps, const CMatrix* warm, int& its, bool& was_damped, bool& was_stalled) {
    const cplx z(xi, eps);
    // b = conj(z)^{-1} keeps Im(b x) positive; the transform at z is the conjugate.
    const CMatrix b = (1.0 / std::conj(z)) * eye;
    SubordinationResult r;
    try {
      r = subordinate(b, fact, mu, options.delta, options.subordination, warm);
    } catch (const Error&) {
      if (!warm) throw;
      r = subordinate(b, fact, mu, options.delta, options.subordination, nullptr);
    }
    its += r.iterations;
    was_damped = was_damped || r.damped;
    was_stalled = was_stalled || r.stalled;
    return r;
  };

  parallel_chunks(points, [&](int begin, int end) {
    std::vector<CMatrix> previous(nl);
    for (int i = begin; i < end; ++i) {
      int its = 0;
      bool was_damped = false, was_stalled = false;
      CMatrix seed;
      if (i == begin) {
        for (double h : approach) {
          auto r = solve(x[i], h, seed.size() ? &seed : nullptr, its, was_damped, was_stalled);
          seed = r.omega;
        }
      }
      for (std::size_t l = 0; l < nl; ++l) {
        const CMatrix* warm = previous[l].size() ? &previous[l] : (seed.size() ? &seed : nullptr);
        int level_its = 0;
        auto r = solve(x[i], levels[l], warm, level_its, was_damped, was_stalled);
        its += level_its;
        previous[l] = r.omega;
        seed = r.omega;
        const cplx z(x[i], levels[l]);
        const CMatrix gxy = inverse(eye - r.eta, "opvalued_cauchy_grid") * (1.0 / std::conj(z));
        const cplx gy = std::conj(gxy.trace() / static_cast<double>(n_slots));
        out.g_phi[l][i] = static_cast<double>(n_slots) * gy - static_cast<double>(n_slots - 1) / z;
        if (l + 1 == nl) {
          out.g_y[i] = gxy.adjoint();
          out.iterations[i] = level_its;
        }
      }
      total[i] = its;
      damped[i] = was_damped;
      stalled[i] = was_stalled;
    }
  });
  for (int i = 0; i < points; ++i) {
    out.total_iterations += total[i];
    out.max_iterations = std::max(out.max_iterations, out.iterations[i]);
    out.damped_points += damped[i];
    out.stalled_points += stalled[i];
    if (!(out.g_y[i].trace().imag() < 0.0)) ++out.herglotz_violations;
  }
  return out;
}

std::pair<double, double> opvalued_support_bound(const LinearBlockMap& map, const SpectralMeasure& mu) {
  if (map.m != map.n) throw UnsupportedConfiguration("opvalued_support_bound: needs m == n");
  const auto fact = spectral_factorization(coefficients(map));
  CMatrix outer = CMatrix::Zero(fact.m, fact.m);
  for (const auto& f : fact.f) outer += f * f.adjoint();
  const double spread = fact.slots ? hermitian_eig(outer).values.cwiseAbs().maxCoeff() : 0.0;
  const auto [lo, hi] = support_bounds(mu);
  const double c = 0.5 * (lo + hi), r = 0.5 * (hi - lo);
  const Eigen::VectorXd ev = hermitian_eig(apply_map(map, CMatrix::Identity(map.m, map.m))).values;
  const double a = c * ev.minCoeff(), b = c * ev.maxCoeff();
  return {std::min(a, b) - r * spread, std::max(a, b) + r * spread};
}

namespace {

DensityCurve invert(const OVGridResult& g, const OpvaluedOptions& options, double* raw_mass) {
  std::vector<CauchySamples> levels;
  for (std::size_t l = 0; l < g.eps.size(); ++l) levels.push_back({g.eps[l], g.g_phi[l]});
  InversionOptions opt;
  opt.richardson = options.grid.richardson;
  opt.mass_tolerance = 0.02;
  opt.atoms_hint = options.grid.atoms_hint;
  opt.atoms_hint.push_back(0.0);
  return stieltjes_invert(g.x, std::move(levels), opt, raw_mass);
}

// Nodes of a curve inverted at height eps that carry more density than the
// Poisson-kernel tail of the bulk (nodes above 5% of the peak) can explain.
std::pair<double, double> occupied_range(const DensityCurve& c, double eps) {
  const double peak = *std::max_element(c.density.begin(), c.density.end());
  double a = std::numeric_limits<double>::infinity(), b = -a;
  for (std::size_t i = 0; i < c.grid.size(); ++i)
    if (c.density[i] > 0.05 * peak) {
      a = std::min(a, c.grid[i]);
      b = std::max(b, c.grid[i]);
    }
  for (const auto& at : c.atoms) {
    a = std::min(a, at.location);
    b = std::max(b, at.location);
  }
  if (!(b >= a)) return {c.grid.front(), c.grid.back()};
  double lo = a, hi = b;
  for (std::size_t i = 0; i < c.grid.size(); ++i) {
    const double x = c.grid[i];
    const double d = x < a ? a - x : (x > b ? x - b : 0.0);
    const double tail = eps / (internal::kPi * (d * d + eps * eps));
    if (c.density[i] > 1e-3 * peak + 2.0 * tail) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  const double step = c.grid[1] - c.grid[0];
  const double pad = 0.05 * (hi - lo) + 2.0 * step;
  return {std::max(c.grid.front(), lo - pad), std::min(c.grid.back(), hi + pad)};
}

}  // namespace

OpvaluedResult modified_density_numeric(const LinearBlockMap& map, const SpectralMeasure& mu,
                                        const OpvaluedOptions& options) {
  if (map.m != map.n)
    throw UnsupportedConfiguration("modified_density_numeric: the operator-valued solver handles m == n only");
  validate(mu);
  if (!(options.delta > 0.0)) throw InvalidInput("modified_density_numeric: delta must be positive");
  if (options.grid.points < 3) throw InvalidInput("modified_density_numeric: need at least 3 grid points");
  const auto coeffs = coefficients(map);
  const auto fact =
      options.factorization == Factorization::Spectral ? spectral_factorization(coeffs) : factorize_map(coeffs);

  double lo = options.grid.xmin, hi = options.grid.xmax;
  if (options.grid.auto_range) {
    std::tie(lo, hi) = opvalued_support_bound(map, mu);
    const double pad = 0.02 * (hi - lo) + 10.0 * options.grid.eps_levels.front();
    lo -= pad;
    hi += pad;
    // Coarse pass at the largest height to locate the occupied part of the bound.
    OpvaluedOptions coarse = options;
    coarse.grid.eps_levels = {std::max(options.grid.eps_levels.front(), (hi - lo) / 200.0)};
    coarse.continuation.clear();
    const auto grid = uniform_grid(lo, hi, 201, 0.0);
    const auto g = opvalued_cauchy_grid(fact, mu, grid, coarse);
    CauchySamples samples{coarse.grid.eps_levels.front(), g.g_phi.front()};
    InversionOptions opt;
    opt.mass_tolerance = 1.0;
    std::tie(lo, hi) = occupied_range(stieltjes_invert(grid, {samples}, opt), samples.eps);
  } else if (!(hi > lo)) {
    throw InvalidInput("modified_density_numeric: empty x-range");
  }
  const auto grid = uniform_grid(lo, hi, options.grid.points, 0.0);

  auto solve = [&](double delta) {
    OpvaluedOptions o = options;
    o.delta = delta;
    return opvalued_cauchy_grid(fact, mu, grid, o);
  };
  // First-order Richardson step in delta; only g_phi changes.
  auto extrapolate = [](OVGridResult small, const OVGridResult& large) {
    for (std::size_t l = 0; l < small.g_phi.size(); ++l)
      for (std::size_t i = 0; i < small.g_phi[l].size(); ++i)
        small.g_phi[l][i] = (10.0 * small.g_phi[l][i] - large.g_phi[l][i]) / 9.0;
    small.total_iterations += large.total_iterations;
    return small;
  };

  OpvaluedResult out;
  out.delta = options.delta;
  auto g = solve(options.delta);
  std::optional<OVGridResult> next;
  if (options.extrapolate_delta) {
    next = solve(options.delta / 10.0);
    out.telemetry = extrapolate(*next, g);
  } else {
    out.telemetry = std::move(g);
  }
  out.curve = invert(out.telemetry, options, &out.raw_mass);
  if (options.check_stability) {
    OVGridResult finer =
        options.extrapolate_delta ? extrapolate(solve(options.delta / 100.0), *next) : solve(options.delta / 10.0);
    double mass = 0.0;
    const auto curve = invert(finer, options, &mass);
    out.stability_l1 = density_l1(out.curve, curve);
    if (*out.stability_l1 > options.stability_tol) {
      std::ostringstream msg;
      msg << "modified_density_numeric: curves at delta = " << options.delta << " and " << options.delta / 10.0
          << " differ by " << *out.stability_l1 << " in L1; use a smaller delta or a finer grid";
      throw AccuracyError(msg.str());
    }
  }
  return out;
}

}  // namespace blockmod
