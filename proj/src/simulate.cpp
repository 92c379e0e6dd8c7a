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

#include "blockmod/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "blockmod/parallel.hpp"
#include "internal.hpp"

namespace blockmod {

using internal::overloaded;

namespace {

constexpr int kQuantileGrid = 20001;

CMatrix sample_with(const EnsembleSpec& spec, std::mt19937_64& rng, const std::vector<double>& q) {
  const int size = spec.d * spec.m;
  return std::visit(
      overloaded{
          [&](const GueEnsemble& g) -> CMatrix {
            const CMatrix z = ginibre(size, size, rng);
            CMatrix h = (z + z.adjoint()) / std::sqrt(2.0 * size);
            h *= std::sqrt(g.variance);
            h.diagonal().array() += g.mean;
            return h;
          },
          [&](const WishartEnsemble& w) -> CMatrix {
            const int k = std::max(1, static_cast<int>(std::lround(w.c * size)));
            const CMatrix x = ginibre(size, k, rng);
            CMatrix out = x * x.adjoint() / static_cast<double>(size);
            return (out + out.adjoint()) / 2.0;
          },
          [&](const RotatedEnsemble&) -> CMatrix {
            const CMatrix u = haar_unitary(size, rng);
            const Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(q.data(), size);
            CMatrix out = u * diag.asDiagonal() * u.adjoint();
            return (out + out.adjoint()) / 2.0;
          },
      },
      spec.kind);
}

std::vector<double> ensemble_quantiles(const EnsembleSpec& spec) {
  if (const auto* r = std::get_if<RotatedEnsemble>(&spec.kind)) return quantiles(r->diag_measure, spec.d * spec.m);
  return {};
}

}  // namespace

void validate(const EnsembleSpec& spec) {
  if (spec.d < 1 || spec.m < 1) throw InvalidInput("ensemble: d and m must be positive");
  if (static_cast<long long>(spec.d) * spec.m > 4096) throw InvalidInput("ensemble: d*m must not exceed 4096");
  if (spec.trials < 1) throw InvalidInput("ensemble: trials must be at least 1");
  std::visit(overloaded{
                 [](const GueEnsemble& g) {
                   if (!(g.variance >= 0.0) || !std::isfinite(g.mean))
                     throw InvalidInput("gue ensemble: variance must be nonnegative and mean finite");
                 },
                 [](const WishartEnsemble& w) {
                   if (!(w.c > 0.0) || !std::isfinite(w.c)) throw InvalidInput("wishart ensemble: c must be positive");
                 },
                 [](const RotatedEnsemble& r) { validate(r.diag_measure); },
             },
             spec.kind);
}

std::mt19937_64 trial_engine(std::uint64_t seed, std::uint64_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  return std::mt19937_64(seq);
}

CMatrix ginibre(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  CMatrix z(rows, cols);
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double re = normal(rng);
      z(i, j) = cplx(re, normal(rng));
    }
  return z;
}

CMatrix haar_unitary(int size, std::mt19937_64& rng) {
  Eigen::HouseholderQR<CMatrix> qr(ginibre(size, size, rng));
  CMatrix q = qr.householderQ();
  const CMatrix& r = qr.matrixQR();
  for (int j = 0; j < size; ++j) {
    const double a = std::abs(r(j, j));
    if (a > 0.0) q.col(j) *= r(j, j) / a;
  }
  return q;
}

std::vector<double> quantiles(const SpectralMeasure& mu, int count) {
  validate(mu);
  if (count < 1) throw InvalidInput("quantiles: count must be positive");
  DensityCurve curve;
  if (const auto* n = std::get_if<Numeric>(&mu)) {
    curve = n->curve;
  } else {
    auto [lo, hi] = support_bounds(mu);
    if (hi <= lo) {
      lo -= 0.5;
      hi += 0.5;
    }
    curve = sample_curve(mu, uniform_grid(lo, hi, kQuantileGrid), 1e-4);
  }
  normalize(curve);
  const CurveCdf cdf(curve);
  std::vector<double> table(curve.grid.size());
  for (std::size_t i = 0; i < table.size(); ++i) table[i] = cdf(curve.grid[i]);
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double u = (i + 0.5) / count;
    bool done = false;
    for (const auto& at : curve.atoms)
      if (cdf.left_limit(at.location) <= u && u < cdf(at.location)) {
        out[i] = at.location;
        done = true;
        break;
      }
    if (done) continue;
    const auto it = std::lower_bound(table.begin(), table.end(), u);
    if (it == table.begin()) {
      out[i] = curve.grid.front();
    } else if (it == table.end()) {
      out[i] = curve.grid.back();
    } else {
      const std::size_t k = static_cast<std::size_t>(it - table.begin());
      const double f0 = std::max(table[k - 1], cdf.left_limit(curve.grid[k - 1]));
      const double f1 = cdf.left_limit(curve.grid[k]);
      const double t = f1 > f0 ? std::clamp((u - f0) / (f1 - f0), 0.0, 1.0) : 0.5;
      out[i] = curve.grid[k - 1] + t * (curve.grid[k] - curve.grid[k - 1]);
    }
  }
  return out;
}

CMatrix sample(const EnsembleSpec& spec, std::mt19937_64& rng) {
  validate(spec);
  return sample_with(spec, rng, ensemble_quantiles(spec));
}

CMatrix apply_block_map(const CMatrix& x, const LinearBlockMap& map) {
  validate(map);
  const int m = map.m, n = map.n;
  if (x.rows() != x.cols() || x.rows() % m != 0)
    throw InvalidInput("apply_block_map: sample size " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                       " is not a square grid of " + std::to_string(m) + "x" + std::to_string(m) + " blocks");
  const int d = static_cast<int>(x.rows()) / m;
  const CMatrix t = transfer_matrix(map);
  CMatrix blocks(m * m, static_cast<Eigen::Index>(d) * d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k) blocks(j * m + k, a * d + b) = x(a * m + j, b * m + k);
  const CMatrix images = t * blocks;
  CMatrix y(d * n, d * n);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l) y(a * n + i, b * n + l) = images(i * n + l, a * d + b);
  return y;
}

EmpiricalSpectrum simulate(const EnsembleSpec& spec, const LinearBlockMap& map) {
  validate(spec);
  validate(map);
  if (map.m != spec.m)
    throw InvalidInput("simulate: map input dimension " + std::to_string(map.m) + " differs from block size " +
                       std::to_string(spec.m));
  const auto start = std::chrono::steady_clock::now();
  const auto q = ensemble_quantiles(spec);
  EmpiricalSpectrum out;
  out.spec = spec;
  out.per_trial.resize(static_cast<std::size_t>(spec.trials));
  parallel_for(spec.trials, [&](int trial) {
    auto rng = trial_engine(spec.seed, static_cast<std::uint64_t>(trial));
    const CMatrix y = apply_block_map(sample_with(spec, rng, q), map);
    if (!is_hermitian(y, 1e-9)) throw InvalidMap("simulate: the map does not preserve hermiticity");
    const CMatrix h = (y + y.adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(h, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& v = eig.eigenvalues();
    out.per_trial[trial].assign(v.data(), v.data() + v.size());
  });
  for (const auto& t : out.per_trial) out.pool.insert(out.pool.end(), t.begin(), t.end());
  std::sort(out.pool.begin(), out.pool.end());
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

EmpiricalSpectrum pool_spectrum(std::vector<double> values) {
  EmpiricalSpectrum out;
  std::sort(values.begin(), values.end());
  out.per_trial = {values};
  out.pool = std::move(values);
  out.spec.trials = 1;
  return out;
}

Histogram freedman_diaconis(const std::vector<double>& sorted) {
  Histogram h;
  if (sorted.empty()) return h;
  const std::size_t n = sorted.size();
  const double lo = sorted.front(), hi = sorted.back();
  const double iqr = sorted[(3 * n) / 4 == n ? n - 1 : (3 * n) / 4] - sorted[n / 4];
  const double width = 2.0 * iqr / std::cbrt(static_cast<double>(n));
  int bins = 1;
  if (width > 0.0 && hi > lo) bins = std::clamp(static_cast<int>(std::ceil((hi - lo) / width)), 1, 1000);
  const double a = hi > lo ? lo : lo - 0.5;
  const double b = hi > lo ? hi : hi + 0.5;
  const double step = (b - a) / bins;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) h.edges[i] = a + i * step;
  h.edges.back() = b;
  h.density.assign(static_cast<std::size_t>(bins), 0.0);
  for (double v : sorted) {
    const int i = std::min(bins - 1, static_cast<int>((v - a) / step));
    h.density[std::max(i, 0)] += 1.0;
  }
  for (double& c : h.density) c /= static_cast<double>(n) * step;
  return h;
}

Comparison empirical_vs_predicted(const EmpiricalSpectrum& spectrum, const DensityCurve& curve) {
  const auto& pool = spectrum.pool;
  if (pool.empty()) throw InvalidInput("empirical_vs_predicted: empty eigenvalue pool");
  if (!std::is_sorted(pool.begin(), pool.end())) throw InvalidInput("empirical_vs_predicted: pool must be sorted");
  const CurveCdf cdf(curve);
  const double total = static_cast<double>(pool.size());
  Comparison out;

  // ECDF is constant between distinct pool values and the curve CDF is
  // monotone, so the supremum is attained at one-sided limits.
  std::vector<double> values;
  std::vector<double> ecdf;  // F_emp at each distinct value
  for (std::size_t i = 0; i < pool.size();) {
    std::size_t j = i;
    while (j < pool.size() && pool[j] == pool[i]) ++j;
    values.push_back(pool[i]);
    ecdf.push_back(static_cast<double>(j) / total);
    out.ks = std::max({out.ks, std::abs(ecdf.back() - cdf(pool[i])),
                       std::abs(static_cast<double>(i) / total - cdf.left_limit(pool[i]))});
    i = j;
  }

  std::vector<double> breaks = values;
  breaks.insert(breaks.end(), curve.grid.begin(), curve.grid.end());
  for (const auto& at : curve.atoms) breaks.push_back(at.location);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  auto emp = [&](double x) {
    const auto it = std::upper_bound(values.begin(), values.end(), x);
    return it == values.begin() ? 0.0 : ecdf[static_cast<std::size_t>(it - values.begin()) - 1];
  };
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double p = breaks[k], q = breaks[k + 1];
    const double e = emp(p);
    const double mid = 0.5 * (p + q);
    out.cdf_l1 += (q - p) / 6.0 *
                  (std::abs(e - cdf(p)) + 4.0 * std::abs(e - cdf(mid)) + std::abs(e - cdf.left_limit(q)));
  }
  out.histogram = freedman_diaconis(pool);
  return out;
}

std::vector<double> empirical_moments(const std::vector<double>& values, int count) {
  std::vector<double> out(static_cast<std::size_t>(std::max(count, 0)), 0.0);
  for (double v : values) {
    double p = 1.0;
    for (int k = 0; k < count; ++k) out[k] += (p *= v);
  }
  for (double& x : out) x /= std::max<std::size_t>(values.size(), 1);
  return out;
}

}  // namespace blockmod
