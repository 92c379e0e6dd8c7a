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

// Finite-size Monte Carlo for block-modified random matrices.

#ifndef BLOCKMOD_SIMULATE_HPP
#define BLOCKMOD_SIMULATE_HPP

#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include "blockmod/choi.hpp"
#include "blockmod/measures.hpp"

namespace blockmod {

/// (Z + Z^*) / sqrt(2N) scaled to the given mean and variance.
struct GueEnsemble {
  double mean = 0.0;
  double variance = 1.0;
};

/// X X^* / N with X an N x round(c N) complex Ginibre matrix.
struct WishartEnsemble {
  double c = 1.0;
};

/// U diag(q) U^* with Haar U and q the midpoint quantiles of the measure.
struct RotatedEnsemble {
  SpectralMeasure diag_measure;
};

using EnsembleKind = std::variant<GueEnsemble, WishartEnsemble, RotatedEnsemble>;

struct EnsembleSpec {
  EnsembleKind kind;
  int d = 500;
  int m = 2;
  int trials = 20;
  std::uint64_t seed = 1;
};

void validate(const EnsembleSpec& spec);

/// Generator for one (seed, trial) pair; independent of thread scheduling.
std::mt19937_64 trial_engine(std::uint64_t seed, std::uint64_t trial);

/// Entries with independent real and imaginary parts of variance 1/2.
CMatrix ginibre(int rows, int cols, std::mt19937_64& rng);

/// Q diag(R_ii / |R_ii|) from the QR factorization of a Ginibre matrix.
CMatrix haar_unitary(int size, std::mt19937_64& rng);

/// F^{-1}((i + 1/2) / count) for i = 0..count-1.
std::vector<double> quantiles(const SpectralMeasure& mu, int count);

/// One (d m)-square Hermitian sample of the ensemble.
CMatrix sample(const EnsembleSpec& spec, std::mt19937_64& rng);

/// Replaces each m x m block of the d x d block matrix x by phi(block).
/// Throws InvalidInput when the size is not a multiple of map.m.
CMatrix apply_block_map(const CMatrix& x, const LinearBlockMap& map);

struct EmpiricalSpectrum {
  std::vector<double> pool;  // sorted
  std::vector<std::vector<double>> per_trial;
  EnsembleSpec spec;
  double wall_seconds = 0.0;
};

/// Eigenvalues of [id (x) phi](X) over spec.trials samples, trials in
/// parallel. Throws InvalidInput when map.m != spec.m.
EmpiricalSpectrum simulate(const EnsembleSpec& spec, const LinearBlockMap& map);

EmpiricalSpectrum pool_spectrum(std::vector<double> values);

struct Histogram {
  std::vector<double> edges;
  std::vector<double> density;  // normalized to unit area
};

/// Freedman-Diaconis bin width 2 IQR / N^{1/3}, capped at 1000 bins.
Histogram freedman_diaconis(const std::vector<double>& sorted);

struct Comparison {
  double ks = 0.0;
  double cdf_l1 = 0.0;
  Histogram histogram;
};

/// KS distance and int |F_emp - F_curve| dx against the curve's CDF.
Comparison empirical_vs_predicted(const EmpiricalSpectrum& spectrum, const DensityCurve& curve);

/// Empirical moments (1/N) sum x^k for k = 1..count.
std::vector<double> empirical_moments(const std::vector<double>& values, int count);

}  // namespace blockmod

#endif  // BLOCKMOD_SIMULATE_HPP
