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

#include <algorithm>
#include <string>
#include <vector>

#include "blockmod/measures.hpp"

namespace blockmod {
namespace {

// Adding element i to block b creates a crossing iff some q < r < i has
// label(q) = b, label(r) != b and the block of r started before q.
bool crosses(const std::vector<int>& labels, const std::vector<int>& first, int i, int b) {
  for (int q = 0; q < i; ++q) {
    if (labels[q] != b) continue;
    for (int r = q + 1; r < i; ++r) {
      if (labels[r] != b && first[labels[r]] < q) return true;
    }
  }
  return false;
}

void extend(std::vector<int>& labels, std::vector<int>& first, int i, int blocks, int n,
            std::vector<std::vector<int>>& out) {
  if (i == n) {
    out.push_back(labels);
    return;
  }
  for (int b = 0; b <= blocks; ++b) {
    if (b < blocks && crosses(labels, first, i, b)) continue;
    labels[i] = b;
    if (b == blocks) first[b] = i;
    extend(labels, first, i + 1, std::max(blocks, b + 1), n, out);
  }
}

// Coefficients of M(z)^s up to z^degree, M given by moments with m_0 = 1.
std::vector<double> power_series_power(const std::vector<double>& m, int s, int degree) {
  std::vector<double> out(degree + 1, 0.0);
  out[0] = 1.0;
  for (int p = 0; p < s; ++p) {
    std::vector<double> next(degree + 1, 0.0);
    for (int a = 0; a <= degree; ++a) {
      if (out[a] == 0.0) continue;
      for (int b = 0; a + b <= degree; ++b) next[a + b] += out[a] * m[b];
    }
    out.swap(next);
  }
  return out;
}

}  // namespace

std::vector<std::vector<int>> noncrossing_partitions(int n) {
  if (n < 0 || n > 14) throw InvalidInput("noncrossing_partitions: n out of range: " + std::to_string(n));
  std::vector<std::vector<int>> out;
  if (n == 0) {
    out.emplace_back();
    return out;
  }
  std::vector<int> labels(n, -1), first(n, -1);
  extend(labels, first, 0, 0, n, out);
  return out;
}

std::vector<double> nc_moments(const std::vector<double>& cumulants) {
  const int k = static_cast<int>(cumulants.size());
  if (k > 12) throw InvalidInput("nc_moments: enumeration limited to order 12");
  std::vector<double> moments(k, 0.0);
  for (int n = 1; n <= k; ++n) {
    double total = 0.0;
    for (const auto& labels : noncrossing_partitions(n)) {
      std::vector<int> sizes(n, 0);
      for (int b : labels) ++sizes[b];
      double prod = 1.0;
      for (int sz : sizes)
        if (sz > 0) prod *= cumulants[sz - 1];
      total += prod;
    }
    moments[n - 1] = total;
  }
  return moments;
}

std::vector<double> moments_from_cumulants(const std::vector<double>& cumulants) {
  const int k = static_cast<int>(cumulants.size());
  std::vector<double> m(k + 1, 0.0);
  m[0] = 1.0;
  for (int n = 1; n <= k; ++n) {
    double total = 0.0;
    for (int s = 1; s <= n; ++s) total += cumulants[s - 1] * power_series_power(m, s, n - s)[n - s];
    m[n] = total;
  }
  return {m.begin() + 1, m.end()};
}

std::vector<double> free_cumulants(const std::vector<double>& moments) {
  const int k = static_cast<int>(moments.size());
  std::vector<double> m(k + 1, 0.0);
  m[0] = 1.0;
  std::copy(moments.begin(), moments.end(), m.begin() + 1);
  std::vector<double> kappa(k, 0.0);
  for (int n = 1; n <= k; ++n) {
    double rest = 0.0;
    for (int s = 1; s < n; ++s) rest += kappa[s - 1] * power_series_power(m, s, n - s)[n - s];
    kappa[n - 1] = m[n] - rest;
  }
  return kappa;
}

}  // namespace blockmod
