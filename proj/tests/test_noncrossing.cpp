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

#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "blockmod/measures.hpp"
#include "test_support.hpp"

using namespace blockmod;
using namespace blockmod::testing;

namespace {

// All set partitions of {0..n-1} as restricted growth strings.
void all_partitions(int n, std::vector<int>& cur, int next_label, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == n) {
    out.push_back(cur);
    return;
  }
  for (int b = 0; b <= next_label; ++b) {
    cur.push_back(b);
    all_partitions(n, cur, std::max(next_label, b + 1), out);
    cur.pop_back();
  }
}

bool crossing(const std::vector<int>& p) {
  const int n = static_cast<int>(p.size());
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int c = b + 1; c < n; ++c)
        for (int d = c + 1; d < n; ++d)
          if (p[a] == p[c] && p[b] == p[d] && p[a] != p[b]) return true;
  return false;
}

std::vector<std::vector<int>> brute_noncrossing(int n) {
  std::vector<std::vector<int>> parts, out;
  std::vector<int> cur;
  all_partitions(n, cur, 0, parts);
  for (const auto& p : parts)
    if (!crossing(p)) out.push_back(p);
  return out;
}

// Canonical form: relabel blocks by first appearance.
std::vector<int> canonical(const std::vector<int>& p) {
  std::map<int, int> relabel;
  std::vector<int> out;
  for (int b : p) {
    auto it = relabel.find(b);
    if (it == relabel.end()) it = relabel.emplace(b, static_cast<int>(relabel.size())).first;
    out.push_back(it->second);
  }
  return out;
}

double moment_by_enumeration(const std::vector<double>& kappa, int k) {
  double total = 0.0;
  for (const auto& p : brute_noncrossing(k)) {
    std::map<int, int> sizes;
    for (int b : p) ++sizes[b];
    double prod = 1.0;
    for (const auto& [b, s] : sizes) prod *= kappa[s - 1];
    total += prod;
  }
  return total;
}

}  // namespace

TEST_CASE("noncrossing_partitions: Catalan counts and agreement with brute force") {
  for (int n = 1; n <= 8; ++n) {
    const auto parts = noncrossing_partitions(n);
    CHECK(static_cast<double>(parts.size()) == catalan(n));
    std::set<std::vector<int>> got, want;
    for (const auto& p : parts) got.insert(canonical(p));
    for (const auto& p : brute_noncrossing(n)) want.insert(canonical(p));
    CHECK(got == want);
  }
}

TEST_CASE("nc_moments: point mass, free Poisson and semicircle cumulants") {
  const double c = 1.3;
  auto m = nc_moments(std::vector<double>{c, 0, 0, 0, 0, 0});
  for (int k = 1; k <= 6; ++k) CHECK(m[k - 1] == doctest::Approx(std::pow(c, k)).epsilon(1e-14));

  const double lambda = 0.7;
  m = nc_moments(std::vector<double>(4, lambda));
  CHECK(m[0] == doctest::Approx(lambda));
  CHECK(m[1] == doctest::Approx(lambda + lambda * lambda));

  m = nc_moments(std::vector<double>{0, 1, 0, 0, 0, 0, 0, 0, 0, 0});
  for (int k = 1; k <= 10; ++k) CHECK(m[k - 1] == doctest::Approx(k % 2 ? 0.0 : catalan(k / 2)));
}

TEST_CASE("nc_moments agrees with brute-force enumeration on random cumulants") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> kappa(8);
    for (double& x : kappa) x = u(rng);
    const auto m = nc_moments(kappa);
    const auto r = moments_from_cumulants(kappa);
    for (int k = 1; k <= 8; ++k) {
      const double want = moment_by_enumeration(kappa, k);
      CHECK(std::abs(m[k - 1] - want) <= 1e-12 * std::max(1.0, std::abs(want)));
      CHECK(std::abs(r[k - 1] - want) <= 1e-12 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("free_cumulants: examples and round trip") {
  auto k = free_cumulants(std::vector<double>(6, 1.0));
  CHECK(k[0] == doctest::Approx(1.0));
  for (int i = 1; i < 6; ++i) CHECK(std::abs(k[i]) < 1e-14);

  k = free_cumulants({0.0, 1.0, 0.0, 2.0});
  CHECK(std::abs(k[0]) < 1e-15);
  CHECK(k[1] == doctest::Approx(1.0));
  CHECK(std::abs(k[2]) < 1e-15);
  CHECK(std::abs(k[3]) < 1e-14);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> kappa(8);
    for (double& x : kappa) x = u(rng);
    const auto m = nc_moments(kappa);
    const auto back = free_cumulants(m);
    const auto again = nc_moments(back);
    double scale = 1.0;
    for (double x : m) scale = std::max(scale, std::abs(x));
    for (int i = 0; i < 8; ++i) {
      // Cumulants are recovered up to round-off on the scale of the moments.
      CHECK(std::abs(back[i] - kappa[i]) <= 1e-12 * scale);
      CHECK(std::abs(again[i] - m[i]) <= 1e-12 * std::max(1.0, std::abs(m[i])));
    }
  }
}
