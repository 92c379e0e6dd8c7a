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

// JSON and CSV formats of maps, measures, curves and eigenvalue pools.
//
// Matrices are arrays of rows; an entry is a number or a [re, im] pair.
// Maps:
//   {"kind": "transpose" | "reduction", "n": 2}
//   {"kind": "generalized", "n": 2, "alpha": 1, "beta": 2, "gamma": 3}
//   {"kind": "replicate", "n": 2, "x": 1.5}
//   {"kind": "trace_form", "a": matrix}
//   {"kind": "unitary_conj", "u": matrix}
//   {"kind": "weyl_mixture", "n": 2, "coeffs": [...], "unitaries": [matrix, ...]}  (unitaries optional)
//   {"kind": "diagonal_schur", "alpha": [[...], ...]}
//   {"kind": "generic", "m": 2, "n": 2, "coefficients": [[i, j, k, l, re, im], ...]}
//   {"kind": "generic", "m": 2, "n": 2, "choi": matrix}
// Measures:
//   {"kind": "semicircle", "mean": 0, "variance": 1}
//   {"kind": "free_poisson", "rate": 1}
//   {"kind": "compound_free_poisson", "parameter": [[t, w], ...]}
//   {"kind": "bernoulli", "t": 0.5}
//   {"kind": "arcsine", "lower": -2, "upper": 2}
//   {"kind": "atomic", "atoms": [[x, p], ...]}
//   {"kind": "numeric", "csv": "curve.csv"}

#ifndef BLOCKMOD_JSON_IO_HPP
#define BLOCKMOD_JSON_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "blockmod/choi.hpp"
#include "blockmod/measures.hpp"

namespace blockmod {

using json = nlohmann::json;

/// Parse failures and schema violations throw InvalidInput.
json read_json_file(const std::filesystem::path& path);

CMatrix matrix_from_json(const json& j);
json matrix_to_json(const CMatrix& a);

LinearBlockMap map_from_json(const json& j);
json map_to_json(const LinearBlockMap& map);

/// `base` resolves relative paths of numeric measures.
SpectralMeasure measure_from_json(const json& j, const std::filesystem::path& base = {});
json measure_to_json(const SpectralMeasure& mu);

/// `<stem>.atoms.json` next to the CSV file.
std::filesystem::path atoms_sidecar(const std::filesystem::path& csv);

/// Header `x,density`, one row per grid node; atoms go to the sidecar.
void write_curve_csv(const std::filesystem::path& path, const DensityCurve& curve);
/// Reads the sidecar when present.
DensityCurve read_curve_csv(const std::filesystem::path& path);

/// Header `value`, one eigenvalue per row.
void write_pool_csv(const std::filesystem::path& path, const std::vector<double>& values);
std::vector<double> read_pool_csv(const std::filesystem::path& path);

}  // namespace blockmod

#endif  // BLOCKMOD_JSON_IO_HPP
