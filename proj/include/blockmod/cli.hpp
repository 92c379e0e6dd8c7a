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

// Command-line commands: analyze-map, asymptotic, simulate, compare.
//
// Exit codes: 0 success, 1 numerical failure, 2 input error, 3 unsupported
// configuration, 4 comparison above threshold.

#ifndef BLOCKMOD_CLI_HPP
#define BLOCKMOD_CLI_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "blockmod/json_io.hpp"
#include "blockmod/simulate.hpp"
#include "blockmod/freeconv.hpp"

namespace blockmod {

enum ExitCode : int {
  kExitOk = 0,
  kExitNumerical = 1,
  kExitInput = 2,
  kExitUnsupported = 3,
  kExitComparison = 4,
};

enum class Method { Auto, Analytic, Opvalued };

Method parse_method(const std::string& name);
std::string method_name(Method method);

/// Auto takes the analytic path under the unitarity condition and the
/// operator-valued solver for other square maps. Throws
/// UnsupportedConfiguration when the requested path cannot serve the map.
Method choose_method(Method requested, bool uc, bool square);

struct GridOverrides {
  std::optional<double> xmin;
  std::optional<double> xmax;
  std::optional<int> points;
  std::optional<double> eps;
};

GridSpec make_grid(const GridOverrides& overrides);

struct SimulationOverrides {
  std::optional<int> d;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  /// auto, gue, wishart or rotated.
  std::string ensemble = "auto";
};

struct RunConfig {
  std::filesystem::path map;
  std::filesystem::path measure;
  Method method = Method::Auto;
  GridOverrides grid;
  SimulationOverrides simulation;
  std::filesystem::path output;
  std::string format = "csv";
};

/// Reads a JSON run configuration; paths are relative to its directory.
RunConfig load_config(const std::filesystem::path& path);

/// Map summary: Choi groups, unitarity verdicts, dual-map and covariance checks.
json analyze_map(const LinearBlockMap& map);
void print_analysis(const json& report, std::ostream& out);

struct AsymptoticResult {
  DensityCurve curve;
  Method method = Method::Auto;
  json telemetry;
};

AsymptoticResult compute_asymptotic(const LinearBlockMap& map, const SpectralMeasure& mu, Method method,
                                    const GridSpec& grid = {});

/// The ensemble whose limit is mu: GUE for semicircles, Wishart for free
/// Poisson laws, rotated otherwise; `kind` forces one of them.
EnsembleSpec ensemble_for(const SpectralMeasure& mu, int m, const SimulationOverrides& overrides);

/// Entry point of the executable; never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace blockmod

#endif  // BLOCKMOD_CLI_HPP
