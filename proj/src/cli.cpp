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

#include "blockmod/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

#include <CLI11.hpp>

#include "blockmod/analytic.hpp"
#include "blockmod/opvalued.hpp"

namespace blockmod {

namespace {

json curve_to_json(const DensityCurve& curve) {
  json atoms = json::array();
  for (const auto& a : curve.atoms) atoms.push_back({{"location", a.location}, {"mass", a.mass}});
  return {{"x", curve.grid}, {"density", curve.density}, {"atoms", atoms}};
}

DensityCurve read_curve_file(const std::filesystem::path& path) {
  if (path.extension() != ".json") return read_curve_csv(path);
  const auto j = read_json_file(path);
  DensityCurve curve;
  try {
    curve.grid = j.at("x").get<std::vector<double>>();
    curve.density = j.at("density").get<std::vector<double>>();
    for (const auto& a : j.value("atoms", json::array()))
      curve.atoms.push_back({a.at("location").get<double>(), a.at("mass").get<double>()});
  } catch (const json::exception& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
  if (curve.grid.size() != curve.density.size() || curve.grid.size() < 2)
    throw InvalidInput(path.string() + ": x and density must have the same length of at least 2");
  return curve;
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::filesystem::path require_path(const std::filesystem::path& p, const char* what) {
  if (p.empty()) throw InvalidInput(std::string("missing ") + what + " (flag or config field)");
  return p;
}

LinearBlockMap load_map(const std::filesystem::path& path) { return map_from_json(read_json_file(path)); }

SpectralMeasure load_measure(const std::filesystem::path& path) {
  return measure_from_json(read_json_file(path), path.parent_path());
}

std::string ensemble_name(const EnsembleKind& kind) {
  static const char* names[] = {"gue", "wishart", "rotated"};
  return names[kind.index()];
}

void write_summary(const json& summary, std::ostream& out) { out << summary.dump(2) << '\n'; }

// Flags shared by asymptotic and simulate.
struct CommonFlags {
  std::string config;
  std::string map;
  std::string measure;
  std::string output;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "JSON run configuration");
  cmd->add_option("--map", flags.map, "Map JSON file");
  cmd->add_option("--measure", flags.measure, "Measure JSON file");
  cmd->add_option("-o,--output", flags.output, "Output file");
}

RunConfig merge_config(const CommonFlags& flags) {
  RunConfig config;
  if (!flags.config.empty()) config = load_config(flags.config);
  if (!flags.map.empty()) config.map = flags.map;
  if (!flags.measure.empty()) config.measure = flags.measure;
  if (!flags.output.empty()) config.output = flags.output;
  return config;
}

}  // namespace

Method parse_method(const std::string& name) {
  if (name == "auto") return Method::Auto;
  if (name == "analytic") return Method::Analytic;
  if (name == "opvalued") return Method::Opvalued;
  throw InvalidInput("unknown method '" + name + "' (expected auto, analytic or opvalued)");
}

std::string method_name(Method method) {
  switch (method) {
    case Method::Auto:
      return "auto";
    case Method::Analytic:
      return "analytic";
    case Method::Opvalued:
      return "opvalued";
  }
  return "auto";
}

Method choose_method(Method requested, bool uc, bool square) {
  switch (requested) {
    case Method::Auto:
      if (uc) return Method::Analytic;
      if (square) return Method::Opvalued;
      throw UnsupportedConfiguration(
          "the map fails the unitarity condition and is not square; no solver covers this case");
    case Method::Analytic:
      if (!uc)
        throw UnsupportedConfiguration(
            "method=analytic needs the unitarity condition" +
            std::string(square ? "; use method=opvalued" : " and the map is not square"));
      return Method::Analytic;
    case Method::Opvalued:
      if (!square) throw UnsupportedConfiguration("method=opvalued needs a square map (m == n)");
      return Method::Opvalued;
  }
  return requested;
}

GridSpec make_grid(const GridOverrides& overrides) {
  GridSpec grid;
  if (overrides.xmin || overrides.xmax) {
    if (!overrides.xmin || !overrides.xmax) throw InvalidInput("grid: xmin and xmax must be given together");
    if (!(*overrides.xmin < *overrides.xmax)) throw InvalidInput("grid: xmin must be below xmax");
    grid.xmin = *overrides.xmin;
    grid.xmax = *overrides.xmax;
    grid.auto_range = false;
  }
  if (overrides.points) {
    if (*overrides.points < 3) throw InvalidInput("grid: points must be at least 3");
    grid.points = *overrides.points;
  }
  if (overrides.eps) {
    if (!(*overrides.eps > 0.0)) throw InvalidInput("grid: eps must be positive");
    grid.eps_levels = {*overrides.eps, 2.0 * *overrides.eps};
  }
  return grid;
}

RunConfig load_config(const std::filesystem::path& path) {
  const auto j = read_json_file(path);
  if (!j.is_object()) throw InvalidInput(path.string() + ": configuration must be a JSON object");
  const auto base = path.parent_path();
  RunConfig config;
  try {
    config.map = resolve(j.value("map", std::string()), base);
    config.measure = resolve(j.value("measure", std::string()), base);
    config.method = parse_method(j.value("method", std::string("auto")));
    config.output = resolve(j.value("output", std::string()), base);
    config.format = j.value("format", std::string("csv"));
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      if (g.contains("xmin")) config.grid.xmin = g.at("xmin").get<double>();
      if (g.contains("xmax")) config.grid.xmax = g.at("xmax").get<double>();
      if (g.contains("points")) config.grid.points = g.at("points").get<int>();
      if (g.contains("eps")) config.grid.eps = g.at("eps").get<double>();
    }
    if (j.contains("simulation")) {
      const auto& s = j.at("simulation");
      if (s.contains("d")) config.simulation.d = s.at("d").get<int>();
      if (s.contains("trials")) config.simulation.trials = s.at("trials").get<int>();
      if (s.contains("seed")) config.simulation.seed = s.at("seed").get<std::uint64_t>();
      config.simulation.ensemble = s.value("ensemble", std::string("auto"));
    }
  } catch (const json::exception& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
  if (config.format != "csv" && config.format != "json")
    throw InvalidInput(path.string() + ": format must be csv or json");
  return config;
}

json analyze_map(const LinearBlockMap& map) {
  validate(map);
  const CMatrix choi = build_choi(map);
  json report{{"kind", kind_name(map)}, {"m", map.m}, {"n", map.n}, {"choi_hermitian", is_hermitian(choi)}};
  if (!report["choi_hermitian"].get<bool>()) {
    report["uc"] = false;
    report["suggested_method"] = "none";
    return report;
  }
  const auto analysis = spectral_analysis(choi, map.m, map.n);
  report["eigenvalues"] = std::vector<double>(analysis.eigenvalues.data(),
                                              analysis.eigenvalues.data() + analysis.eigenvalues.size());
  json groups = json::array();
  for (const auto& g : analysis.groups)
    groups.push_back({{"rho", g.rho}, {"rank", g.rank}, {"d", g.d}, {"uc", g.uc_ok}, {"deviation", g.uc_deviation}});
  report["groups"] = groups;
  report["kernel_rank"] = analysis.kernel_rank;
  report["uc"] = analysis.uc;
  const Eigen::VectorXd dual = hermitian_eig(dual_choi(choi, map.m, map.n)).values;
  report["dual_spectrum_deviation"] = (dual - analysis.eigenvalues).cwiseAbs().maxCoeff();
  report["covariance_deviation"] = covariance_check(analysis);
  report["warnings"] = analysis.warnings;
  const bool square = map.m == map.n;
  const bool diagonal = std::holds_alternative<DiagonalSchur>(map.kind);
  std::string suggestion;
  if (analysis.uc)
    suggestion = "method=analytic";
  else if (diagonal)
    suggestion = square ? "method=opvalued or diagonal formula" : "diagonal formula";
  else
    suggestion = square ? "method=opvalued" : "none";
  report["suggested_method"] = suggestion;
  return report;
}

void print_analysis(const json& report, std::ostream& out) {
  out << "map: " << report["kind"].get<std::string>() << " (m=" << report["m"] << ", n=" << report["n"] << ")\n";
  if (!report["choi_hermitian"].get<bool>()) {
    out << "Choi matrix: not Hermitian (the map does not preserve hermiticity)\n";
    return;
  }
  out << "Choi matrix: Hermitian\n";
  out << "eigenvalue groups:\n";
  for (const auto& g : report["groups"])
    out << "  rho=" << std::setw(12) << g["rho"].get<double>() << "  rank=" << g["rank"] << "  d=" << g["d"].get<double>()
        << "  UC: " << (g["uc"].get<bool>() ? "yes" : "no") << " (deviation " << g["deviation"].get<double>() << ")\n";
  out << "kernel rank: " << report["kernel_rank"] << '\n';
  out << "UC: " << (report["uc"].get<bool>() ? "yes" : "no") << '\n';
  out << "dual map spectrum deviation: " << report["dual_spectrum_deviation"].get<double>() << '\n';
  out << "covariance deviation: " << report["covariance_deviation"].get<double>() << '\n';
  for (const auto& w : report["warnings"]) out << "warning: " << w.get<std::string>() << '\n';
  out << "suggested: " << report["suggested_method"].get<std::string>() << '\n';
}

AsymptoticResult compute_asymptotic(const LinearBlockMap& map, const SpectralMeasure& mu, Method method,
                                    const GridSpec& grid) {
  validate(map);
  validate(mu);
  const auto analysis = spectral_analysis(map);
  AsymptoticResult out;
  if (!analysis.uc && method != Method::Opvalued && std::holds_alternative<DiagonalSchur>(map.kind) &&
      (method == Method::Analytic || map.m != map.n)) {
    out.curve = diagonal_map_modified(mu, std::get<DiagonalSchur>(map.kind).alpha, grid);
    out.method = Method::Analytic;
    out.telemetry = {{"route", "diagonal"}};
    return out;
  }
  out.method = choose_method(method, analysis.uc, map.m == map.n);
  if (out.method == Method::Analytic) {
    auto r = modified_measure_uc(mu, analysis, grid);
    out.curve = std::move(r.curve);
    out.telemetry = {{"route", r.route},
                     {"points", r.telemetry.points},
                     {"total_iterations", r.telemetry.total_iterations},
                     {"max_iterations", r.telemetry.max_iterations},
                     {"fixed_point_points", r.telemetry.fixed_point_points},
                     {"max_residual", r.telemetry.max_residual}};
    if (r.closed_form) out.telemetry["closed_form"] = measure_to_json(*r.closed_form);
  } else {
    OpvaluedOptions options;
    options.grid = grid;
    auto r = modified_density_numeric(map, mu, options);
    out.curve = std::move(r.curve);
    const auto& t = r.telemetry;
    out.telemetry = {{"route", "subordination"},
                     {"delta", r.delta},
                     {"raw_mass", r.raw_mass},
                     {"active_slots", t.active_slots},
                     {"total_iterations", t.total_iterations},
                     {"max_iterations", t.max_iterations},
                     {"damped_points", t.damped_points},
                     {"stalled_points", t.stalled_points},
                     {"herglotz_violations", t.herglotz_violations}};
    if (r.stability_l1) out.telemetry["stability_l1"] = *r.stability_l1;
  }
  return out;
}

EnsembleSpec ensemble_for(const SpectralMeasure& mu, int m, const SimulationOverrides& overrides) {
  EnsembleSpec spec;
  spec.m = m;
  spec.d = overrides.d.value_or(std::max(1, static_cast<int>(std::lround(1000.0 / m))));
  spec.trials = overrides.trials.value_or(20);
  spec.seed = overrides.seed.value_or(1);
  const auto& kind = overrides.ensemble;
  const auto* s = std::get_if<Semicircle>(&mu);
  const auto* f = std::get_if<FreePoisson>(&mu);
  if (kind == "gue" || (kind == "auto" && s)) {
    if (!s) throw InvalidInput("ensemble gue needs a semicircle measure");
    spec.kind = GueEnsemble{s->mean, s->variance};
  } else if (kind == "wishart" || (kind == "auto" && f)) {
    if (!f) throw InvalidInput("ensemble wishart needs a free_poisson measure");
    spec.kind = WishartEnsemble{f->rate};
  } else if (kind == "rotated" || kind == "auto") {
    spec.kind = RotatedEnsemble{mu};
  } else {
    throw InvalidInput("unknown ensemble '" + kind + "' (expected auto, gue, wishart or rotated)");
  }
  validate(spec);
  return spec;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Asymptotic spectra and Monte Carlo for block-modified random matrices", "blockmod"};
  app.require_subcommand(1);

  auto* analyze = app.add_subcommand("analyze-map", "Choi spectrum, unitarity check and solver routing of a map");
  std::string analyze_map_path, analyze_format = "text";
  analyze->add_option("--map", analyze_map_path, "Map JSON file")->required();
  analyze->add_option("--format", analyze_format, "text or json")->check(CLI::IsMember({"text", "json"}));

  auto* asymptotic = app.add_subcommand("asymptotic", "Limiting eigenvalue density of the block-modified matrix");
  CommonFlags asym;
  add_common(asymptotic, asym);
  std::string method_flag, format_flag;
  GridOverrides grid_flags;
  asymptotic->add_option("--method", method_flag, "auto, analytic or opvalued")
      ->check(CLI::IsMember({"auto", "analytic", "opvalued"}));
  asymptotic->add_option("--format", format_flag, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  asymptotic->add_option("--xmin", grid_flags.xmin, "Grid lower end");
  asymptotic->add_option("--xmax", grid_flags.xmax, "Grid upper end");
  asymptotic->add_option("--points", grid_flags.points, "Grid points");
  asymptotic->add_option("--eps", grid_flags.eps, "Smallest height above the real axis");

  auto* simulate_cmd = app.add_subcommand("simulate", "Eigenvalue pool of finite block-modified samples");
  CommonFlags sim;
  add_common(simulate_cmd, sim);
  SimulationOverrides sim_flags;
  sim_flags.ensemble.clear();
  simulate_cmd->add_option("--ensemble", sim_flags.ensemble, "auto, gue, wishart or rotated")
      ->check(CLI::IsMember({"auto", "gue", "wishart", "rotated"}));
  simulate_cmd->add_option("--d", sim_flags.d, "Number of blocks per side");
  simulate_cmd->add_option("--trials", sim_flags.trials, "Independent samples");
  simulate_cmd->add_option("--seed", sim_flags.seed, "64-bit seed");

  auto* compare = app.add_subcommand("compare", "KS and CDF-L1 distance between a pool and a curve");
  std::string curve_path, pool_path, histogram_path, summary_path;
  double threshold = 0.05;
  compare->add_option("--curve", curve_path, "Curve file (.csv or .json)")->required();
  compare->add_option("--pool", pool_path, "Eigenvalue pool CSV")->required();
  compare->add_option("--threshold", threshold, "Largest accepted KS distance");
  compare->add_option("--histogram", histogram_path, "Histogram CSV output");
  compare->add_option("-o,--output", summary_path, "Summary JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*analyze) {
      const auto report = analyze_map(load_map(analyze_map_path));
      if (analyze_format == "json")
        write_summary(report, out);
      else
        print_analysis(report, out);
      return kExitOk;
    }

    if (*asymptotic) {
      auto config = merge_config(asym);
      if (!method_flag.empty()) config.method = parse_method(method_flag);
      if (!format_flag.empty()) config.format = format_flag;
      if (grid_flags.xmin) config.grid.xmin = grid_flags.xmin;
      if (grid_flags.xmax) config.grid.xmax = grid_flags.xmax;
      if (grid_flags.points) config.grid.points = grid_flags.points;
      if (grid_flags.eps) config.grid.eps = grid_flags.eps;
      const auto map = load_map(require_path(config.map, "--map"));
      const auto mu = load_measure(require_path(config.measure, "--measure"));
      const auto output = require_path(config.output, "--output");
      const auto result = compute_asymptotic(map, mu, config.method, make_grid(config.grid));
      if (config.format == "json") {
        auto doc = curve_to_json(result.curve);
        doc["method"] = method_name(result.method);
        doc["telemetry"] = result.telemetry;
        std::ofstream file(output);
        if (!file) throw InvalidInput("cannot write " + output.string());
        file << std::setprecision(17) << doc.dump(1) << '\n';
      } else {
        write_curve_csv(output, result.curve);
      }
      write_summary({{"method", method_name(result.method)},
                     {"output", output.string()},
                     {"points", result.curve.grid.size()},
                     {"atoms", result.curve.atoms.size()},
                     {"mass", curve_mass(result.curve)},
                     {"telemetry", result.telemetry}},
                    out);
      return kExitOk;
    }

    if (*simulate_cmd) {
      auto config = merge_config(sim);
      if (!sim_flags.ensemble.empty()) config.simulation.ensemble = sim_flags.ensemble;
      if (sim_flags.d) config.simulation.d = sim_flags.d;
      if (sim_flags.trials) config.simulation.trials = sim_flags.trials;
      if (sim_flags.seed) config.simulation.seed = sim_flags.seed;
      const auto map = load_map(require_path(config.map, "--map"));
      const auto mu = load_measure(require_path(config.measure, "--measure"));
      const auto output = require_path(config.output, "--output");
      const auto spec = ensemble_for(mu, map.m, config.simulation);
      const auto spectrum = simulate(spec, map);
      write_pool_csv(output, spectrum.pool);
      write_summary({{"ensemble", ensemble_name(spec.kind)},
                     {"d", spec.d},
                     {"m", spec.m},
                     {"trials", spec.trials},
                     {"seed", spec.seed},
                     {"pool_size", spectrum.pool.size()},
                     {"wall_seconds", spectrum.wall_seconds},
                     {"moments", empirical_moments(spectrum.pool, 4)},
                     {"output", output.string()}},
                    out);
      return kExitOk;
    }

    if (*compare) {
      const auto curve = read_curve_file(curve_path);
      const auto spectrum = pool_spectrum(read_pool_csv(pool_path));
      const auto cmp = empirical_vs_predicted(spectrum, curve);
      const bool pass = cmp.ks <= threshold;
      const json summary{{"ks", cmp.ks},
                         {"cdf_l1", cmp.cdf_l1},
                         {"moments", empirical_moments(spectrum.pool, 4)},
                         {"curve_moments", {curve_moment(curve, 1), curve_moment(curve, 2)}},
                         {"threshold", threshold},
                         {"pass", pass}};
      if (!histogram_path.empty()) {
        std::ofstream file(histogram_path);
        if (!file) throw InvalidInput("cannot write " + histogram_path);
        file << std::setprecision(17) << "left,right,density\n";
        const auto& h = cmp.histogram;
        for (std::size_t i = 0; i < h.density.size(); ++i)
          file << h.edges[i] << ',' << h.edges[i + 1] << ',' << h.density[i] << '\n';
      }
      if (!summary_path.empty()) {
        std::ofstream file(summary_path);
        if (!file) throw InvalidInput("cannot write " + summary_path);
        file << summary.dump(2) << '\n';
      }
      write_summary(summary, out);
      return pass ? kExitOk : kExitComparison;
    }
  } catch (const UnsupportedConfiguration& e) {
    err << "blockmod: unsupported configuration: " << e.what() << '\n';
    return kExitUnsupported;
  } catch (const UnsupportedVariant& e) {
    err << "blockmod: unsupported configuration: " << e.what() << '\n';
    return kExitUnsupported;
  } catch (const InvalidInput& e) {
    err << "blockmod: invalid input: " << e.what() << '\n';
    return kExitInput;
  } catch (const json::exception& e) {
    err << "blockmod: invalid input: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "blockmod: invalid input: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "blockmod: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitInput;
}

}  // namespace blockmod
