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

#include "blockmod/json_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "internal.hpp"

namespace blockmod {

using internal::overloaded;

namespace {

const json& field(const json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key))
    throw InvalidInput(std::string(where) + ": missing field '" + key + "'");
  return j.at(key);
}

template <typename T>
T get(const json& j, const char* key, const char* where) {
  try {
    return field(j, key, where).get<T>();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string(where) + ": field '" + key + "': " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const char* where) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return get<T>(j, key, where);
}

cplx entry_from_json(const json& e) {
  if (e.is_number()) return {e.get<double>(), 0.0};
  if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number())
    return {e[0].get<double>(), e[1].get<double>()};
  throw InvalidInput("matrix entry must be a number or a [re, im] pair, got " + e.dump());
}

json entry_to_json(cplx z) {
  if (z.imag() == 0.0) return z.real();
  return json::array({z.real(), z.imag()});
}

std::vector<Atom> pairs_from_json(const json& j, const char* where) {
  if (!j.is_array()) throw InvalidInput(std::string(where) + ": expected an array of [x, weight] pairs");
  std::vector<Atom> out;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw InvalidInput(std::string(where) + ": expected [x, weight], got " + p.dump());
    out.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return out;
}

json pairs_to_json(const std::vector<Atom>& atoms) {
  json out = json::array();
  for (const auto& a : atoms) out.push_back({a.location, a.mass});
  return out;
}

std::vector<std::string> csv_rows(const std::filesystem::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw InvalidInput(path.string() + ": expected header '" + header + "', got '" + line + "'");
  std::vector<std::string> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) rows.push_back(line);
  }
  return rows;
}

double parse_number(const std::string& s, const std::filesystem::path& path) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || s.find_first_not_of(" \t", used) != std::string::npos)
    throw InvalidInput(path.string() + ": not a number: '" + s + "'");
  return v;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

}  // namespace

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

CMatrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw InvalidInput("matrix must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  CMatrix a(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw InvalidInput("matrix rows must all have length " + std::to_string(cols));
    for (Eigen::Index c = 0; c < cols; ++c) a(r, c) = entry_from_json(row[static_cast<std::size_t>(c)]);
  }
  return a;
}

json matrix_to_json(const CMatrix& a) {
  json out = json::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < a.cols(); ++c) row.push_back(entry_to_json(a(r, c)));
    out.push_back(row);
  }
  return out;
}

LinearBlockMap map_from_json(const json& j) {
  const auto kind = get<std::string>(j, "kind", "map");
  if (kind == "transpose") return transpose_map(get<int>(j, "n", "transpose"));
  if (kind == "reduction") return reduction_map(get<int>(j, "n", "reduction"));
  if (kind == "generalized")
    return generalized_map(get<int>(j, "n", "generalized"), get_or(j, "alpha", 0.0, "generalized"),
                           get_or(j, "beta", 0.0, "generalized"), get_or(j, "gamma", 0.0, "generalized"));
  if (kind == "replicate") return replicate_map(get<int>(j, "n", "replicate"), get<double>(j, "x", "replicate"));
  if (kind == "trace_form") return trace_form_map(matrix_from_json(field(j, "a", "trace_form")));
  if (kind == "unitary_conj") return unitary_conj_map(matrix_from_json(field(j, "u", "unitary_conj")));
  if (kind == "weyl_mixture") {
    const auto coeffs = get<std::vector<double>>(j, "coeffs", "weyl_mixture");
    std::vector<CMatrix> unitaries;
    if (j.contains("unitaries")) {
      for (const auto& u : j.at("unitaries")) unitaries.push_back(matrix_from_json(u));
    } else {
      unitaries = weyl_operators(get<int>(j, "n", "weyl_mixture"));
      if (coeffs.size() > unitaries.size()) throw InvalidInput("weyl_mixture: more coefficients than Weyl operators");
      unitaries.resize(coeffs.size());
    }
    return weyl_mixture_map(coeffs, unitaries);
  }
  if (kind == "diagonal_schur") {
    const auto rows = get<std::vector<std::vector<double>>>(j, "alpha", "diagonal_schur");
    if (rows.empty() || rows.front().empty()) throw InvalidInput("diagonal_schur: alpha must be non-empty");
    Eigen::MatrixXd alpha(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows.front().size()) throw InvalidInput("diagonal_schur: ragged alpha");
      for (std::size_t c = 0; c < rows[r].size(); ++c) alpha(r, c) = rows[r][c];
    }
    return diagonal_schur_map(alpha);
  }
  if (kind == "generic") {
    const int m = get<int>(j, "m", "generic"), n = get<int>(j, "n", "generic");
    if (m < 1 || n < 1) throw InvalidInput("generic: m and n must be positive");
    if (j.contains("choi")) {
      const CMatrix c = matrix_from_json(j.at("choi"));
      if (c.rows() != n * m || c.cols() != n * m) throw InvalidInput("generic: choi must be (n m) x (n m)");
      return generic_map(coeffs_from_choi(c, m, n));
    }
    CoefficientTensor coeffs(n, m);
    for (const auto& e : field(j, "coefficients", "generic")) {
      if (!e.is_array() || (e.size() != 5 && e.size() != 6))
        throw InvalidInput("generic: coefficient entries are [i, j, k, l, re] or [i, j, k, l, re, im]");
      const int i = e[0].get<int>(), jj = e[1].get<int>(), k = e[2].get<int>(), l = e[3].get<int>();
      if (i < 0 || i >= n || l < 0 || l >= n || jj < 0 || jj >= m || k < 0 || k >= m)
        throw InvalidInput("generic: coefficient index out of range in " + e.dump());
      coeffs(i, jj, k, l) = cplx(e[4].get<double>(), e.size() == 6 ? e[5].get<double>() : 0.0);
    }
    return generic_map(coeffs);
  }
  throw InvalidInput("map: unknown kind '" + kind + "'");
}

json map_to_json(const LinearBlockMap& map) {
  json out{{"kind", kind_name(map)}, {"m", map.m}, {"n", map.n}};
  std::visit(overloaded{
                 [](const Transpose&) {},
                 [](const Reduction&) {},
                 [&](const TraceForm& t) { out["a"] = matrix_to_json(t.a); },
                 [&](const Replicate& r) { out["x"] = r.x; },
                 [&](const UnitaryConj& u) { out["u"] = matrix_to_json(u.u); },
                 [&](const Generalized& g) {
                   out["alpha"] = g.alpha;
                   out["beta"] = g.beta;
                   out["gamma"] = g.gamma;
                 },
                 [&](const WeylMixture& w) {
                   out["coeffs"] = w.coeffs;
                   out["unitaries"] = json::array();
                   for (const auto& u : w.unitaries) out["unitaries"].push_back(matrix_to_json(u));
                 },
                 [&](const DiagonalSchur& d) {
                   json rows = json::array();
                   for (Eigen::Index r = 0; r < d.alpha.rows(); ++r) {
                     json row = json::array();
                     for (Eigen::Index c = 0; c < d.alpha.cols(); ++c) row.push_back(d.alpha(r, c));
                     rows.push_back(row);
                   }
                   out["alpha"] = rows;
                 },
                 [&](const Generic& g) {
                   json entries = json::array();
                   for (int i = 0; i < map.n; ++i)
                     for (int j = 0; j < map.m; ++j)
                       for (int k = 0; k < map.m; ++k)
                         for (int l = 0; l < map.n; ++l) {
                           const cplx c = g.coeffs(i, j, k, l);
                           if (c != 0.0) entries.push_back({i, j, k, l, c.real(), c.imag()});
                         }
                   out["coefficients"] = entries;
                 },
             },
             map.kind);
  return out;
}

SpectralMeasure measure_from_json(const json& j, const std::filesystem::path& base) {
  const auto kind = get<std::string>(j, "kind", "measure");
  SpectralMeasure mu;
  if (kind == "semicircle") {
    mu = Semicircle{get_or(j, "mean", 0.0, "semicircle"), get_or(j, "variance", 1.0, "semicircle")};
  } else if (kind == "free_poisson") {
    mu = FreePoisson{get_or(j, "rate", 1.0, "free_poisson")};
  } else if (kind == "compound_free_poisson") {
    mu = CompoundFreePoisson{pairs_from_json(field(j, "parameter", kind.c_str()), "compound_free_poisson")};
  } else if (kind == "bernoulli") {
    mu = Bernoulli{get_or(j, "t", 0.5, "bernoulli")};
  } else if (kind == "arcsine") {
    mu = Arcsine{get_or(j, "lower", -2.0, "arcsine"), get_or(j, "upper", 2.0, "arcsine")};
  } else if (kind == "atomic") {
    mu = Atomic{pairs_from_json(field(j, "atoms", kind.c_str()), "atomic")};
  } else if (kind == "numeric") {
    std::filesystem::path csv = get<std::string>(j, "csv", "numeric");
    if (csv.is_relative() && !base.empty()) csv = base / csv;
    mu = Numeric{read_curve_csv(csv)};
  } else {
    throw InvalidInput("measure: unknown kind '" + kind + "'");
  }
  validate(mu);
  return mu;
}

json measure_to_json(const SpectralMeasure& mu) {
  json out{{"kind", kind_name(mu)}};
  std::visit(overloaded{
                 [&](const Semicircle& s) {
                   out["mean"] = s.mean;
                   out["variance"] = s.variance;
                 },
                 [&](const FreePoisson& f) { out["rate"] = f.rate; },
                 [&](const CompoundFreePoisson& c) { out["parameter"] = pairs_to_json(c.parameter); },
                 [&](const Bernoulli& b) { out["t"] = b.t; },
                 [&](const Arcsine& a) {
                   out["lower"] = a.lower;
                   out["upper"] = a.upper;
                 },
                 [&](const Atomic& a) { out["atoms"] = pairs_to_json(a.atoms); },
                 [&](const Numeric& n) { out["points"] = n.curve.grid.size(); },
             },
             mu);
  return out;
}

std::filesystem::path atoms_sidecar(const std::filesystem::path& csv) {
  auto out = csv;
  out.replace_filename(csv.stem().string() + ".atoms.json");
  return out;
}

void write_curve_csv(const std::filesystem::path& path, const DensityCurve& curve) {
  auto out = open_output(path);
  out << "x,density\n";
  for (std::size_t i = 0; i < curve.grid.size(); ++i) out << curve.grid[i] << ',' << curve.density[i] << '\n';
  json atoms = json::array();
  for (const auto& a : curve.atoms) atoms.push_back({{"location", a.location}, {"mass", a.mass}});
  auto side = open_output(atoms_sidecar(path));
  side << atoms.dump(2) << '\n';
}

DensityCurve read_curve_csv(const std::filesystem::path& path) {
  DensityCurve curve;
  for (const auto& row : csv_rows(path, "x,density")) {
    const auto comma = row.find(',');
    if (comma == std::string::npos) throw InvalidInput(path.string() + ": expected two columns in '" + row + "'");
    curve.grid.push_back(parse_number(row.substr(0, comma), path));
    curve.density.push_back(parse_number(row.substr(comma + 1), path));
  }
  if (curve.grid.size() < 2) throw InvalidInput(path.string() + ": a curve needs at least two rows");
  const auto side = atoms_sidecar(path);
  if (std::filesystem::exists(side)) {
    const auto atoms = read_json_file(side);
    if (!atoms.is_array()) throw InvalidInput(side.string() + ": expected an array of atoms");
    for (const auto& a : atoms)
      curve.atoms.push_back({get<double>(a, "location", "atom"), get<double>(a, "mass", "atom")});
  }
  return curve;
}

void write_pool_csv(const std::filesystem::path& path, const std::vector<double>& values) {
  auto out = open_output(path);
  out << "value\n";
  for (double v : values) out << v << '\n';
}

std::vector<double> read_pool_csv(const std::filesystem::path& path) {
  std::vector<double> out;
  for (const auto& row : csv_rows(path, "value")) out.push_back(parse_number(row, path));
  if (out.empty()) throw InvalidInput(path.string() + ": no values");
  return out;
}

}  // namespace blockmod
