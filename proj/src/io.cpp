// SPDX-License-Identifier: Apache-2.0

#include "cpwl/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cpwl {

namespace {

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json matrix_json(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vector_json(m.row(i).transpose()));
  return a;
}

std::vector<double> doubles(const Json& j, std::size_t layer, const char* what) {
  if (!j.is_array()) throw SpecError(layer, std::string(what) + " must be an array");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw SpecError(layer, std::string(what) + " must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

Vector vector_from(const Json& j, std::size_t layer, const char* what) {
  const auto d = doubles(j, layer, what);
  Vector v(static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) v[static_cast<Eigen::Index>(i)] = d[i];
  return v;
}

Matrix matrix_from(const Json& j, std::size_t layer, const char* what) {
  if (!j.is_array() || j.empty()) throw SpecError(layer, std::string(what) + " must be a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Matrix m;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Vector r = vector_from(j[static_cast<std::size_t>(i)], layer, what);
    if (i == 0) m.resize(rows, r.size());
    if (r.size() != m.cols()) throw SpecError(layer, std::string(what) + " has ragged rows");
    m.row(i) = r.transpose();
  }
  return m;
}

const Json& field(const Json& j, const char* key, std::size_t layer) {
  if (!j.is_object() || !j.contains(key)) {
    throw SpecError(layer, std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

std::size_t size_field(const Json& j, const char* key, std::size_t layer) {
  const Json& v = field(j, key, layer);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw SpecError(layer, std::string("'") + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

Json layer_json(const LayerSpec& layer) {
  Json j;
  std::visit(
      [&](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, AffineLayer>) {
          j["type"] = "affine";
          j["matrix"] = matrix_json(l.map.matrix);
          j["offset"] = vector_json(l.map.offset);
        } else if constexpr (std::is_same_v<T, PointwiseLayer>) {
          j["type"] = "pointwise";
          j["units"] = Json::array();
          for (const auto& u : l.units) {
            j["units"].push_back(
                {{"breakpoints", u.breakpoints()}, {"slopes", u.slopes()}, {"anchor_value", u.anchor_value()}});
          }
        } else if constexpr (std::is_same_v<T, MaxoutLayer>) {
          j["type"] = "maxout";
          j["rank"] = l.rank;
          j["weights"] = Json::array();
          j["offsets"] = Json::array();
          for (const auto& u : l.units) {
            j["weights"].push_back(matrix_json(u.matrix));
            j["offsets"].push_back(vector_json(u.offset));
          }
        } else if constexpr (std::is_same_v<T, GroupSortLayer>) {
          j["type"] = "groupsort";
          j["group_size"] = l.group_size;
        } else {
          j["type"] = "pwlu2d";
          j["grid_m"] = l.grid_m;
          j["values"] = Json::array();
          for (const auto& v : l.values) {
            Json flat = Json::array();
            for (Eigen::Index i = 0; i < v.rows(); ++i) {
              for (Eigen::Index k = 0; k < v.cols(); ++k) flat.push_back(v(i, k));
            }
            j["values"].push_back(std::move(flat));
          }
          Json mats = Json::array(), offs = Json::array();
          for (const auto& r : l.readin) {
            mats.push_back(matrix_json(r.matrix));
            offs.push_back(vector_json(r.offset));
          }
          j["readin"] = {{"matrix", mats}, {"offset", offs}};
        }
      },
      layer);
  return j;
}

LayerSpec layer_from(const Json& j, std::size_t i) {
  const Json& type = field(j, "type", i);
  if (!type.is_string()) throw SpecError(i, "'type' must be a string");
  const std::string t = type.get<std::string>();
  if (t == "affine") {
    Matrix m = matrix_from(field(j, "matrix", i), i, "matrix");
    Vector b = vector_from(field(j, "offset", i), i, "offset");
    if (b.size() != m.rows()) throw SpecError(i, "offset length must equal matrix rows");
    return AffineLayer{AffineMap(std::move(m), std::move(b))};
  }
  if (t == "pointwise") {
    const Json& units = field(j, "units", i);
    if (!units.is_array()) throw SpecError(i, "'units' must be an array");
    PointwiseLayer p;
    for (const auto& u : units) {
      const Json& a = field(u, "anchor_value", i);
      if (!a.is_number()) throw SpecError(i, "'anchor_value' must be a number");
      try {
        p.units.emplace_back(doubles(field(u, "breakpoints", i), i, "breakpoints"),
                             doubles(field(u, "slopes", i), i, "slopes"), a.get<double>());
      } catch (const std::invalid_argument& e) {
        throw SpecError(i, e.what());
      }
    }
    return p;
  }
  if (t == "maxout") {
    MaxoutLayer m;
    m.rank = size_field(j, "rank", i);
    const Json& w = field(j, "weights", i);
    const Json& o = field(j, "offsets", i);
    if (!w.is_array() || !o.is_array() || w.size() != o.size()) {
      throw SpecError(i, "'weights' and 'offsets' must be arrays of equal length");
    }
    for (std::size_t k = 0; k < w.size(); ++k) {
      Matrix mk = matrix_from(w[k], i, "weights");
      Vector bk = vector_from(o[k], i, "offsets");
      if (bk.size() != mk.rows()) throw SpecError(i, "maxout offsets must match weights");
      m.units.emplace_back(std::move(mk), std::move(bk));
    }
    return m;
  }
  if (t == "groupsort") return GroupSortLayer{size_field(j, "group_size", i)};
  if (t == "pwlu2d") {
    Pwlu2dLayer p;
    p.grid_m = size_field(j, "grid_m", i);
    const auto M = static_cast<Eigen::Index>(p.grid_m);
    const Json& vals = field(j, "values", i);
    if (!vals.is_array()) throw SpecError(i, "'values' must be an array");
    for (const auto& v : vals) {
      const auto flat = doubles(v, i, "values");
      if (static_cast<Eigen::Index>(flat.size()) != M * M) throw SpecError(i, "each values entry needs grid_m^2 numbers");
      Matrix m(M, M);
      for (Eigen::Index a = 0; a < M; ++a) {
        for (Eigen::Index b = 0; b < M; ++b) m(a, b) = flat[static_cast<std::size_t>(a * M + b)];
      }
      p.values.push_back(std::move(m));
    }
    const Json& r = field(j, "readin", i);
    const Json& mats = field(r, "matrix", i);
    const Json& offs = field(r, "offset", i);
    if (!mats.is_array() || !offs.is_array() || mats.size() != offs.size()) {
      throw SpecError(i, "readin matrix and offset lists must have equal length");
    }
    for (std::size_t k = 0; k < mats.size(); ++k) {
      Matrix mk = matrix_from(mats[k], i, "readin matrix");
      Vector bk = vector_from(offs[k], i, "readin offset");
      if (bk.size() != mk.rows()) throw SpecError(i, "readin offset must match matrix rows");
      p.readin.emplace_back(std::move(mk), std::move(bk));
    }
    return p;
  }
  throw SpecError(i, "unknown layer type '" + t + "'");
}

}  // namespace

Json network_to_json(const NetworkSpec& net) {
  Json j;
  j["input_dim"] = net.input_dim;
  j["layers"] = Json::array();
  for (const auto& l : net.layers) j["layers"].push_back(layer_json(l));
  if (!net.metadata.empty()) j["metadata"] = net.metadata;
  return j;
}

NetworkSpec network_from_json(const Json& j) {
  if (!j.is_object()) throw std::invalid_argument("network spec must be a JSON object");
  NetworkSpec net;
  net.input_dim = size_field(j, "input_dim", SpecError::npos);
  const Json& layers = field(j, "layers", SpecError::npos);
  if (!layers.is_array()) throw std::invalid_argument("'layers' must be an array");
  for (std::size_t i = 0; i < layers.size(); ++i) net.layers.push_back(layer_from(layers[i], i));
  if (j.contains("metadata") && j["metadata"].is_string()) net.metadata = j["metadata"].get<std::string>();
  net.validate();
  return net;
}

Json path_to_json(const PolygonalPath& path) {
  Json v = Json::array();
  for (const auto& x : path.vertices) v.push_back(vector_json(x));
  return Json{{"vertices", v}};
}

PolygonalPath path_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("vertices") || !j["vertices"].is_array()) {
    throw std::invalid_argument("path JSON needs a 'vertices' array");
  }
  PolygonalPath p;
  for (const auto& v : j["vertices"]) {
    if (!v.is_array()) throw std::invalid_argument("path vertices must be arrays");
    Vector x(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw std::invalid_argument("path coordinates must be numbers");
      x[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    p.vertices.push_back(std::move(x));
  }
  p.validate();
  return p;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json read_json(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read '" + file + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument("malformed JSON in '" + file + "': " + e.what());
  }
}

void write_text(const std::string& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write '" + file + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + file + "'");
}

NetworkSpec read_network(const std::string& file) { return network_from_json(read_json(file)); }

void write_network(const std::string& file, const NetworkSpec& net) {
  write_text(file, dump(network_to_json(net)));
}

PolygonalPath read_path(const std::string& file) { return path_from_json(read_json(file)); }

Json region_set_to_json(const RegionSet& rs) {
  Json cells = Json::array();
  for (const auto& r : rs.regions) {
    Json cons = Json::array();
    for (const auto& h : r.constraints) cons.push_back({{"normal", vector_json(h.normal)}, {"offset", h.offset}});
    cells.push_back({{"constraints", cons},
                     {"piece", {{"matrix", matrix_json(r.piece.matrix)}, {"offset", vector_json(r.piece.offset)}}},
                     {"witness", vector_json(r.witness)},
                     {"radius", r.radius},
                     {"pattern", r.pattern}});
  }
  Json j{{"input_dim", rs.input_dim}, {"cells", cells}};
  if (rs.domain.bounded) {
    j["domain"] = {{"lo", vector_json(rs.domain.lo)}, {"hi", vector_json(rs.domain.hi)}};
  } else {
    j["domain"] = "unbounded";
  }
  return j;
}

Json count_report_to_json(const CountReport& r) {
  Json factors = Json::array();
  for (const auto& f : r.upper_factors) factors.push_back(to_string(f));
  return {{"cell_count", r.cell_count},
          {"distinct_piece_count", r.distinct_piece_count},
          {"connected_piece_count", r.connected_piece_count},
          {"compositional_upper", to_string(r.compositional_upper)},
          {"upper_factors", factors}};
}

Json knot_report_to_json(const KnotReport& r) {
  Json knots = Json::array();
  for (const auto& k : r.knots) {
    knots.push_back({{"t", k.t},
                     {"segment", k.segment},
                     {"layer", k.layer},
                     {"at_vertex", k.at_vertex},
                     {"degenerate", k.degenerate}});
  }
  return {{"count", r.count},
          {"length", r.length},
          {"density", r.density},
          {"degenerate_count", r.degenerate_count},
          {"knots", knots}};
}

Json bound_report_to_json(const BoundReport& r) {
  Json factors = Json::array();
  for (const auto& f : r.factors) factors.push_back(to_string(f));
  Json j{{"family", r.family},
         {"formula", r.formula},
         {"params", r.params},
         {"value", to_string(r.value)},
         {"factors", factors}};
  if (r.envelope_upper != 0) {
    j["envelope_lower"] = to_string(r.envelope_lower);
    j["envelope_upper"] = to_string(r.envelope_upper);
  }
  return j;
}

Json mc_estimate_to_json(const McEstimate& e, bool with_values) {
  auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
  Json j{{"mean", e.mean}, {"se", e.se}, {"trials", e.trials}, {"bound", num(e.bound)}};
  if (!e.by_depth.empty()) {
    j["by_depth"] = e.by_depth;
    j["se_by_depth"] = e.se_by_depth;
  }
  if (with_values) j["values"] = e.values;
  return j;
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void CsvTable::add(std::vector<std::string> row) {
  if (row.size() != header_.size()) throw std::invalid_argument("CSV row width mismatch");
  rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
  auto cell = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  std::string out;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + cell(r[i]);
    out += "\n";
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

}  // namespace cpwl
