// SPDX-License-Identifier: Apache-2.0
//
// JSON (network specs, paths, reports) and CSV serialization. JSON objects
// have sorted keys and floats use the shortest round-trip representation,
// so writing then reading a spec reproduces it exactly.

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpwl/bounds.hpp"
#include "cpwl/core.hpp"
#include "cpwl/geometry.hpp"
#include "cpwl/paths.hpp"
#include "cpwl/stochastic.hpp"

namespace cpwl {

using Json = nlohmann::json;

/// File could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Schema: {"input_dim", "layers": [...], "metadata"?}; layer objects are
/// affine {matrix, offset}, pointwise {units: [{breakpoints, slopes,
/// anchor_value}]}, maxout {rank, weights[unit][k][input], offsets[unit][k]},
/// groupsort {group_size}, pwlu2d {grid_m, values[unit][i * M + j],
/// readin: {matrix[unit][2][input], offset[unit][2]}}.
Json network_to_json(const NetworkSpec& net);
/// Throws SpecError on schema or dimension violations (layer() is npos for
/// missing top-level fields) and std::invalid_argument when the document or
/// its layer list has the wrong JSON type.
NetworkSpec network_from_json(const Json& j);

Json path_to_json(const PolygonalPath& path);
PolygonalPath path_from_json(const Json& j);

/// Canonical text: 2-space indentation, trailing newline.
std::string dump(const Json& j);
/// Throws IoError when unreadable, std::invalid_argument on malformed JSON.
Json read_json(const std::string& file);
/// Throws IoError when the file cannot be written.
void write_text(const std::string& file, const std::string& text);

NetworkSpec read_network(const std::string& file);
void write_network(const std::string& file, const NetworkSpec& net);
PolygonalPath read_path(const std::string& file);

Json region_set_to_json(const RegionSet& rs);
Json count_report_to_json(const CountReport& r);
Json knot_report_to_json(const KnotReport& r);
Json bound_report_to_json(const BoundReport& r);
Json mc_estimate_to_json(const McEstimate& e, bool with_values = false);

/// %.17g formatting, "nan"/"inf" for non-finite values.
std::string csv_number(double v);

/// Minimal CSV table: quoted only when a cell contains a comma or quote.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void add(std::vector<std::string> row);
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace cpwl
