#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pwflow/game.hpp"

// Artifact plumbing: schema-versioned JSON, CSV with a header row, content
// hashing for manifests, and a minimal static SVG emitter.

namespace pwflow {

using Json = nlohmann::json;

inline constexpr const char* kSchema = "pwflow/v1";
inline constexpr const char* kToolVersion = "pwflow 1.0.0";

// Round-trippable decimal form, shortest that restores the exact double.
std::string format_double(double x);

std::uint64_t fnv1a64(std::string_view data);
std::string fnv1a64_hex(std::string_view data);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// Matrix JSON: {"rows": m, "cols": n, "entries": [[...], ...]}, row-major,
// entries either JSON numbers or "a/b" strings; rational mode keeps strings
// exact.  A bare array of rows or a legacy "matrix" key is also accepted.
template <class T>
T scalar_from_json(const Json& v) {
  if (v.is_string()) {
    Rational r = parse_rational(v.get<std::string>());
    if constexpr (scalar_traits<T>::exact) return r;
    else return to_double(r);
  }
  if constexpr (scalar_traits<T>::exact)
    return parse_rational(v.dump());
  else
    return v.get<double>();
}

template <class T>
Json scalar_to_json(const T& x) {
  if constexpr (scalar_traits<T>::exact)
    return rational_string(x);
  else
    return x;
}

template <class T>
GameMatrix<T> game_from_json(const Json& j) {
  const Json& rows = j.contains("entries") ? j.at("entries")
                     : j.contains("matrix") ? j.at("matrix")
                                            : j;
  if (!rows.is_array() || rows.empty() || !rows[0].is_array())
    throw NumericError("game_from_json: expected an array of rows");
  Mat<T> m(rows.size(), rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) throw NumericError("game_from_json: ragged rows");
    for (size_t jj = 0; jj < m.cols(); ++jj) m(i, jj) = scalar_from_json<T>(rows[i][jj]);
  }
  return GameMatrix<T>(m);
}

template <class T>
Json game_to_json(const GameMatrix<T>& g) {
  Json rows = Json::array();
  for (size_t i = 0; i < g.rows(); ++i) {
    Json row = Json::array();
    for (size_t j = 0; j < g.cols(); ++j) row.push_back(scalar_to_json(g.m(i, j)));
    rows.push_back(row);
  }
  return Json{{"schema", kSchema}, {"rows", g.rows()}, {"cols", g.cols()}, {"entries", rows}};
}

// CSV accumulator; str() renders header + rows, '.' decimal, UTF-8, LF.
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::vector<std::string>& add_row() { return rows.emplace_back(); }
  std::string str() const;
};

// One per artifact directory; references every produced file by content hash.
struct RunManifest {
  Json config = Json::object();
  std::map<std::string, std::string> inputs;   // source path -> hash
  std::map<std::string, std::string> outputs;  // file name -> hash
  Json stats = Json::object();

  Json to_json() const;
};

// Writes dir/name and records its hash in the manifest.
void write_artifact(const std::string& dir, const std::string& name,
                    const std::string& content, RunManifest& manifest);
void finalize_manifest(const std::string& dir, const RunManifest& manifest);

// SVG 1.1, scatter and polyline series only, auto-scaled viewport.
struct SvgSeries {
  std::vector<std::array<double, 2>> points;
  bool polyline = false;
  std::string color = "#1f6fb2";
  double size = 1.5;  // marker radius / stroke width
};

std::string render_svg(const std::vector<SvgSeries>& series, int width = 640,
                       int height = 640);

}  // namespace pwflow
