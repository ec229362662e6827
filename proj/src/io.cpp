#include "pwflow/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pwflow {

std::string format_double(double x) {
  char buf[40];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  (void)ec;
  return std::string(buf, end);
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string fnv1a64_hex(std::string_view data) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(data)));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NumericError("read_file: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NumericError("write_file: cannot open " + path);
  out << content;
}

std::string Csv::str() const {
  std::ostringstream ss;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) ss << ',';
      ss << cells[i];
    }
    ss << '\n';
  };
  emit(header);
  for (const auto& r : rows) emit(r);
  return ss.str();
}

Json RunManifest::to_json() const {
  Json j;
  j["schema"] = kSchema;
  j["tool_version"] = kToolVersion;
  j["config"] = config;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["stats"] = stats;
  return j;
}

void write_artifact(const std::string& dir, const std::string& name,
                    const std::string& content, RunManifest& manifest) {
  write_file((std::filesystem::path(dir) / name).string(), content);
  manifest.outputs[name] = fnv1a64_hex(content);
}

void finalize_manifest(const std::string& dir, const RunManifest& manifest) {
  write_file((std::filesystem::path(dir) / "manifest.json").string(),
             manifest.to_json().dump(2) + "\n");
}

std::string render_svg(const std::vector<SvgSeries>& series, int width, int height) {
  double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  bool first = true;
  for (const auto& s : series)
    for (const auto& p : s.points) {
      if (first) {
        xlo = xhi = p[0];
        ylo = yhi = p[1];
        first = false;
      }
      xlo = std::min(xlo, p[0]);
      xhi = std::max(xhi, p[0]);
      ylo = std::min(ylo, p[1]);
      yhi = std::max(yhi, p[1]);
    }
  double spanx = xhi - xlo, spany = yhi - ylo;
  if (spanx <= 0) spanx = 1;
  if (spany <= 0) spany = 1;
  const double margin = 20;
  auto sx = [&](double x) { return margin + (x - xlo) / spanx * (width - 2 * margin); };
  auto sy = [&](double y) { return height - margin - (y - ylo) / spany * (height - 2 * margin); };

  std::ostringstream ss;
  ss << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width
     << "\" height=\"" << height << "\">\n";
  for (const auto& s : series) {
    if (s.polyline) {
      ss << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\""
         << s.size << "\" points=\"";
      for (const auto& p : s.points) ss << format_double(sx(p[0])) << ',' << format_double(sy(p[1])) << ' ';
      ss << "\"/>\n";
    } else {
      for (const auto& p : s.points)
        ss << "<circle cx=\"" << format_double(sx(p[0])) << "\" cy=\"" << format_double(sy(p[1]))
           << "\" r=\"" << s.size << "\" fill=\"" << s.color << "\"/>\n";
    }
  }
  ss << "</svg>\n";
  return ss.str();
}

}  // namespace pwflow
