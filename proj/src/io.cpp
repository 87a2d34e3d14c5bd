#include "malab/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "malab/errors.hpp"

namespace malab {
namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lines.push_back(line);
  }
  return lines;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw IoError("malformed number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

void write_nodes_csv(const std::string& path, const NodalTable& table) {
  auto out = open_out(path);
  out << "x,y,value,boundary\n";
  for (std::size_t i = 0; i < table.points.size(); ++i)
    out << format_double(table.points[i].x) << ',' << format_double(table.points[i].y) << ','
        << format_double(table.values[i]) << ',' << (table.boundary[i] ? 1 : 0) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

NodalTable read_nodes_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines.front() != "x,y,value,boundary")
    throw IoError("'" + path + "': expected header x,y,value,boundary");
  NodalTable t;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cols = split_csv_line(lines[r]);
    if (cols.size() != 4) throw IoError("'" + path + "' line " + std::to_string(r + 1) + ": expected 4 columns");
    t.points.push_back({parse_double(cols[0]), parse_double(cols[1])});
    t.values.push_back(parse_double(cols[2]));
    if (cols[3] != "0" && cols[3] != "1")
      throw IoError("'" + path + "' line " + std::to_string(r + 1) + ": boundary must be 0 or 1");
    t.boundary.push_back(cols[3] == "1");
  }
  return t;
}

NodalTable to_table(const PLConvexFunction& f) {
  NodalTable t;
  const auto pts = f.nodes().points();
  t.points.assign(pts.begin(), pts.end());
  t.values = f.values();
  t.boundary = f.nodes().boundary_flags();
  return t;
}

void write_polygon_csv(const std::string& path, const ConvexPolygon& poly) {
  auto out = open_out(path);
  out << "x,y\n";
  for (const auto& p : poly.vertices()) out << format_double(p.x) << ',' << format_double(p.y) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

ConvexPolygon read_polygon_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines.front() != "x,y") throw IoError("'" + path + "': expected header x,y");
  std::vector<Point2> v;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cols = split_csv_line(lines[r]);
    if (cols.size() != 2) throw IoError("'" + path + "' line " + std::to_string(r + 1) + ": expected 2 columns");
    v.push_back({parse_double(cols[0]), parse_double(cols[1])});
  }
  return ConvexPolygon::from_vertices(std::move(v));
}

}  // namespace malab
