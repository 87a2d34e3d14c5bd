#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "malab/convex_geom.hpp"
#include "malab/geometry.hpp"

namespace malab {

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);
/// Strict full-string parse; throws IoError on malformed input.
double parse_double(std::string_view s);

/// Splits one CSV line on commas (no quoting; the formats here never need it).
std::vector<std::string> split_csv_line(std::string_view line);

/// Nodal data in the `x,y,value,boundary` format.
struct NodalTable {
  std::vector<Point2> points;
  std::vector<double> values;
  std::vector<bool> boundary;
};

void write_nodes_csv(const std::string& path, const NodalTable& table);
NodalTable read_nodes_csv(const std::string& path);
NodalTable to_table(const PLConvexFunction& f);

/// Polygon vertex loops in the `x,y` format.
void write_polygon_csv(const std::string& path, const ConvexPolygon& poly);
ConvexPolygon read_polygon_csv(const std::string& path);

}  // namespace malab
