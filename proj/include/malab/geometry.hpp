#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace malab {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend Point2 operator*(Point2 a, double s) { return {s * a.x, s * a.y}; }
  friend bool operator==(Point2 a, Point2 b) { return a.x == b.x && a.y == b.y; }
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double norm2(Point2 a) { return a.x * a.x + a.y * a.y; }

/// Signed area of a vertex loop (positive for counterclockwise).
double signed_area(std::span<const Point2> loop);
/// Area centroid of a vertex loop; falls back to the vertex mean for degenerate loops.
Point2 loop_centroid(std::span<const Point2> loop);

/// Convex hull (counterclockwise, collinear points dropped) by monotone chain.
std::vector<Point2> convex_hull_2d(std::vector<Point2> points);

/// A polygon cell produced by half-plane clipping. `edge_tags[i]` labels the edge
/// from `vertices[i]` to `vertices[i+1]` with the id of the constraint that created it.
struct Cell {
  std::vector<Point2> vertices;
  std::vector<int> edge_tags;

  bool empty() const { return vertices.size() < 3; }
  double area() const;
};

/// Keeps the part of `cell` with normal·x <= offset; new edges are tagged `tag`.
Cell clip_halfplane(const Cell& cell, Point2 normal, double offset, int tag);

/// Bounded, strictly convex polygon with counterclockwise vertices.
class ConvexPolygon {
 public:
  ConvexPolygon() = default;

  /// Validates and normalizes a vertex loop: clockwise input is reversed,
  /// collinear vertices are pruned. Throws DegenerateGeometry on violations.
  static ConvexPolygon from_vertices(std::vector<Point2> vertices);
  static ConvexPolygon rectangle(double xmin, double ymin, double xmax, double ymax);
  static ConvexPolygon regular(int sides, double radius, Point2 center = {0.0, 0.0});

  const std::vector<Point2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  double area() const;
  Point2 centroid() const;
  double diameter() const;
  void bounding_box(Point2& lo, Point2& hi) const;

  /// Signed distance to the boundary: positive inside, negative outside.
  /// Outside values are the distance to the nearest supporting line (a lower bound).
  double signed_distance(Point2 p) const;
  bool contains(Point2 p, double tol = 0.0) const { return signed_distance(p) >= -tol; }
  /// Euclidean distance from p to the boundary loop.
  double boundary_distance(Point2 p) const;

  /// Center and radius of the largest inscribed disc.
  void chebyshev(Point2& center, double& radius) const;

  ConvexPolygon translated(Point2 shift) const;
  ConvexPolygon dilated(Point2 about, double factor) const;

  Cell as_cell(int first_tag = -1) const;

 private:
  std::vector<Point2> vertices_;
};

/// Hausdorff distance between two convex polygons (exact: the one-sided
/// distances are maximized at vertices).
double hausdorff_distance(const ConvexPolygon& a, const ConvexPolygon& b);

/// Area of the intersection of two convex vertex loops.
double intersection_area(std::span<const Point2> a, std::span<const Point2> b);

}  // namespace malab
