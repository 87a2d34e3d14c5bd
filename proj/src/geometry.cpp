#include "malab/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

#include "malab/errors.hpp"

namespace malab {

double signed_area(std::span<const Point2> loop) {
  const std::size_t n = loop.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) twice += cross(loop[i], loop[(i + 1) % n]);
  return 0.5 * twice;
}

Point2 loop_centroid(std::span<const Point2> loop) {
  const std::size_t n = loop.size();
  Point2 mean{};
  if (n == 0) return mean;
  for (const auto& p : loop) mean = mean + p;
  mean = (1.0 / static_cast<double>(n)) * mean;
  // Shift to the mean before accumulating to limit cancellation.
  double a = 0.0;
  Point2 c{};
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 p = loop[i] - mean;
    const Point2 q = loop[(i + 1) % n] - mean;
    const double w = cross(p, q);
    a += w;
    c = c + w * (p + q);
  }
  if (std::abs(a) <= 1e-300) return mean;
  return mean + (1.0 / (3.0 * a)) * c;
}

std::vector<Point2> convex_hull_2d(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  auto turn = [](Point2 o, Point2 a, Point2 b) { return cross(a - o, b - o); };
  for (const auto& p : pts) {
    while (k >= 2 && turn(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = pts.size() - 1; i-- > 0;) {
    while (k >= lower && turn(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double Cell::area() const { return signed_area(vertices); }

Cell clip_halfplane(const Cell& cell, Point2 normal, double offset, int tag) {
  Cell out;
  const std::size_t n = cell.vertices.size();
  if (n == 0) return out;
  out.vertices.reserve(n + 1);
  out.edge_tags.reserve(n + 1);
  std::vector<double> side(n);
  bool all_in = true;
  bool all_out = true;
  for (std::size_t i = 0; i < n; ++i) {
    side[i] = dot(normal, cell.vertices[i]) - offset;
    if (side[i] > 0.0) all_in = false;
    else all_out = false;
  }
  if (all_in) return cell;
  if (all_out) return out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    const Point2 a = cell.vertices[i];
    const Point2 b = cell.vertices[j];
    const bool a_in = side[i] <= 0.0;
    const bool b_in = side[j] <= 0.0;
    if (a_in) {
      out.vertices.push_back(a);
      // Edge a->b keeps its tag whether or not it is cut short.
      out.edge_tags.push_back(cell.edge_tags[i]);
      if (!b_in) {
        const double t = side[i] / (side[i] - side[j]);
        out.vertices.push_back(a + t * (b - a));
        out.edge_tags.push_back(tag);
      }
    } else if (b_in) {
      const double t = side[i] / (side[i] - side[j]);
      out.vertices.push_back(a + t * (b - a));
      out.edge_tags.push_back(cell.edge_tags[i]);
    }
  }
  // Drop duplicate consecutive vertices produced by cuts through a vertex.
  Cell clean;
  const std::size_t m = out.vertices.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Point2 p = out.vertices[i];
    const Point2 q = out.vertices[(i + 1) % m];
    if (p == q) continue;
    clean.vertices.push_back(p);
    clean.edge_tags.push_back(out.edge_tags[i]);
  }
  if (clean.vertices.size() < 3) return Cell{};
  return clean;
}

ConvexPolygon ConvexPolygon::from_vertices(std::vector<Point2> v) {
  if (v.size() < 3) throw DegenerateGeometry("polygon needs at least 3 vertices");
  for (const auto& p : v)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DegenerateGeometry("polygon vertex is not finite");
  if (signed_area(v) < 0.0) std::reverse(v.begin(), v.end());
  double diam = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i + 1; j < v.size(); ++j) diam = std::max(diam, norm(v[i] - v[j]));
  if (diam <= 0.0) throw DegenerateGeometry("polygon has zero diameter");
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i + 1; j < v.size(); ++j)
      if (norm(v[i] - v[j]) <= 1e-12 * diam) throw DegenerateGeometry("polygon has repeated vertices");

  // Prune collinear vertices (repeat until stable).
  bool changed = true;
  while (changed && v.size() >= 3) {
    changed = false;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Point2 a = v[(i + v.size() - 1) % v.size()];
      const Point2 b = v[i];
      const Point2 c = v[(i + 1) % v.size()];
      const double turn = cross(b - a, c - b);
      if (std::abs(turn) <= 1e-14 * diam * diam) {
        v.erase(v.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
  if (v.size() < 3) throw DegenerateGeometry("polygon is degenerate after pruning collinear vertices");
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point2 a = v[(i + v.size() - 1) % v.size()];
    const Point2 b = v[i];
    const Point2 c = v[(i + 1) % v.size()];
    if (cross(b - a, c - b) <= 0.0) throw DegenerateGeometry("polygon is not strictly convex");
  }
  // A star-shaped turning sequence can still wind twice; require total turning 2*pi.
  double turning = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point2 a = v[(i + v.size() - 1) % v.size()];
    const Point2 b = v[i];
    const Point2 c = v[(i + 1) % v.size()];
    turning += std::atan2(cross(b - a, c - b), dot(b - a, c - b));
  }
  if (std::abs(turning - 2.0 * std::numbers::pi) > 1e-6) throw DegenerateGeometry("polygon is self-intersecting");
  if (signed_area(v) <= 0.0) throw DegenerateGeometry("polygon has zero area");
  ConvexPolygon poly;
  poly.vertices_ = std::move(v);
  return poly;
}

ConvexPolygon ConvexPolygon::rectangle(double xmin, double ymin, double xmax, double ymax) {
  return from_vertices({{xmin, ymin}, {xmax, ymin}, {xmax, ymax}, {xmin, ymax}});
}

ConvexPolygon ConvexPolygon::regular(int sides, double radius, Point2 center) {
  if (sides < 3) throw DegenerateGeometry("regular polygon needs at least 3 sides");
  std::vector<Point2> v;
  v.reserve(static_cast<std::size_t>(sides));
  for (int k = 0; k < sides; ++k) {
    const double t = 2.0 * std::numbers::pi * k / sides;
    v.push_back({center.x + radius * std::cos(t), center.y + radius * std::sin(t)});
  }
  return from_vertices(std::move(v));
}

double ConvexPolygon::area() const { return signed_area(vertices_); }

Point2 ConvexPolygon::centroid() const { return loop_centroid(vertices_); }

double ConvexPolygon::diameter() const {
  double d = 0.0;
  for (std::size_t i = 0; i < vertices_.size(); ++i)
    for (std::size_t j = i + 1; j < vertices_.size(); ++j) d = std::max(d, norm(vertices_[i] - vertices_[j]));
  return d;
}

void ConvexPolygon::bounding_box(Point2& lo, Point2& hi) const {
  lo = hi = vertices_.front();
  for (const auto& p : vertices_) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
  }
}

double ConvexPolygon::signed_distance(Point2 p) const {
  double d = std::numeric_limits<double>::infinity();
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = vertices_[i];
    const Point2 e = vertices_[(i + 1) % n] - a;
    // Inward normal of a counterclockwise edge is the left normal.
    d = std::min(d, cross(e, p - a) / norm(e));
  }
  return d;
}

double ConvexPolygon::boundary_distance(Point2 p) const {
  double d = std::numeric_limits<double>::infinity();
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = vertices_[i];
    const Point2 e = vertices_[(i + 1) % n] - a;
    const double t = std::clamp(dot(p - a, e) / norm2(e), 0.0, 1.0);
    d = std::min(d, norm(p - (a + t * e)));
  }
  return d;
}

void ConvexPolygon::chebyshev(Point2& center, double& radius) const {
  // LP: maximize r subject to n_k . c + r <= b_k. The optimum sits on a vertex
  // of the feasible region, i.e. three tight constraints.
  const std::size_t n = vertices_.size();
  std::vector<Point2> normals(n);
  std::vector<double> offsets(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = vertices_[i];
    const Point2 e = vertices_[(i + 1) % n] - a;
    const Point2 outward{e.y / norm(e), -e.x / norm(e)};
    normals[i] = outward;
    offsets[i] = dot(outward, a);
  }
  radius = -1.0;
  center = centroid();
  const double scale = diameter();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) {
        const std::size_t idx[3] = {i, j, k};
        double m[3][4];
        for (int r = 0; r < 3; ++r) {
          m[r][0] = normals[idx[r]].x;
          m[r][1] = normals[idx[r]].y;
          m[r][2] = 1.0;
          m[r][3] = offsets[idx[r]];
        }
        const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        if (std::abs(det) < 1e-12) continue;
        auto solve_col = [&](int col) {
          double c[3][3];
          for (int r = 0; r < 3; ++r)
            for (int s = 0; s < 3; ++s) c[r][s] = (s == col) ? m[r][3] : m[r][s];
          return (c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1]) - c[0][1] * (c[1][0] * c[2][2] - c[1][2] * c[2][0]) +
                  c[0][2] * (c[1][0] * c[2][1] - c[1][1] * c[2][0])) /
                 det;
        };
        const Point2 c{solve_col(0), solve_col(1)};
        const double r = solve_col(2);
        if (r <= radius) continue;
        bool feasible = true;
        for (std::size_t q = 0; q < n && feasible; ++q)
          if (dot(normals[q], c) + r > offsets[q] + 1e-12 * scale) feasible = false;
        if (feasible) {
          radius = r;
          center = c;
        }
      }
  if (radius <= 0.0) {
    // Triangles and other inputs where every triple is the full constraint set.
    center = centroid();
    radius = signed_distance(center);
  }
}

ConvexPolygon ConvexPolygon::translated(Point2 shift) const {
  std::vector<Point2> v = vertices_;
  for (auto& p : v) p = p + shift;
  return from_vertices(std::move(v));
}

ConvexPolygon ConvexPolygon::dilated(Point2 about, double factor) const {
  if (!(factor > 0.0)) throw DegenerateGeometry("dilation factor must be positive");
  std::vector<Point2> v = vertices_;
  for (auto& p : v) p = about + factor * (p - about);
  return from_vertices(std::move(v));
}

Cell ConvexPolygon::as_cell(int first_tag) const {
  Cell c;
  c.vertices = vertices_;
  c.edge_tags.resize(vertices_.size());
  for (std::size_t i = 0; i < vertices_.size(); ++i) c.edge_tags[i] = first_tag - static_cast<int>(i);
  return c;
}

double hausdorff_distance(const ConvexPolygon& a, const ConvexPolygon& b) {
  auto one_sided = [](const ConvexPolygon& from, const ConvexPolygon& to) {
    double d = 0.0;
    for (const auto& p : from.vertices()) {
      if (to.contains(p)) continue;
      d = std::max(d, to.boundary_distance(p));
    }
    return d;
  };
  return std::max(one_sided(a, b), one_sided(b, a));
}

double intersection_area(std::span<const Point2> a, std::span<const Point2> b) {
  if (a.size() < 3 || b.size() < 3) return 0.0;
  Cell cell;
  cell.vertices.assign(a.begin(), a.end());
  if (signed_area(cell.vertices) < 0.0) std::reverse(cell.vertices.begin(), cell.vertices.end());
  cell.edge_tags.assign(cell.vertices.size(), 0);
  std::vector<Point2> clip(b.begin(), b.end());
  if (signed_area(clip) < 0.0) std::reverse(clip.begin(), clip.end());
  for (std::size_t i = 0; i < clip.size() && !cell.empty(); ++i) {
    const Point2 p = clip[i];
    const Point2 e = clip[(i + 1) % clip.size()] - p;
    const Point2 outward{e.y, -e.x};
    cell = clip_halfplane(cell, outward, dot(outward, p), 0);
  }
  return cell.empty() ? 0.0 : cell.area();
}

}  // namespace malab
