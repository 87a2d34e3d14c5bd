#include "malab/convex_geom.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "malab/errors.hpp"
#include "malab/random.hpp"

namespace malab {
namespace {

std::uint64_t fnv1a(std::span<const Point2> pts, const std::vector<bool>& flags) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    mix(std::bit_cast<std::uint64_t>(pts[i].x));
    mix(std::bit_cast<std::uint64_t>(pts[i].y));
    mix(flags[i] ? 1U : 0U);
  }
  return h;
}

// Voronoi cells of the interior nodes, clipped to the domain. Candidate
// neighbors come from a bucket grid, visited ring by ring until the ring
// distance exceeds twice the current cell radius.
std::vector<Cell> voronoi_cells(const ConvexPolygon& domain, std::span<const Point2> pts,
                                const std::vector<std::size_t>& interior) {
  std::vector<Cell> cells(pts.size());
  if (interior.empty()) return cells;
  Point2 lo, hi;
  domain.bounding_box(lo, hi);
  const double bucket = std::max(std::sqrt(domain.area() / static_cast<double>(interior.size())), 1e-300);
  const int nx = std::max(1, static_cast<int>(std::ceil((hi.x - lo.x) / bucket)));
  const int ny = std::max(1, static_cast<int>(std::ceil((hi.y - lo.y) / bucket)));
  std::vector<std::vector<std::size_t>> buckets(static_cast<std::size_t>(nx) * ny);
  auto bucket_of = [&](Point2 p, int& bx, int& by) {
    bx = std::clamp(static_cast<int>((p.x - lo.x) / bucket), 0, nx - 1);
    by = std::clamp(static_cast<int>((p.y - lo.y) / bucket), 0, ny - 1);
  };
  for (std::size_t i : interior) {
    int bx, by;
    bucket_of(pts[i], bx, by);
    buckets[static_cast<std::size_t>(by) * nx + bx].push_back(i);
  }
  const Cell base = domain.as_cell(-1);
  for (std::size_t i : interior) {
    const Point2 xi = pts[i];
    Cell cell = base;
    int bx, by;
    bucket_of(xi, bx, by);
    const int max_ring = std::max(nx, ny);
    for (int r = 0; r <= max_ring; ++r) {
      for (int gy = by - r; gy <= by + r; ++gy) {
        if (gy < 0 || gy >= ny) continue;
        for (int gx = bx - r; gx <= bx + r; ++gx) {
          if (gx < 0 || gx >= nx) continue;
          if (std::max(std::abs(gx - bx), std::abs(gy - by)) != r) continue;
          for (std::size_t j : buckets[static_cast<std::size_t>(gy) * nx + gx]) {
            if (j == i) continue;
            const Point2 xj = pts[j];
            const Point2 normal = xj - xi;
            const double offset = 0.5 * (norm2(xj) - norm2(xi));
            cell = clip_halfplane(cell, normal, offset, static_cast<int>(j));
          }
        }
      }
      double radius = 0.0;
      for (const auto& v : cell.vertices) radius = std::max(radius, norm(v - xi));
      if (static_cast<double>(r) * bucket >= 2.0 * radius) break;
    }
    cells[i] = std::move(cell);
  }
  return cells;
}

// Plane of a lifted triangle as z = g.x + c.
void triangle_plane(const Point2& a, double za, const Point2& b, double zb, const Point2& c, double zc, Point2& grad,
                    double& offset) {
  const Point2 u = b - a;
  const Point2 w = c - a;
  const double det = cross(u, w);
  const double du = zb - za;
  const double dw = zc - za;
  grad = {(du * w.y - dw * u.y) / det, (u.x * dw - w.x * du) / det};
  offset = za - dot(grad, a);
}

struct Planes {
  std::vector<Point2> group_grad;
  std::vector<double> group_offset;
  std::vector<Point2> face_grad;
  std::vector<double> face_offset;
};

// Boundary nodes interpolated along a slanted domain edge are collinear only up
// to rounding, so the exact hull may contain needle faces spanning three such
// nodes. Their planes are nearly vertical and useless numerically; the needles
// have no area, so dropping them leaves the function unchanged.
LowerHull drop_needles(LowerHull hull, std::span<const Point2> pts) {
  std::vector<Triangle> faces;
  std::vector<int> groups;
  for (std::size_t f = 0; f < hull.faces.size(); ++f) {
    const auto& t = hull.faces[f];
    const Point2 a = pts[t[0]], b = pts[t[1]], c = pts[t[2]];
    const double longest = std::max({norm2(b - a), norm2(c - b), norm2(a - c)});
    if (std::abs(cross(b - a, c - a)) <= 1e-10 * longest) continue;
    faces.push_back(t);
    groups.push_back(hull.plane_group[f]);
  }
  hull.faces = std::move(faces);
  hull.plane_group = std::move(groups);
  return hull;
}

Planes hull_planes(const LowerHull& hull, std::span<const Point2> pts, std::span<const double> z) {
  Planes planes;
  int groups = 0;
  for (int g : hull.plane_group) groups = std::max(groups, g + 1);
  std::vector<int> best(static_cast<std::size_t>(groups), -1);
  std::vector<double> best_area(static_cast<std::size_t>(groups), -1.0);
  for (std::size_t f = 0; f < hull.faces.size(); ++f) {
    const auto& t = hull.faces[f];
    const double area = std::abs(cross(pts[t[1]] - pts[t[0]], pts[t[2]] - pts[t[0]]));
    const int g = hull.plane_group[f];
    if (area > best_area[g]) {
      best_area[g] = area;
      best[g] = static_cast<int>(f);
    }
  }
  planes.group_grad.resize(static_cast<std::size_t>(groups));
  planes.group_offset.resize(static_cast<std::size_t>(groups));
  for (int g = 0; g < groups; ++g) {
    if (best[g] < 0) continue;
    const auto& t = hull.faces[best[g]];
    triangle_plane(pts[t[0]], z[t[0]], pts[t[1]], z[t[1]], pts[t[2]], z[t[2]], planes.group_grad[g],
                   planes.group_offset[g]);
  }
  planes.face_grad.resize(hull.faces.size());
  planes.face_offset.resize(hull.faces.size());
  for (std::size_t f = 0; f < hull.faces.size(); ++f) {
    planes.face_grad[f] = planes.group_grad[hull.plane_group[f]];
    planes.face_offset[f] = planes.group_offset[hull.plane_group[f]];
  }
  return planes;
}

double max_affine(const std::vector<Point2>& grads, const std::vector<double>& offsets, Point2 x) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grads.size(); ++k) best = std::max(best, dot(grads[k], x) + offsets[k]);
  return best;
}

std::vector<double> interpolate_hull(const LowerHull& hull, const Planes& planes, std::span<const Point2> pts,
                                     std::span<const double> z) {
  std::vector<double> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (hull.on_hull[i]) {
      out[i] = z[i];
    } else {
      out[i] = std::min(z[i], max_affine(planes.face_grad, planes.face_offset, pts[i]));
    }
  }
  return out;
}

// Points on a straight side of the projected hull are collinear only up to
// rounding, and a point bulging outward by an ulp would otherwise count as an
// extreme point. The envelope restricted to a side is the 1D lower convex chain
// of the data on that side, so values there are lowered to that chain before
// lifting; this leaves the envelope of exactly collinear data unchanged.
std::vector<double> side_chain_values(std::span<const Point2> pts, std::span<const double> z,
                                      std::vector<bool>& lowered) {
  std::vector<double> out(z.begin(), z.end());
  lowered.assign(pts.size(), false);
  auto hull = convex_hull_2d(std::vector<Point2>(pts.begin(), pts.end()));
  if (hull.size() < 3) return out;
  double diam = 0.0;
  for (const auto& a : hull)
    for (const auto& b : hull) diam = std::max(diam, norm(b - a));
  const double tol = 1e-10 * diam;
  // Merge nearly collinear hull vertices into one side.
  for (bool changed = true; changed && hull.size() > 3;) {
    changed = false;
    for (std::size_t i = 0; i < hull.size(); ++i) {
      const Point2 a = hull[(i + hull.size() - 1) % hull.size()];
      const Point2 b = hull[(i + 1) % hull.size()];
      if (std::abs(cross(b - a, hull[i] - a)) <= tol * norm(b - a)) {
        hull.erase(hull.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
  for (std::size_t e = 0; e < hull.size(); ++e) {
    const Point2 a = hull[e];
    const Point2 d = hull[(e + 1) % hull.size()] - a;
    const double len = norm(d);
    std::vector<std::pair<double, std::size_t>> side;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Point2 r = pts[i] - a;
      const double t = dot(r, d) / len;
      if (std::abs(cross(d, r)) <= tol * len && t >= -tol && t <= len + tol) side.push_back({t, i});
    }
    if (side.size() < 3) continue;
    std::sort(side.begin(), side.end());
    std::vector<std::size_t> chain;
    for (std::size_t k = 0; k < side.size(); ++k) {
      const auto [t, i] = side[k];
      while (chain.size() >= 2) {
        const double t0 = side[chain[chain.size() - 2]].first, z0 = z[side[chain[chain.size() - 2]].second];
        const double t1 = side[chain.back()].first, z1 = z[side[chain.back()].second];
        if ((t1 - t0) * (z[i] - z0) - (z1 - z0) * (t - t0) <= 0.0)
          chain.pop_back();
        else
          break;
      }
      chain.push_back(k);
    }
    for (std::size_t c = 0; c + 1 < chain.size(); ++c) {
      const auto [t0, i0] = side[chain[c]];
      const auto [t1, i1] = side[chain[c + 1]];
      for (std::size_t k = chain[c] + 1; k < chain[c + 1]; ++k) {
        const auto [t, i] = side[k];
        const double s = t1 > t0 ? (t - t0) / (t1 - t0) : 0.0;
        const double zc = (1 - s) * z[i0] + s * z[i1];
        if (zc < out[i]) {
          out[i] = zc;
          lowered[i] = true;
        }
      }
    }
  }
  return out;
}

std::vector<Point3> lift(std::span<const Point2> pts, std::span<const double> z) {
  std::vector<Point3> lifted(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) lifted[i] = {pts[i].x, pts[i].y, z[i]};
  return lifted;
}

}  // namespace

NodeSet NodeSet::build(ConvexPolygon domain, std::vector<Point2> points, std::vector<bool> boundary) {
  if (points.size() != boundary.size()) throw PreconditionError("node set: points and boundary flags differ in length");
  if (domain.size() < 3) throw DegenerateGeometry("node set: empty domain");
  const double diam = domain.diameter();
  auto impl = std::make_shared<Impl>();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point2 p = points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw PreconditionError("node set: non-finite node");
    if (boundary[i]) {
      if (domain.boundary_distance(p) > 1e-10 * diam || domain.signed_distance(p) < -1e-10 * diam)
        throw PreconditionError("node set: boundary node " + std::to_string(i) + " is off the domain boundary");
    } else {
      if (!(domain.signed_distance(p) > 0.0))
        throw PreconditionError("node set: interior node " + std::to_string(i) + " is not strictly inside the domain");
      impl->interior.push_back(i);
    }
  }
  if (impl->interior.empty()) throw PreconditionError("node set: no interior nodes");
  impl->cells = voronoi_cells(domain, points, impl->interior);
  impl->cell_area.assign(points.size(), 0.0);
  double total = 0.0;
  for (std::size_t i : impl->interior) {
    impl->cell_area[i] = impl->cells[i].area();
    total += impl->cell_area[i];
  }
  if (std::abs(total - domain.area()) > 1e-8 * domain.area())
    throw DegenerateGeometry("node set: dual cells do not tile the domain (duplicate interior nodes?)");
  impl->spacing = std::sqrt(domain.area() / static_cast<double>(impl->interior.size()));
  impl->fingerprint = fnv1a(points, boundary);
  impl->domain = std::move(domain);
  impl->points = std::move(points);
  impl->boundary = std::move(boundary);
  NodeSet ns;
  ns.impl_ = std::move(impl);
  return ns;
}

NodeSet NodeSet::clipped_grid(const ConvexPolygon& domain, int n, double jitter, std::uint64_t seed) {
  if (n < 3) throw PreconditionError("clipped grid needs n >= 3");
  if (jitter < 0.0 || jitter >= 0.5) throw PreconditionError("clipped grid jitter must lie in [0, 0.5)");
  Point2 lo, hi;
  domain.bounding_box(lo, hi);
  const double h = std::max(hi.x - lo.x, hi.y - lo.y) / (n - 1);
  std::vector<Point2> pts;
  std::vector<bool> flags;
  const auto& v = domain.vertices();
  for (std::size_t e = 0; e < v.size(); ++e) {
    const Point2 a = v[e];
    const Point2 b = v[(e + 1) % v.size()];
    const int m = std::max(1, static_cast<int>(std::ceil(norm(b - a) / h - 1e-9)));
    for (int k = 0; k < m; ++k) {
      pts.push_back(a + (static_cast<double>(k) / m) * (b - a));
      flags.push_back(true);
    }
  }
  Rng rng(seed);
  const int nx = static_cast<int>(std::floor((hi.x - lo.x) / h + 1e-9)) + 1;
  const int ny = static_cast<int>(std::floor((hi.y - lo.y) / h + 1e-9)) + 1;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      Point2 p{lo.x + i * h, lo.y + j * h};
      if (domain.signed_distance(p) <= 0.25 * h) continue;
      if (jitter > 0.0) {
        const Point2 q{p.x + rng.uniform(-jitter, jitter) * h, p.y + rng.uniform(-jitter, jitter) * h};
        if (domain.signed_distance(q) > 0.25 * h) p = q;
      }
      pts.push_back(p);
      flags.push_back(false);
    }
  }
  NodeSet ns = build(domain, std::move(pts), std::move(flags));
  auto impl = std::make_shared<Impl>(*ns.impl_);
  impl->spacing = h;
  ns.impl_ = std::move(impl);
  return ns;
}

bool NodeSet::same_as(const NodeSet& other) const {
  if (impl_ == other.impl_) return true;
  if (!impl_ || !other.impl_) return false;
  return impl_->fingerprint == other.impl_->fingerprint && impl_->points.size() == other.impl_->points.size();
}

double AtomicMeasure::total() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

double AtomicMeasure::measure_of(const NodeSet& nodes, const ConvexPolygon& region) const {
  double s = 0.0;
  for (std::size_t i : nodes.interior())
    if (region.contains(nodes.point(i))) s += weights[i];
  return s;
}

PLConvexFunction PLConvexFunction::from_values(NodeSet nodes, std::vector<double> values) {
  if (values.size() != nodes.size()) throw MismatchError("PL function: value count differs from node count");
  for (double v : values)
    if (!std::isfinite(v)) throw PreconditionError("PL function: non-finite nodal value");
  PLConvexFunction f;
  std::vector<bool> lowered;
  const auto z = side_chain_values(nodes.points(), values, lowered);
  auto hull = drop_needles(lower_hull_3d(lift(nodes.points(), z)), nodes.points());
  const Planes planes = hull_planes(hull, nodes.points(), z);
  f.hull_values_ = interpolate_hull(hull, planes, nodes.points(), z);
  for (std::size_t i = 0; i < lowered.size(); ++i)
    if (lowered[i]) hull.on_hull[i] = false;
  f.hull_ = std::make_shared<const LowerHull>(std::move(hull));
  f.gradients_ = planes.face_grad;
  f.offsets_ = planes.face_offset;
  f.incident_.assign(nodes.size(), {});
  for (std::size_t k = 0; k < f.hull_->faces.size(); ++k)
    for (int v : f.hull_->faces[k]) f.incident_[static_cast<std::size_t>(v)].push_back(static_cast<int>(k));
  f.nodes_ = std::move(nodes);
  f.values_ = std::move(values);
  return f;
}

double PLConvexFunction::operator()(Point2 x) const { return max_affine(gradients_, offsets_, x); }

std::size_t PLConvexFunction::support_face(Point2 x) const {
  std::size_t best = 0;
  double value = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < gradients_.size(); ++k) {
    const double v = dot(gradients_[k], x) + offsets_[k];
    if (v > value) {
      value = v;
      best = k;
    }
  }
  return best;
}

SubdifferentialCell subdifferential_cell(const PLConvexFunction& f, std::size_t node) {
  if (node >= f.nodes().size()) throw PreconditionError("subdifferential_cell: node index out of range");
  SubdifferentialCell cell;
  if (!f.is_vertex(node)) return cell;
  std::vector<Point2> grads;
  for (int k : f.incident_faces(node)) grads.push_back(f.face_gradients()[static_cast<std::size_t>(k)]);
  cell.vertices = convex_hull_2d(std::move(grads));
  if (cell.vertices.size() < 3) return cell;
  cell.area = signed_area(cell.vertices);
  cell.flat = !(cell.area > 0.0);
  if (cell.flat) cell.area = 0.0;
  return cell;
}

AtomicMeasure ma_measure(const PLConvexFunction& f) {
  AtomicMeasure mu;
  mu.weights.assign(f.nodes().size(), 0.0);
  for (std::size_t i : f.nodes().interior()) mu.weights[i] = subdifferential_cell(f, i).area;
  return mu;
}

double contact_tolerance(std::span<const double> values, double factor) {
  if (values.empty()) return 1e-14;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return std::max(factor * (*hi - *lo), 1e-14);
}

EnvelopeResult convex_envelope(std::span<const Point2> points, std::span<const double> values,
                               double tolerance_factor) {
  if (points.size() != values.size()) throw MismatchError("convex_envelope: value count differs from point count");
  std::vector<bool> lowered;
  const auto z = side_chain_values(points, values, lowered);
  const LowerHull hull = drop_needles(lower_hull_3d(lift(points, z)), points);
  const Planes planes = hull_planes(hull, points, z);
  EnvelopeResult out;
  out.envelope = interpolate_hull(hull, planes, points, z);
  const double tau = contact_tolerance(values, tolerance_factor);
  out.contact.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out.contact[i] = values[i] - out.envelope[i] <= tau;
  return out;
}

EnvelopeResult convex_envelope(const NodeSet& nodes, std::span<const double> values, double tolerance_factor) {
  return convex_envelope(nodes.points(), values, tolerance_factor);
}

}  // namespace malab
