#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "malab/geometry.hpp"
#include "malab/lower_hull.hpp"

namespace malab {

/// Discretization of a convex domain: boundary nodes on the polygon boundary,
/// interior nodes strictly inside, and the Voronoi cell of every interior node
/// (among interior nodes) clipped to the domain. Immutable and cheap to copy.
class NodeSet {
 public:
  NodeSet() = default;

  /// Validates the node placement and computes dual cells.
  static NodeSet build(ConvexPolygon domain, std::vector<Point2> points, std::vector<bool> boundary);

  /// Uniform grid with n points along the longer bounding-box side, clipped to
  /// the domain. Boundary nodes are the polygon vertices plus a subdivision of
  /// every edge at spacing <= h; grid points closer than h/4 to the boundary are
  /// dropped. Interior nodes may be jittered by up to `jitter * h` per axis.
  static NodeSet clipped_grid(const ConvexPolygon& domain, int n, double jitter = 0.0, std::uint64_t seed = 0);

  const ConvexPolygon& domain() const { return impl_->domain; }
  std::span<const Point2> points() const { return impl_->points; }
  Point2 point(std::size_t i) const { return impl_->points[i]; }
  std::size_t size() const { return impl_->points.size(); }
  bool is_boundary(std::size_t i) const { return impl_->boundary[i]; }
  const std::vector<bool>& boundary_flags() const { return impl_->boundary; }
  const std::vector<std::size_t>& interior() const { return impl_->interior; }
  /// Clipped Voronoi cell of an interior node; empty for boundary nodes.
  const Cell& dual_cell(std::size_t i) const { return impl_->cells[i]; }
  double dual_area(std::size_t i) const { return impl_->cell_area[i]; }
  /// Nominal spacing (grid spacing for clipped grids, otherwise the mean
  /// nearest-interior-neighbor distance).
  double spacing() const { return impl_->spacing; }
  std::uint64_t fingerprint() const { return impl_->fingerprint; }
  bool same_as(const NodeSet& other) const;

 private:
  struct Impl {
    ConvexPolygon domain;
    std::vector<Point2> points;
    std::vector<bool> boundary;
    std::vector<std::size_t> interior;
    std::vector<Cell> cells;
    std::vector<double> cell_area;
    double spacing = 0.0;
    std::uint64_t fingerprint = 0;
  };
  std::shared_ptr<const Impl> impl_;
};

/// Nonnegative weights at nodes (boundary entries are zero).
struct AtomicMeasure {
  std::vector<double> weights;

  double total() const;
  /// Sum of weights over interior nodes of `nodes` contained in `region` (closed).
  double measure_of(const NodeSet& nodes, const ConvexPolygon& region) const;
};

/// Convex piecewise-linear function given by the lower convex hull of the lifted
/// nodal data. When the data are not convex this is the convex envelope of the data.
class PLConvexFunction {
 public:
  PLConvexFunction() = default;
  static PLConvexFunction from_values(NodeSet nodes, std::vector<double> values);

  const NodeSet& nodes() const { return nodes_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<Triangle>& faces() const { return hull_->faces; }
  const std::vector<Point2>& face_gradients() const { return gradients_; }
  const std::vector<double>& face_offsets() const { return offsets_; }
  bool is_vertex(std::size_t i) const { return hull_->on_hull[i]; }
  const std::vector<int>& incident_faces(std::size_t i) const { return incident_[i]; }

  /// Evaluates the function (max of the face affine pieces).
  double operator()(Point2 x) const;
  /// Lowest-index face attaining the max at x.
  std::size_t support_face(Point2 x) const;
  /// Value of the hull interpolant at every node (equal to the data at hull vertices).
  const std::vector<double>& hull_values() const { return hull_values_; }

 private:
  NodeSet nodes_;
  std::vector<double> values_;
  std::shared_ptr<const LowerHull> hull_;
  std::vector<Point2> gradients_;
  std::vector<double> offsets_;
  std::vector<std::vector<int>> incident_;
  std::vector<double> hull_values_;
};

/// Subdifferential polygon at a node; `flat` marks nodes whose subdifferential
/// is a point or segment (fewer than 3 distinct incident gradients, or not a vertex).
struct SubdifferentialCell {
  std::vector<Point2> vertices;
  double area = 0.0;
  bool flat = true;
};

AtomicMeasure ma_measure(const PLConvexFunction& f);

SubdifferentialCell subdifferential_cell(const PLConvexFunction& f, std::size_t node);

struct EnvelopeResult {
  std::vector<double> envelope;
  std::vector<bool> contact;
};

/// Contact tolerance used for {v = envelope}: factor * (max - min), floored at 1e-14.
double contact_tolerance(std::span<const double> values, double factor = 1e-9);

EnvelopeResult convex_envelope(std::span<const Point2> points, std::span<const double> values,
                               double tolerance_factor = 1e-9);
EnvelopeResult convex_envelope(const NodeSet& nodes, std::span<const double> values, double tolerance_factor = 1e-9);

}  // namespace malab
