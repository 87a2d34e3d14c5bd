#pragma once

#include <array>
#include <span>
#include <vector>

#include "malab/predicates.hpp"

namespace malab {

using Triangle = std::array<int, 3>;

struct LowerHull {
  /// Lower faces, each counterclockwise in the (x, y) projection.
  std::vector<Triangle> faces;
  /// Face index -> coplanar group id; faces sharing a group lie in one plane.
  std::vector<int> plane_group;
  /// True for points that are vertices of at least one lower face.
  std::vector<bool> on_hull;
};

/// Lower convex hull of lifted points (faces whose outward normal points down).
///
/// Coplanar lower faces are merged into their common planar facet, collinear
/// boundary vertices of the facet are dropped, and the facet is re-triangulated
/// as a fan from its lowest-index vertex. Points that lie on the hull surface
/// without being a facet corner are therefore not reported as hull vertices.
/// Throws DegenerateGeometry when fewer than 3 points are given or all (x, y)
/// projections are collinear.
LowerHull lower_hull_3d(std::span<const Point3> points);

/// Same, without merging coplanar faces (raw triangulated hull).
LowerHull lower_hull_3d_unmerged(std::span<const Point3> points);

}  // namespace malab
