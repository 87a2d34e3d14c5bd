#pragma once

namespace malab {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

// Exact sign predicates on double inputs: a floating-point evaluation with a
// conservative error bound, and a rational-arithmetic fallback when the bound
// cannot certify the sign.

/// Sign of (b-a) x (c-a) in the plane: +1 counterclockwise, -1 clockwise, 0 collinear.
int orient2d(double ax, double ay, double bx, double by, double cx, double cy);

/// Sign of ((b-a) x (c-a)) . (d-a): +1 when d lies on the side the normal points to.
int orient3d(const Point3& a, const Point3& b, const Point3& c, const Point3& d);

inline int orient2d_xy(const Point3& a, const Point3& b, const Point3& c) {
  return orient2d(a.x, a.y, b.x, b.y, c.x, c.y);
}

}  // namespace malab
