#include "malab/predicates.hpp"

#include <gmpxx.h>

#include <cmath>

namespace malab {
namespace {

// Bounds are a few times looser than Shewchuk's stage-A constants.
constexpr double kOrient2dBound = 1e-15;
constexpr double kOrient3dBound = 1e-14;

int sign_of(const mpq_class& v) { return sgn(v); }

int orient2d_exact(double ax, double ay, double bx, double by, double cx, double cy) {
  const mpq_class abx = mpq_class(bx) - mpq_class(ax);
  const mpq_class aby = mpq_class(by) - mpq_class(ay);
  const mpq_class acx = mpq_class(cx) - mpq_class(ax);
  const mpq_class acy = mpq_class(cy) - mpq_class(ay);
  return sign_of(abx * acy - aby * acx);
}

int orient3d_exact(const Point3& a, const Point3& b, const Point3& c, const Point3& d) {
  const mpq_class ax(a.x), ay(a.y), az(a.z);
  const mpq_class bx = mpq_class(b.x) - ax, by = mpq_class(b.y) - ay, bz = mpq_class(b.z) - az;
  const mpq_class cx = mpq_class(c.x) - ax, cy = mpq_class(c.y) - ay, cz = mpq_class(c.z) - az;
  const mpq_class dx = mpq_class(d.x) - ax, dy = mpq_class(d.y) - ay, dz = mpq_class(d.z) - az;
  const mpq_class det = dx * (by * cz - bz * cy) + dy * (bz * cx - bx * cz) + dz * (bx * cy - by * cx);
  return sign_of(det);
}

}  // namespace

int orient2d(double ax, double ay, double bx, double by, double cx, double cy) {
  const double abx = bx - ax, aby = by - ay;
  const double acx = cx - ax, acy = cy - ay;
  const double l = abx * acy;
  const double r = aby * acx;
  const double det = l - r;
  const double bound = kOrient2dBound * (std::abs(l) + std::abs(r));
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return orient2d_exact(ax, ay, bx, by, cx, cy);
}

int orient3d(const Point3& a, const Point3& b, const Point3& c, const Point3& d) {
  const double bx = b.x - a.x, by = b.y - a.y, bz = b.z - a.z;
  const double cx = c.x - a.x, cy = c.y - a.y, cz = c.z - a.z;
  const double dx = d.x - a.x, dy = d.y - a.y, dz = d.z - a.z;
  const double m1 = by * cz - bz * cy;
  const double m2 = bz * cx - bx * cz;
  const double m3 = bx * cy - by * cx;
  const double det = dx * m1 + dy * m2 + dz * m3;
  const double perm = std::abs(dx) * (std::abs(by * cz) + std::abs(bz * cy)) +
                      std::abs(dy) * (std::abs(bz * cx) + std::abs(bx * cz)) +
                      std::abs(dz) * (std::abs(bx * cy) + std::abs(by * cx));
  const double bound = kOrient3dBound * perm;
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return orient3d_exact(a, b, c, d);
}

}  // namespace malab
