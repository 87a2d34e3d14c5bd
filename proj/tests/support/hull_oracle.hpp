#pragma once

#include <algorithm>
#include <array>
#include <set>
#include <span>

#include "malab/predicates.hpp"

namespace malab::testing {

// O(N^4) lower-hull oracle: a triple is a lower face when every point lies on
// or above its plane. Evaluated in long double, independently of the library
// predicates; meant for points in general position.
inline std::set<std::array<int, 3>> brute_force_lower_faces(std::span<const Point3> pts) {
  std::set<std::array<int, 3>> faces;
  const int n = static_cast<int>(pts.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k) {
        const long double ux = pts[j].x - (long double)pts[i].x, uy = pts[j].y - (long double)pts[i].y,
                          uz = pts[j].z - (long double)pts[i].z;
        const long double vx = pts[k].x - (long double)pts[i].x, vy = pts[k].y - (long double)pts[i].y,
                          vz = pts[k].z - (long double)pts[i].z;
        long double nx = uy * vz - uz * vy, ny = uz * vx - ux * vz, nz = ux * vy - uy * vx;
        if (nz == 0) continue;
        if (nz < 0) {
          nx = -nx;
          ny = -ny;
          nz = -nz;
        }
        bool lower = true;
        for (int m = 0; m < n && lower; ++m) {
          if (m == i || m == j || m == k) continue;
          const long double d = nx * (pts[m].x - (long double)pts[i].x) + ny * (pts[m].y - (long double)pts[i].y) +
                                nz * (pts[m].z - (long double)pts[i].z);
          if (d < 0) lower = false;
        }
        if (lower) faces.insert({i, j, k});
      }
  return faces;
}

}  // namespace malab::testing
