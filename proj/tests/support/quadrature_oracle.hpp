#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "malab/geometry.hpp"

namespace malab::testing {

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

// Integral over a triangle with an n×n collapsed (Duffy) Gauss product rule.
inline double triangle_gauss(const std::function<double(Point2)>& f, Point2 a, Point2 b, Point2 c, int n) {
  std::vector<double> x, w;
  gauss_legendre(n, x, w);
  const double jac = std::abs(cross(b - a, c - a));
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double u = 0.5 * (x[i] + 1.0), v = 0.5 * (x[j] + 1.0);
      // (u, v) in the unit square -> (u, (1-u) v) in the reference triangle.
      const Point2 p = a + u * (b - a) + (1.0 - u) * v * (c - a);
      s += 0.25 * w[i] * w[j] * (1.0 - u) * f(p);
    }
  return s * jac;
}

// Polygon integral with the Gauss order doubled until the change drops below tol.
inline double polygon_integral(const std::function<double(Point2)>& f, std::span<const Point2> loop,
                               double tol = 1e-10) {
  auto at = [&](int n) {
    double s = 0.0;
    for (std::size_t i = 1; i + 1 < loop.size(); ++i) s += triangle_gauss(f, loop[0], loop[i], loop[i + 1], n);
    return s;
  };
  int n = 4;
  double prev = at(n);
  while (n < 512) {
    n *= 2;
    const double next = at(n);
    if (std::abs(next - prev) < tol * std::abs(next)) return next;
    prev = next;
  }
  return prev;
}

}  // namespace malab::testing
