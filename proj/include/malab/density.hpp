#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "malab/geometry.hpp"

namespace malab {

/// Lower and upper bounds λ ≤ f ≤ Λ of a density on a domain.
struct DensityBounds {
  double lo = 0.0;
  double hi = 0.0;
};

/// Symbolic density. Forms: constant, Gaussian bump amp·exp(-|x-c|²/w²),
/// mixture (sum of forms), clamp to [λ, Λ]; plus the derived forms used by the
/// experiment generators (scaling, sign-oscillation, ball averaging).
/// Values are immutable and cheap to copy.
class DensitySpec {
 public:
  static DensitySpec constant(double c);
  static DensitySpec bump(Point2 center, double amplitude, double width);
  static DensitySpec mixture(std::vector<DensitySpec> parts);
  static DensitySpec clamped(DensitySpec base, double lo, double hi);
  static DensitySpec scaled(DensitySpec base, double factor);
  /// base(x)·(1 + a·sign(sin(frequency·x₁))).
  static DensitySpec oscillating(DensitySpec base, double amplitude, double frequency);
  /// Average of base over the disc of the given radius around x.
  static DensitySpec averaged(DensitySpec base, double radius);

  /// Parses `const:c`, `bump:cx,cy,amp,w`, `mix:spec;spec;...`, `clamp:spec,λ,Λ`.
  /// Throws ConfigError on malformed input.
  static DensitySpec parse(std::string_view text);
  /// Grammar string for the four public forms; derived forms get a descriptive name.
  std::string to_string() const;

  double operator()(Point2 x) const;

  /// Analytic bounds for constants and clamps; otherwise min/max over 10⁴
  /// domain samples. Throws PreconditionError unless 0 < λ ≤ Λ.
  DensityBounds bounds(const ConvexPolygon& domain) const;
  bool is_constant() const;

  struct Node;  // opaque expression tree

 private:
  explicit DensitySpec(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

/// Triangle quadrature: `order` points per triangle (1, 3 or 7; degrees 1, 2, 5),
/// with adaptive 4-way refinement of a triangle until the refined and unrefined
/// estimates agree to `rel_tol` (0 disables refinement).
struct QuadratureRule {
  int order = 7;
  double rel_tol = 1e-12;
  int max_depth = 6;
};

double integrate_triangle(const DensitySpec& f, Point2 a, Point2 b, Point2 c, const QuadratureRule& rule = {});
/// Integral over a convex vertex loop, triangulated from its centroid.
double integrate_polygon(const DensitySpec& f, std::span<const Point2> loop, const QuadratureRule& rule = {});
/// Same rules for an arbitrary integrand.
double integrate_triangle(const std::function<double(Point2)>& f, Point2 a, Point2 b, Point2 c,
                          const QuadratureRule& rule = {});
double integrate_polygon(const std::function<double(Point2)>& f, std::span<const Point2> loop,
                         const QuadratureRule& rule = {});

}  // namespace malab
