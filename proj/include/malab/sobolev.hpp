#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "malab/convex_geom.hpp"
#include "malab/density.hpp"

namespace malab {

/// Uniform sample grid inside a window Ω′ ⊂⊂ Ω. Samples are the cell midpoints
/// lo + (i + ½, j + ½)·h of the window's bounding box that lie in the window,
/// so for an aligned rectangle count·h² is the window area.
class GridWindow {
 public:
  GridWindow() = default;
  /// Throws PreconditionError unless the window keeps a margin >= 2h to the domain boundary.
  static GridWindow make(ConvexPolygon window, const ConvexPolygon& domain, double h);

  const ConvexPolygon& window() const { return window_; }
  double spacing() const { return h_; }
  double margin() const { return margin_; }
  std::span<const Point2> samples() const { return samples_; }

 private:
  ConvexPolygon window_;
  double h_ = 0.0;
  double margin_ = 0.0;
  std::vector<Point2> samples_;
};

struct Sym2 {
  double xx = 0.0, xy = 0.0, yy = 0.0;
};

/// Value, central-difference gradient and Hessian at every window sample.
struct HessianField {
  std::vector<Point2> points;
  std::vector<double> value;
  std::vector<Point2> gradient;
  std::vector<Sym2> hessian;
  double h = 0.0;

  std::size_t size() const { return points.size(); }
};

/// Central differences at spacing h of an arbitrary evaluator on the window
/// grid; the mixed derivative uses the four-point cross difference.
HessianField sample_hessian(const std::function<double(Point2)>& u, const GridWindow& w);
/// Same for a PL function; throws PreconditionError if a stencil leaves its domain.
HessianField sample_hessian(const PLConvexFunction& u, const GridWindow& w);

struct W21Distance {
  double total = 0.0;
  double value = 0.0;     // Σ |Δu| h²
  double gradient = 0.0;  // Σ |Δ∇u|₂ h²
  double hessian = 0.0;   // Σ |ΔD²u|_F h²
};

/// Discrete W^{2,1}(Ω′) distance; throws MismatchError for different sample sets.
W21Distance w21_distance(const HessianField& a, const HessianField& b);

/// (Σ |D²u|_F^γ h²)^{1/γ} for γ in [1, 4].
double lgamma_hessian_norm(const HessianField& a, double gamma);

/// Fraction of window samples where u - (1-ε) u_k touches its convex envelope
/// (envelope taken over the window samples; contact tolerance factor as in convex_envelope).
double contact_fraction(const PLConvexFunction& u, const PLConvexFunction& uk, double eps, const GridWindow& w,
                        double tolerance_factor = 1e-9);

/// Fraction of samples with (1-ε) B <= A <= B / (1-ε) in the PSD order, up to
/// τ = 1e-8 × the largest Hessian entry of either field.
double psd_pinch_fraction(const HessianField& a, const HessianField& b, double eps);

struct InequalityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// lhs = Monge-Ampère mass of the envelope of u - v on interior nodes in the region;
/// rhs = Σ over contact nodes in the region of (√f - √g)²(x_i) × dual cell area.
InequalityCheck lemma31_check(const PLConvexFunction& u, const PLConvexFunction& v, const DensitySpec& f,
                              const DensitySpec& g, const ConvexPolygon& region);

/// lhs = Monge-Ampère mass of the envelope of v on interior nodes in the region;
/// rhs = Σ over contact nodes in the region of max(det D²v(x_i), 0) × dual cell area.
InequalityCheck misconv_check(std::span<const double> v_values, const std::function<Sym2(Point2)>& hess,
                              const NodeSet& nodes, const ConvexPolygon& region);

/// Reporting-only diagnostic for t ≤ δ t log(2+t) + e^{1/δ} with t = |ΔD²u|_F:
/// lhs = Σ t h², rhs = Σ (δ t log(2+t) + e^{1/δ}) h².
InequalityCheck llogl_diagnostic(const HessianField& a, const HessianField& b, double delta);

/// CSV with header `x,y,u,ux,uy,uxx,uxy,uyy`.
void write_hessian_csv(const std::string& path, const HessianField& field);

}  // namespace malab
