#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "malab/convex_geom.hpp"
#include "malab/density.hpp"
#include "malab/sobolev.hpp"

namespace malab {

/// Discrete target measure Σ g_j δ_{y_j}.
struct TargetCloud {
  std::vector<Point2> points;
  std::vector<double> masses;

  std::size_t size() const { return points.size(); }
  double total() const;
  /// Throws PreconditionError unless sizes agree, masses are positive and points distinct.
  void validate() const;
};

/// Quantizes g on an n×n grid over the bounding box of the target domain:
/// one target per nonempty grid piece, at its centroid, carrying ∫g over the piece,
/// rescaled so the masses sum to `total_mass`. `jitter` (in grid steps) perturbs
/// the target positions with a seeded generator.
TargetCloud quantize_density(const DensitySpec& g, const ConvexPolygon& target_domain, int n, double total_mass,
                             double jitter = 0.0, std::uint64_t seed = 0);

/// u(x) = max_j (x·y_j - ψ_j); its gradient is the semi-discrete Brenier map.
class BrenierPotential {
 public:
  BrenierPotential() = default;
  BrenierPotential(TargetCloud targets, std::vector<double> psi);

  const TargetCloud& targets() const { return targets_; }
  std::span<const double> psi() const { return psi_; }
  double operator()(Point2 x) const;
  /// Index of the maximizing affine piece; ties go to the lowest index.
  std::size_t argmax(Point2 x) const;

 private:
  TargetCloud targets_;
  std::vector<double> psi_;
};

/// Cells carry edge tags: j >= 0 for the edge shared with target j, negative for domain edges.
struct LaguerreDiagram {
  std::vector<Cell> cells;
  std::vector<double> masses;

  double total_area() const;
};

LaguerreDiagram laguerre_diagram(const BrenierPotential& pot, const ConvexPolygon& domain, const DensitySpec& f,
                                 const QuadratureRule& rule = {});

struct OTOptions {
  /// Stop when max_j |mass_j - g_j| / g_j <= tol.
  double tol = 1e-9;
  int max_iter = 200;
  /// Gradient-fallback stalls tolerated before giving up.
  int max_retries = 20;
  QuadratureRule rule{};

  void validate() const;
};

struct OTStats {
  int newton_steps = 0;
  int gradient_steps = 0;
  int retries = 0;
  double residual = 0.0;
};

/// Damped Newton on the dual weights with gauge ψ_0 = 0; gradient steps with
/// Armijo backtracking when Newton cannot keep every cell nonempty.
BrenierPotential solve_semidiscrete(const DensitySpec& f, const ConvexPolygon& domain, const TargetCloud& targets,
                                    const OTOptions& opts = {}, OTStats* stats = nullptr);

/// max_j |mass_j - g_j| / g_j of a potential.
double dual_residual(const BrenierPotential& pot, const ConvexPolygon& domain, const DensitySpec& f,
                     const QuadratureRule& rule = {});

/// T(x) = y_argmax; throws PreconditionError outside the domain.
Point2 transport_map_eval(const BrenierPotential& pot, const ConvexPolygon& domain, Point2 x);

/// Σ |f_k(x)/g_k(T_k x) - f(x)/g(T x)| h² over the cell midpoints of an h-grid inside the domain.
double density_ratio_l1(const DensitySpec& fk, const DensitySpec& gk, const BrenierPotential& pot_k,
                        const DensitySpec& f, const DensitySpec& g, const BrenierPotential& pot,
                        const ConvexPolygon& domain, double sample_h);

struct MapDistance {
  double total = 0.0;
  double map = 0.0;       // Σ |T_a - T_b| h²
  double gradient = 0.0;  // Σ |∇T_a - ∇T_b|_F h²
};

/// W^{1,1}(Ω′) distance of two Brenier maps. ∇T is the difference Hessian of the
/// potential mollified by a tent kernel of half-width σ; throws PreconditionError if σ < 2h.
MapDistance map_w11_distance(const BrenierPotential& a, const BrenierPotential& b, const GridWindow& w,
                             double sigma);

/// Section Z = {u < ℓ} with ℓ(z) = slope·z + offset the support of u at x0 raised by b.
struct Section {
  ConvexPolygon region;
  Point2 slope;
  double offset = 0.0;

  double affine(Point2 z) const { return dot(slope, z) + offset; }
  /// v = u - ℓ at the nodes of a node set on Z, exactly 0 at boundary nodes.
  std::vector<double> values(const std::function<double(Point2)>& u, const NodeSet& nodes) const;
};

/// Throws PreconditionError for b <= 0, x0 outside the domain, or a section touching the domain boundary.
Section extract_section(const PLConvexFunction& u, Point2 x0, double b);
Section extract_section(const BrenierPotential& pot, const ConvexPolygon& domain, Point2 x0, double b);

/// CSV with header `yx,yy,mass,psi`.
void write_potential_csv(const std::string& path, const BrenierPotential& pot);
BrenierPotential read_potential_csv(const std::string& path);

}  // namespace malab
