#pragma once

#include <vector>

#include "malab/convex_geom.hpp"
#include "malab/density.hpp"

namespace malab {

struct SolverOptions {
  /// Stop when max_i |μ_i - m_i| / m_i <= newton_tol.
  double newton_tol = 1e-10;
  int max_iter = 200;
  /// Initial Newton step factor in (0, 1]; halved on rejection, reset on acceptance.
  double damping = 1.0;
  /// Points per dual-cell triangle (1, 3 or 7), with adaptive refinement.
  int quadrature_order = 7;
  /// false: skip Newton and iterate the single-node lifting sweeps only.
  bool newton = true;

  void validate() const;
};

/// Iteration statistics of the last solve (for diagnostics and tests).
struct SolverStats {
  int newton_steps = 0;
  int rejected_steps = 0;
  int sweeps = 0;
  double residual = 0.0;
};

/// weight_i = ∫ f over the dual cell of interior node i.
AtomicMeasure cell_masses(const DensitySpec& f, const NodeSet& nodes, const QuadratureRule& rule = {});

/// Discrete Alexandrov solution of det D²u = f, u = 0 on the boundary nodes.
PLConvexFunction solve_dirichlet(const ConvexPolygon& domain, const DensitySpec& f, const NodeSet& nodes,
                                 const SolverOptions& opts = {}, SolverStats* stats = nullptr);

/// Same, with the nodal target masses given directly (boundary entries ignored).
PLConvexFunction solve_dirichlet_masses(const NodeSet& nodes, const AtomicMeasure& targets,
                                        const SolverOptions& opts = {}, SolverStats* stats = nullptr);

/// residual_i = μ_u({x_i}) - m_i at every node (zero at boundary nodes).
std::vector<double> solver_residual(const PLConvexFunction& u, const AtomicMeasure& targets);

}  // namespace malab
