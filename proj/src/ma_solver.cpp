#include "malab/ma_solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "malab/errors.hpp"

namespace malab {
namespace {

constexpr double kMinDamping = 0x1.0p-12;

struct Linearization {
  AtomicMeasure mu;
  // Weighted graph Laplacian L = -∂μ/∂u restricted to interior nodes.
  Eigen::SparseMatrix<double> laplacian;
};

// ∂μ_i/∂u_j = |∇_T - ∇_T'| / |x_i - x_j| for the hull edge (i, j) shared by
// faces T and T'; the diagonal follows from invariance under adding constants.
Linearization linearize(const PLConvexFunction& u, const std::vector<int>& slot) {
  Linearization lin;
  lin.mu = ma_measure(u);
  const auto& faces = u.faces();
  const auto& grads = u.face_gradients();
  std::unordered_map<std::uint64_t, std::array<int, 2>> edges;
  edges.reserve(faces.size() * 2);
  for (std::size_t f = 0; f < faces.size(); ++f)
    for (int e = 0; e < 3; ++e) {
      const auto a = static_cast<std::uint64_t>(std::min(faces[f][e], faces[f][(e + 1) % 3]));
      const auto b = static_cast<std::uint64_t>(std::max(faces[f][e], faces[f][(e + 1) % 3]));
      auto [it, fresh] = edges.try_emplace((a << 32) | b, std::array<int, 2>{static_cast<int>(f), -1});
      if (!fresh) it->second[1] = static_cast<int>(f);
    }
  const auto n = static_cast<int>(std::count_if(slot.begin(), slot.end(), [](int s) { return s >= 0; }));
  std::vector<Eigen::Triplet<double>> trips;
  std::vector<double> diag(static_cast<std::size_t>(n), 0.0);
  for (const auto& [key, fs] : edges) {
    if (fs[1] < 0) continue;
    const auto i = static_cast<std::size_t>(key >> 32);
    const auto j = static_cast<std::size_t>(key & 0xffffffffU);
    const int si = slot[i], sj = slot[j];
    if (si < 0 && sj < 0) continue;
    const double c = norm(grads[fs[0]] - grads[fs[1]]) / norm(u.nodes().point(i) - u.nodes().point(j));
    if (si >= 0) diag[si] += c;
    if (sj >= 0) diag[sj] += c;
    if (si >= 0 && sj >= 0) {
      trips.emplace_back(si, sj, -c);
      trips.emplace_back(sj, si, -c);
    }
  }
  for (int s = 0; s < n; ++s) trips.emplace_back(s, s, diag[s]);
  lin.laplacian.resize(n, n);
  lin.laplacian.setFromTriplets(trips.begin(), trips.end());
  return lin;
}

struct Residual {
  std::vector<double> r;  // per interior slot
  double norm2 = 0.0;
  double max_rel = 0.0;
  double min_mu = 0.0;
};

Residual residual_of(const AtomicMeasure& mu, const AtomicMeasure& targets, const std::vector<std::size_t>& interior) {
  Residual res;
  res.r.resize(interior.size());
  res.min_mu = std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (std::size_t k = 0; k < interior.size(); ++k) {
    const std::size_t i = interior[k];
    res.r[k] = mu.weights[i] - targets.weights[i];
    s += res.r[k] * res.r[k];
    res.max_rel = std::max(res.max_rel, std::abs(res.r[k]) / targets.weights[i]);
    res.min_mu = std::min(res.min_mu, mu.weights[i]);
  }
  res.norm2 = std::sqrt(s);
  return res;
}

// The subdifferential at node i when its value is t and the others are frozen:
// {p : p·(x_j - x_i) <= u_j - t for all neighbors j}.
Cell local_cell(const NodeSet& nodes, const std::vector<double>& u, std::size_t i, double t,
                const std::vector<std::size_t>& nbrs) {
  double bound = 1.0;
  for (std::size_t j : nbrs) {
    const double d = norm(nodes.point(j) - nodes.point(i));
    bound = std::max(bound, 4.0 * std::abs(u[j] - t) / d);
  }
  Cell cell;
  cell.vertices = {{-bound, -bound}, {bound, -bound}, {bound, bound}, {-bound, bound}};
  cell.edge_tags = {-1, -1, -1, -1};
  for (std::size_t j : nbrs) {
    cell = clip_halfplane(cell, nodes.point(j) - nodes.point(i), u[j] - t, static_cast<int>(j));
    if (cell.empty()) break;
  }
  return cell;
}

// One Gauss-Seidel pass of the classical single-node lifting: each interior
// value is moved (bisection on the monotone local area) until its own mass
// matches. Candidate neighbors start within a few spacings; the radius grows
// until the final cell satisfies every node's constraint.
void lifting_sweep(const NodeSet& nodes, std::vector<double>& u, const AtomicMeasure& targets) {
  const auto pts = nodes.points();
  for (std::size_t i : nodes.interior()) {
    const double m = targets.weights[i];
    for (double radius = 3.0 * nodes.spacing();; radius *= 2.0) {
      std::vector<std::size_t> nbrs;
      bool all = true;
      for (std::size_t j = 0; j < pts.size(); ++j) {
        if (j == i) continue;
        if (norm(pts[j] - pts[i]) <= radius)
          nbrs.push_back(j);
        else
          all = false;
      }
      auto area = [&](double t) { return local_cell(nodes, u, i, t, nbrs).area(); };
      double lo = u[i], hi = u[i];
      double step = std::max(1e-3 * std::abs(u[i]), 1e-12);
      if (area(u[i]) < m) {
        while (area(lo) < m) {
          hi = lo;
          lo -= step;
          step *= 2.0;
        }
      } else {
        while (area(hi) > m) {
          lo = hi;
          hi += step;
          step *= 2.0;
        }
      }
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (area(mid) >= m ? lo : hi) = mid;
      }
      const double t = 0.5 * (lo + hi);
      bool valid = true;
      if (!all) {
        const Cell cell = local_cell(nodes, u, i, t, nbrs);
        for (std::size_t j = 0; j < pts.size() && valid; ++j) {
          if (j == i) continue;
          for (const auto& p : cell.vertices)
            if (dot(p, pts[j] - pts[i]) > u[j] - t + 1e-12 * (std::abs(u[j]) + std::abs(t))) {
              valid = false;
              break;
            }
        }
      }
      if (valid) {
        u[i] = t;
        break;
      }
    }
  }
}

Eigen::VectorXd solve_newton_system(const Linearization& lin, const Residual& res,
                                    const std::vector<std::size_t>& interior) {
  const Eigen::Map<const Eigen::VectorXd> rhs(res.r.data(), static_cast<Eigen::Index>(res.r.size()));
  auto attempt = [&](const Eigen::SparseMatrix<double>& m, Eigen::VectorXd& out) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(m);
    if (ldlt.info() != Eigen::Success) return false;
    if ((ldlt.vectorD().array() <= 0.0).any()) return false;
    out = ldlt.solve(rhs);
    return ldlt.info() == Eigen::Success && out.allFinite();
  };
  Eigen::VectorXd delta;
  if (attempt(lin.laplacian, delta)) return delta;
  Eigen::SparseMatrix<double> shifted = lin.laplacian;
  const double shift = 1e-12 * lin.laplacian.diagonal().sum();
  for (Eigen::Index k = 0; k < shifted.rows(); ++k) shifted.coeffRef(k, k) += shift;
  if (attempt(shifted, delta)) return delta;
  Eigen::Index worst = 0;
  lin.laplacian.diagonal().minCoeff(&worst);
  throw SingularJacobian("Monge-Ampere Newton system is singular after regularization",
                         interior[static_cast<std::size_t>(worst)]);
}

}  // namespace

void SolverOptions::validate() const {
  if (!(newton_tol > 0.0)) throw PreconditionError("solver: newton_tol must be positive");
  if (max_iter < 1) throw PreconditionError("solver: max_iter must be at least 1");
  if (!(damping > 0.0 && damping <= 1.0)) throw PreconditionError("solver: damping must lie in (0, 1]");
  if (quadrature_order != 1 && quadrature_order != 3 && quadrature_order != 7)
    throw PreconditionError("solver: quadrature_order must be 1, 3 or 7");
}

AtomicMeasure cell_masses(const DensitySpec& f, const NodeSet& nodes, const QuadratureRule& rule) {
  AtomicMeasure m;
  m.weights.assign(nodes.size(), 0.0);
  for (std::size_t i : nodes.interior()) m.weights[i] = integrate_polygon(f, nodes.dual_cell(i).vertices, rule);
  return m;
}

PLConvexFunction solve_dirichlet(const ConvexPolygon& domain, const DensitySpec& f, const NodeSet& nodes,
                                 const SolverOptions& opts, SolverStats* stats) {
  opts.validate();
  if (hausdorff_distance(domain, nodes.domain()) > 1e-12 * domain.diameter())
    throw MismatchError("solve_dirichlet: node set was built for a different domain");
  f.bounds(domain);  // validates 0 < lambda <= f <= Lambda
  QuadratureRule rule;
  rule.order = opts.quadrature_order;
  return solve_dirichlet_masses(nodes, cell_masses(f, nodes, rule), opts, stats);
}

PLConvexFunction solve_dirichlet_masses(const NodeSet& nodes, const AtomicMeasure& targets, const SolverOptions& opts,
                                        SolverStats* stats) {
  opts.validate();
  if (targets.weights.size() != nodes.size()) throw MismatchError("solver: target count differs from node count");
  const auto& interior = nodes.interior();
  double total = 0.0, min_target = std::numeric_limits<double>::infinity();
  for (std::size_t i : interior) {
    if (!(targets.weights[i] > 0.0) || !std::isfinite(targets.weights[i]))
      throw PreconditionError("solver: target mass at node " + std::to_string(i) + " is not positive");
    total += targets.weights[i];
    min_target = std::min(min_target, targets.weights[i]);
  }
  std::vector<int> slot(nodes.size(), -1);
  for (std::size_t k = 0; k < interior.size(); ++k) slot[interior[k]] = static_cast<int>(k);

  // Strictly convex start: a paraboloid through 0 at the farthest boundary node.
  Point2 c;
  double r_in = 0.0;
  nodes.domain().chebyshev(c, r_in);
  double r2 = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes.is_boundary(i)) r2 = std::max(r2, norm2(nodes.point(i) - c));
  const double alpha = std::sqrt(total / nodes.domain().area());
  std::vector<double> u(nodes.size(), 0.0);
  for (std::size_t i : interior) u[i] = 0.5 * alpha * (norm2(nodes.point(i) - c) - r2);

  SolverStats st;
  auto current = PLConvexFunction::from_values(nodes, u);
  Linearization lin = linearize(current, slot);
  Residual res = residual_of(lin.mu, targets, interior);
  double eps0 = 0.5 * std::min(min_target, res.min_mu);
  double theta = opts.damping;
  int iter = 0;
  while (res.max_rel > opts.newton_tol) {
    if (iter++ >= opts.max_iter) {
      if (stats) *stats = st;
      throw ConvergenceError("Monge-Ampere solver did not converge in " + std::to_string(opts.max_iter) + " iterations",
                             res.max_rel);
    }
    bool accepted = false;
    if (opts.newton && eps0 > 0.0) {
      const Eigen::VectorXd delta = solve_newton_system(lin, res, interior);
      while (theta >= kMinDamping) {
        std::vector<double> trial = u;
        for (std::size_t k = 0; k < interior.size(); ++k) trial[interior[k]] += theta * delta[static_cast<Eigen::Index>(k)];
        auto cand = PLConvexFunction::from_values(nodes, trial);
        Linearization cand_lin = linearize(cand, slot);
        Residual cand_res = residual_of(cand_lin.mu, targets, interior);
        if (cand_res.min_mu >= eps0 && cand_res.norm2 <= (1.0 - 0.5 * theta) * res.norm2) {
          u = std::move(trial);
          current = std::move(cand);
          lin = std::move(cand_lin);
          res = std::move(cand_res);
          accepted = true;
          ++st.newton_steps;
          break;
        }
        ++st.rejected_steps;
        theta *= 0.5;
      }
      theta = opts.damping;
    }
    if (!accepted) {
      // Newton stalled (or a node lost its mass): fall back to a lifting sweep.
      lifting_sweep(nodes, u, targets);
      ++st.sweeps;
      current = PLConvexFunction::from_values(nodes, u);
      lin = linearize(current, slot);
      res = residual_of(lin.mu, targets, interior);
      eps0 = 0.5 * std::min(min_target, res.min_mu);
    }
  }
  st.residual = res.max_rel;
  if (stats) *stats = st;
  return current;
}

std::vector<double> solver_residual(const PLConvexFunction& u, const AtomicMeasure& targets) {
  if (targets.weights.size() != u.nodes().size())
    throw MismatchError("solver_residual: target measure and function live on different node sets");
  const auto mu = ma_measure(u);
  std::vector<double> r(u.nodes().size(), 0.0);
  for (std::size_t i : u.nodes().interior()) r[i] = mu.weights[i] - targets.weights[i];
  return r;
}

}  // namespace malab
