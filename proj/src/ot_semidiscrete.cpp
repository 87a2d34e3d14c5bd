#include "malab/ot_semidiscrete.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "malab/errors.hpp"
#include "malab/io.hpp"
#include "malab/random.hpp"

namespace malab {
namespace {

// 5-point Gauss-Legendre rule on [0, 1].
constexpr double kGaussX[5] = {0.04691007703066800, 0.23076534494715845, 0.5, 0.76923465505284155,
                               0.95308992296933200};
constexpr double kGaussW[5] = {0.11846344252809454, 0.23931433524968324, 0.28444444444444444, 0.23931433524968324,
                               0.11846344252809454};

double segment_integral(const DensitySpec& f, Point2 a, Point2 b) {
  double s = 0.0;
  for (int k = 0; k < 5; ++k) s += kGaussW[k] * f(a + kGaussX[k] * (b - a));
  return s * norm(b - a);
}

std::vector<Cell> laguerre_cells(const TargetCloud& t, std::span<const double> psi, const ConvexPolygon& domain) {
  const std::size_t n = t.size();
  std::vector<Cell> cells(n);
  // Clip against the targets in order of increasing distance so cells shrink early.
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    const Point2 yj = t.points[j];
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double da = norm2(t.points[a] - yj), db = norm2(t.points[b] - yj);
      return da != db ? da < db : a < b;
    });
    Cell c = domain.as_cell(-1);
    for (std::size_t i : order) {
      if (i == j) continue;
      // x·y_j - ψ_j >= x·y_i - ψ_i  <=>  x·(y_i - y_j) <= ψ_i - ψ_j
      c = clip_halfplane(c, t.points[i] - yj, psi[i] - psi[j], static_cast<int>(i));
      if (c.empty()) break;
    }
    if (c.empty()) c = Cell{};
    cells[j] = std::move(c);
  }
  return cells;
}

struct DualState {
  LaguerreDiagram diagram;
  std::vector<double> residual;  // mass - g
  double rel_err = 0.0;
  double norm2 = 0.0;
  double min_mass = 0.0;
};

DualState evaluate(const TargetCloud& t, std::span<const double> psi, const ConvexPolygon& domain,
                   const DensitySpec& f, const QuadratureRule& rule) {
  DualState s;
  const BrenierPotential pot(t, std::vector<double>(psi.begin(), psi.end()));
  s.diagram = laguerre_diagram(pot, domain, f, rule);
  s.residual.resize(t.size());
  s.min_mass = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < t.size(); ++j) {
    s.residual[j] = s.diagram.masses[j] - t.masses[j];
    s.rel_err = std::max(s.rel_err, std::abs(s.residual[j]) / t.masses[j]);
    s.norm2 += s.residual[j] * s.residual[j];
    s.min_mass = std::min(s.min_mass, s.diagram.masses[j]);
  }
  s.norm2 = std::sqrt(s.norm2);
  return s;
}

// Kantorovich functional Φ(ψ) = ∫ max_j (x·y_j - ψ_j) f + Σ g_j ψ_j (convex, gradient g - mass).
double dual_objective(const TargetCloud& t, std::span<const double> psi, const LaguerreDiagram& d,
                      const DensitySpec& f, const QuadratureRule& rule) {
  double s = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    s += t.masses[j] * psi[j];
    if (d.cells[j].empty()) continue;
    const Point2 y = t.points[j];
    const double p = psi[j];
    s += integrate_polygon([&](Point2 x) { return (dot(x, y) - p) * f(x); }, d.cells[j].vertices, rule);
  }
  return s;
}

// Newton system on the gauge-reduced weights: L δ = mass - g with L the
// f-weighted edge Laplacian of the Laguerre diagram.
bool newton_direction(const TargetCloud& t, const DensitySpec& f, const DualState& s, std::vector<double>& delta,
                      double& max_diag) {
  const std::size_t n = t.size();
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> diag(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const Cell& c = s.diagram.cells[j];
    for (std::size_t e = 0; e < c.vertices.size(); ++e) {
      const int i = c.edge_tags[e];
      if (i < 0 || static_cast<std::size_t>(i) <= j) continue;
      const Point2 a = c.vertices[e], b = c.vertices[(e + 1) % c.vertices.size()];
      const double w = segment_integral(f, a, b) / norm(t.points[i] - t.points[j]);
      if (!(w > 0.0)) continue;
      diag[j] += w;
      diag[i] += w;
      if (j > 0 && i > 0) {
        trip.emplace_back(static_cast<int>(j - 1), static_cast<int>(i - 1), -w);
        trip.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1), -w);
      }
    }
  }
  max_diag = *std::max_element(diag.begin(), diag.end());
  for (std::size_t j = 1; j < n; ++j) trip.emplace_back(static_cast<int>(j - 1), static_cast<int>(j - 1), diag[j]);
  const int m = static_cast<int>(n - 1);
  Eigen::SparseMatrix<double> lap(m, m);
  lap.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(lap);
  if (ldlt.info() != Eigen::Success) return false;
  Eigen::VectorXd rhs(m);
  for (int j = 0; j < m; ++j) rhs[j] = s.residual[j + 1];
  const Eigen::VectorXd x = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !x.allFinite()) return false;
  for (int j = 0; j < m; ++j)
    if (!(ldlt.vectorD()[j] > 0.0)) return false;
  delta.assign(n, 0.0);
  for (int j = 0; j < m; ++j) delta[j + 1] = x[j];
  return true;
}

// Weights whose cells are the Voronoi cells of the targets mapped affinely into the
// domain's inscribed disc: every cell contains its mapped target, hence is nonempty.
std::vector<double> initial_weights(const TargetCloud& t, const ConvexPolygon& domain) {
  Point2 lo = t.points[0], hi = t.points[0];
  for (const auto& p : t.points) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  Point2 c;
  double r = 0.0;
  domain.chebyshev(c, r);
  const Point2 mid = 0.5 * (lo + hi);
  const double half = 0.5 * norm(hi - lo);
  const double s = 0.7 * r / half;  // z = c + s (y - mid), y = z / s + (mid - c / s)
  const double a = 1.0 / s;
  std::vector<double> psi(t.size());
  for (std::size_t j = 0; j < t.size(); ++j) {
    const Point2 z = c + s * (t.points[j] - mid);
    psi[j] = 0.5 * a * norm2(z);
  }
  return psi;
}

void apply_gauge(std::vector<double>& psi) {
  const double p0 = psi[0];
  for (double& p : psi) p -= p0;
}

}  // namespace

double TargetCloud::total() const { return std::accumulate(masses.begin(), masses.end(), 0.0); }

void TargetCloud::validate() const {
  if (points.empty()) throw PreconditionError("target cloud is empty");
  if (points.size() != masses.size()) throw PreconditionError("target cloud: point and mass counts differ");
  for (std::size_t j = 0; j < masses.size(); ++j)
    if (!(masses[j] > 0.0) || !std::isfinite(masses[j]))
      throw PreconditionError("target cloud: mass " + std::to_string(j) + " is not positive");
  std::vector<Point2> sorted = points;
  std::sort(sorted.begin(), sorted.end(), [](Point2 a, Point2 b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw PreconditionError("target cloud: duplicate target points");
}

TargetCloud quantize_density(const DensitySpec& g, const ConvexPolygon& target_domain, int n, double total_mass,
                             double jitter, std::uint64_t seed) {
  if (n < 1) throw PreconditionError("quantize_density: resolution must be positive");
  if (!(total_mass > 0.0)) throw PreconditionError("quantize_density: total mass must be positive");
  if (jitter < 0.0 || jitter >= 0.5) throw PreconditionError("quantize_density: jitter must lie in [0, 0.5)");
  Point2 lo, hi;
  target_domain.bounding_box(lo, hi);
  const double hx = (hi.x - lo.x) / n, hy = (hi.y - lo.y) / n;
  Rng rng(seed);
  TargetCloud t;
  double sum = 0.0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      Cell c = target_domain.as_cell(-1);
      const double x0 = lo.x + i * hx, x1 = lo.x + (i + 1) * hx;
      const double y0 = lo.y + j * hy, y1 = lo.y + (j + 1) * hy;
      c = clip_halfplane(c, {-1, 0}, -x0, 0);
      c = clip_halfplane(c, {1, 0}, x1, 0);
      c = clip_halfplane(c, {0, -1}, -y0, 0);
      c = clip_halfplane(c, {0, 1}, y1, 0);
      // Slivers below 1% of a grid cell are dropped; their mass goes to the rescaling.
      if (c.empty() || c.area() < 1e-2 * hx * hy) continue;
      Point2 y = loop_centroid(c.vertices);
      if (jitter > 0.0) y = y + Point2{rng.uniform(-jitter, jitter) * hx, rng.uniform(-jitter, jitter) * hy};
      const double m = integrate_polygon(g, c.vertices);
      t.points.push_back(y);
      t.masses.push_back(m);
      sum += m;
    }
  for (double& m : t.masses) m *= total_mass / sum;
  t.validate();
  return t;
}

BrenierPotential::BrenierPotential(TargetCloud targets, std::vector<double> psi)
    : targets_(std::move(targets)), psi_(std::move(psi)) {
  if (targets_.size() != psi_.size()) throw MismatchError("Brenier potential: weight count differs from target count");
  if (targets_.points.size() != targets_.masses.size())
    throw MismatchError("Brenier potential: target point and mass counts differ");
  if (targets_.points.empty()) throw PreconditionError("Brenier potential: no targets");
}

double BrenierPotential::operator()(Point2 x) const {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < psi_.size(); ++j) best = std::max(best, dot(x, targets_.points[j]) - psi_[j]);
  return best;
}

std::size_t BrenierPotential::argmax(Point2 x) const {
  std::size_t arg = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < psi_.size(); ++j) {
    const double v = dot(x, targets_.points[j]) - psi_[j];
    if (v > best) {
      best = v;
      arg = j;
    }
  }
  return arg;
}

double LaguerreDiagram::total_area() const {
  double s = 0.0;
  for (const auto& c : cells) s += c.area();
  return s;
}

LaguerreDiagram laguerre_diagram(const BrenierPotential& pot, const ConvexPolygon& domain, const DensitySpec& f,
                                 const QuadratureRule& rule) {
  LaguerreDiagram d;
  d.cells = laguerre_cells(pot.targets(), pot.psi(), domain);
  d.masses.resize(d.cells.size());
  for (std::size_t j = 0; j < d.cells.size(); ++j)
    d.masses[j] = d.cells[j].empty() ? 0.0 : integrate_polygon(f, d.cells[j].vertices, rule);
  return d;
}

void OTOptions::validate() const {
  if (!(tol > 0.0)) throw ConfigError("OT tolerance must be positive");
  if (max_iter < 1) throw ConfigError("OT max_iter must be positive");
  if (max_retries < 0) throw ConfigError("OT max_retries must be nonnegative");
}

BrenierPotential solve_semidiscrete(const DensitySpec& f, const ConvexPolygon& domain, const TargetCloud& targets,
                                    const OTOptions& opts, OTStats* stats) {
  opts.validate();
  targets.validate();
  f.bounds(domain);
  const double source = integrate_polygon(f, domain.vertices(), opts.rule);
  if (std::abs(targets.total() - source) > 1e-10 * source)
    throw PreconditionError("solve_semidiscrete: target mass " + format_double(targets.total()) +
                            " differs from source mass " + format_double(source));
  OTStats local;
  OTStats& st = stats ? *stats : local;
  st = OTStats{};
  const std::size_t n = targets.size();
  if (n == 1) return BrenierPotential(targets, {0.0});

  std::vector<double> psi = initial_weights(targets, domain);
  apply_gauge(psi);
  DualState s = evaluate(targets, psi, domain, f, opts.rule);
  const double min_target = *std::min_element(targets.masses.begin(), targets.masses.end());
  const double floor_mass = 0.5 * std::min(min_target, s.min_mass);
  std::vector<double> delta, trial(n);
  for (int it = 0; it < opts.max_iter; ++it) {
    st.residual = s.rel_err;
    if (s.rel_err <= opts.tol) return BrenierPotential(targets, psi);
    double max_diag = 0.0;
    bool accepted = false;
    if (newton_direction(targets, f, s, delta, max_diag)) {
      for (double theta = 1.0; theta >= 0x1.0p-12; theta *= 0.5) {
        for (std::size_t j = 0; j < n; ++j) trial[j] = psi[j] + theta * delta[j];
        DualState next = evaluate(targets, trial, domain, f, opts.rule);
        if (next.min_mass >= floor_mass && next.norm2 <= (1.0 - 0.5 * theta) * s.norm2) {
          psi = trial;
          s = std::move(next);
          accepted = true;
          ++st.newton_steps;
          break;
        }
      }
    }
    if (accepted) continue;
    // Gradient step on the convex dual functional with Armijo backtracking.
    const double phi = dual_objective(targets, psi, s.diagram, f, opts.rule);
    double tau = max_diag > 0.0 ? 1.0 / max_diag : 1.0;
    for (int back = 0; back < 40 && !accepted; ++back, tau *= 0.5) {
      for (std::size_t j = 0; j < n; ++j) trial[j] = psi[j] + tau * s.residual[j];
      apply_gauge(trial);
      DualState next = evaluate(targets, trial, domain, f, opts.rule);
      const double phi_next = dual_objective(targets, trial, next.diagram, f, opts.rule);
      if (phi_next <= phi - 1e-4 * tau * s.norm2 * s.norm2) {
        psi = trial;
        s = std::move(next);
        accepted = true;
        ++st.gradient_steps;
      }
    }
    if (!accepted && ++st.retries > opts.max_retries)
      throw ConvergenceError("semi-discrete OT stalled (empty-cell trap) at relative residual " +
                                 format_double(s.rel_err),
                             s.rel_err);
  }
  st.residual = s.rel_err;
  if (s.rel_err <= opts.tol) return BrenierPotential(targets, psi);
  throw ConvergenceError("semi-discrete OT did not converge: relative residual " + format_double(s.rel_err),
                         s.rel_err);
}

double dual_residual(const BrenierPotential& pot, const ConvexPolygon& domain, const DensitySpec& f,
                     const QuadratureRule& rule) {
  return evaluate(pot.targets(), pot.psi(), domain, f, rule).rel_err;
}

Point2 transport_map_eval(const BrenierPotential& pot, const ConvexPolygon& domain, Point2 x) {
  if (!domain.contains(x, 1e-12 * domain.diameter()))
    throw PreconditionError("transport map evaluated outside the source domain");
  return pot.targets().points[pot.argmax(x)];
}

double density_ratio_l1(const DensitySpec& fk, const DensitySpec& gk, const BrenierPotential& pot_k,
                        const DensitySpec& f, const DensitySpec& g, const BrenierPotential& pot,
                        const ConvexPolygon& domain, double sample_h) {
  if (!(sample_h > 0.0)) throw PreconditionError("density_ratio_l1: sample spacing must be positive");
  Point2 lo, hi;
  domain.bounding_box(lo, hi);
  const int nx = static_cast<int>(std::ceil((hi.x - lo.x) / sample_h));
  const int ny = static_cast<int>(std::ceil((hi.y - lo.y) / sample_h));
  double s = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Point2 x{lo.x + (i + 0.5) * sample_h, lo.y + (j + 0.5) * sample_h};
      if (!domain.contains(x)) continue;
      const Point2 tk = pot_k.targets().points[pot_k.argmax(x)];
      const Point2 t = pot.targets().points[pot.argmax(x)];
      s += std::abs(fk(x) / gk(tk) - f(x) / g(t));
    }
  return s * sample_h * sample_h;
}

MapDistance map_w11_distance(const BrenierPotential& a, const BrenierPotential& b, const GridWindow& w,
                             double sigma) {
  const double h = w.spacing();
  if (!(sigma >= 2.0 * h)) throw PreconditionError("map_w11_distance: mollification width below 2h");
  // Lattice at spacing h/2 carrying the potential difference; the stencil points lie on it.
  const double d = 0.5 * h;
  Point2 lo, hi;
  w.window().bounding_box(lo, hi);
  const int reach = static_cast<int>(std::ceil(sigma / d));
  const int pad = reach + 2;
  const int nx = static_cast<int>(std::llround((hi.x - lo.x) / d)) + 1 + 2 * pad;
  const int ny = static_cast<int>(std::llround((hi.y - lo.y) / d)) + 1 + 2 * pad;
  auto at = [&](int i, int j) { return Point2{lo.x + (i - pad) * d, lo.y + (j - pad) * d}; };
  std::vector<double> diff(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) diff[static_cast<std::size_t>(j) * nx + i] = a(at(i, j)) - b(at(i, j));
  // Separable tent kernel t(s) = max(0, 1 - |s|/σ), normalized on the lattice.
  std::vector<double> k(2 * reach + 1);
  double ksum = 0.0;
  for (int q = -reach; q <= reach; ++q) ksum += (k[q + reach] = std::max(0.0, 1.0 - std::abs(q) * d / sigma));
  for (double& v : k) v /= ksum;
  std::vector<double> tmp(diff.size(), 0.0), moll(diff.size(), 0.0);
  for (int j = 0; j < ny; ++j)
    for (int i = reach; i < nx - reach; ++i) {
      double s = 0.0;
      for (int q = -reach; q <= reach; ++q) s += k[q + reach] * diff[static_cast<std::size_t>(j) * nx + i + q];
      tmp[static_cast<std::size_t>(j) * nx + i] = s;
    }
  for (int j = reach; j < ny - reach; ++j)
    for (int i = reach; i < nx - reach; ++i) {
      double s = 0.0;
      for (int q = -reach; q <= reach; ++q) s += k[q + reach] * tmp[static_cast<std::size_t>(j + q) * nx + i];
      moll[static_cast<std::size_t>(j) * nx + i] = s;
    }
  auto m = [&](int i, int j) { return moll[static_cast<std::size_t>(j) * nx + i]; };
  MapDistance out;
  const double area = h * h;
  for (const Point2 x : w.samples()) {
    out.map += norm(a.targets().points[a.argmax(x)] - b.targets().points[b.argmax(x)]) * area;
    const int i = static_cast<int>(std::llround((x.x - lo.x) / d)) + pad;
    const int j = static_cast<int>(std::llround((x.y - lo.y) / d)) + pad;
    const double c = m(i, j);
    const double hxx = (m(i + 2, j) - 2.0 * c + m(i - 2, j)) / (h * h);
    const double hyy = (m(i, j + 2) - 2.0 * c + m(i, j - 2)) / (h * h);
    const double hxy = (m(i + 2, j + 2) - m(i - 2, j + 2) - m(i + 2, j - 2) + m(i - 2, j - 2)) / (4.0 * h * h);
    out.gradient += std::sqrt(hxx * hxx + 2.0 * hxy * hxy + hyy * hyy) * area;
  }
  out.total = out.map + out.gradient;
  return out;
}

std::vector<double> Section::values(const std::function<double(Point2)>& u, const NodeSet& nodes) const {
  std::vector<double> v(nodes.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = nodes.is_boundary(i) ? 0.0 : u(nodes.point(i)) - affine(nodes.point(i));
  return v;
}

namespace {

// Z = domain ∩ {plane_k(z) <= ℓ(z) for every affine piece}; domain edges carry negative tags.
Section section_from_planes(const ConvexPolygon& domain, std::span<const Point2> grads, std::span<const double> offs,
                            Point2 slope, double offset) {
  Cell c = domain.as_cell(-1);
  for (std::size_t k = 0; k < grads.size() && !c.empty(); ++k)
    c = clip_halfplane(c, grads[k] - slope, offset - offs[k], static_cast<int>(k));
  if (c.empty()) throw PreconditionError("extract_section: the section is empty");
  for (int tag : c.edge_tags)
    if (tag < 0) throw PreconditionError("extract_section: the section touches the domain boundary");
  Section s;
  s.region = ConvexPolygon::from_vertices(c.vertices);
  s.slope = slope;
  s.offset = offset;
  return s;
}

void check_section_input(const ConvexPolygon& domain, Point2 x0, double b) {
  if (!(b > 0.0)) throw PreconditionError("extract_section: offset b must be positive (section is empty)");
  if (!(domain.signed_distance(x0) > 0.0)) throw PreconditionError("extract_section: x0 is not interior");
}

}  // namespace

Section extract_section(const PLConvexFunction& u, Point2 x0, double b) {
  const ConvexPolygon& domain = u.nodes().domain();
  check_section_input(domain, x0, b);
  const Point2 p = u.face_gradients()[u.support_face(x0)];
  return section_from_planes(domain, u.face_gradients(), u.face_offsets(), p, u(x0) - dot(p, x0) + b);
}

Section extract_section(const BrenierPotential& pot, const ConvexPolygon& domain, Point2 x0, double b) {
  check_section_input(domain, x0, b);
  const Point2 p = pot.targets().points[pot.argmax(x0)];
  std::vector<double> offs(pot.psi().size());
  for (std::size_t j = 0; j < offs.size(); ++j) offs[j] = -pot.psi()[j];
  return section_from_planes(domain, pot.targets().points, offs, p, pot(x0) - dot(p, x0) + b);
}

void write_potential_csv(const std::string& path, const BrenierPotential& pot) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "yx,yy,mass,psi\n";
  const auto& t = pot.targets();
  for (std::size_t j = 0; j < t.size(); ++j)
    out << format_double(t.points[j].x) << ',' << format_double(t.points[j].y) << ',' << format_double(t.masses[j])
        << ',' << format_double(pot.psi()[j]) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

BrenierPotential read_potential_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "yx,yy,mass,psi") throw IoError("'" + path + "': expected header yx,yy,mass,psi");
  TargetCloud t;
  std::vector<double> psi;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cols = split_csv_line(line);
    if (cols.size() != 4) throw IoError("'" + path + "' line " + std::to_string(row) + ": expected 4 columns");
    t.points.push_back({parse_double(cols[0]), parse_double(cols[1])});
    t.masses.push_back(parse_double(cols[2]));
    psi.push_back(parse_double(cols[3]));
  }
  return BrenierPotential(std::move(t), std::move(psi));
}

}  // namespace malab
