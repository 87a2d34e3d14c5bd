#include "malab/sobolev.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "malab/errors.hpp"
#include "malab/io.hpp"

namespace malab {
namespace {

void require_same_samples(const HessianField& a, const HessianField& b, const char* what) {
  if (a.size() != b.size() || a.h != b.h || a.points != std::vector<Point2>(b.points))
    throw MismatchError(std::string(what) + ": fields live on different sample sets");
}

double frobenius(const Sym2& m) { return std::sqrt(m.xx * m.xx + 2.0 * m.xy * m.xy + m.yy * m.yy); }

double min_eigenvalue(const Sym2& m) {
  const double mean = 0.5 * (m.xx + m.yy);
  const double half = 0.5 * (m.xx - m.yy);
  return mean - std::hypot(half, m.xy);
}

std::vector<double> envelope_input(const PLConvexFunction& f) { return f.hull_values(); }

}  // namespace

GridWindow GridWindow::make(ConvexPolygon window, const ConvexPolygon& domain, double h) {
  if (!(h > 0.0)) throw PreconditionError("grid window: spacing must be positive");
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& v : window.vertices()) margin = std::min(margin, domain.signed_distance(v));
  if (!(margin >= 2.0 * h))
    throw PreconditionError("grid window: margin " + format_double(margin) + " to the domain boundary is below 2h = " +
                            format_double(2.0 * h));
  GridWindow w;
  Point2 lo, hi;
  window.bounding_box(lo, hi);
  const int nx = std::max(1, static_cast<int>(std::floor((hi.x - lo.x) / h + 1e-9)));
  const int ny = std::max(1, static_cast<int>(std::floor((hi.y - lo.y) / h + 1e-9)));
  const double tol = 1e-12 * window.diameter();
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Point2 p{lo.x + (i + 0.5) * h, lo.y + (j + 0.5) * h};
      if (window.contains(p, tol)) w.samples_.push_back(p);
    }
  if (w.samples_.empty()) throw PreconditionError("grid window: no samples inside the window");
  w.window_ = std::move(window);
  w.h_ = h;
  w.margin_ = margin;
  return w;
}

HessianField sample_hessian(const std::function<double(Point2)>& u, const GridWindow& w) {
  HessianField out;
  const double h = w.spacing();
  out.h = h;
  const auto pts = w.samples();
  out.points.assign(pts.begin(), pts.end());
  out.value.resize(pts.size());
  out.gradient.resize(pts.size());
  out.hessian.resize(pts.size());
  for (std::size_t s = 0; s < pts.size(); ++s) {
    const Point2 x = pts[s];
    double v[3][3];
    for (int j = -1; j <= 1; ++j)
      for (int i = -1; i <= 1; ++i) v[j + 1][i + 1] = u({x.x + i * h, x.y + j * h});
    const double c = v[1][1];
    out.value[s] = c;
    out.gradient[s] = {(v[1][2] - v[1][0]) / (2.0 * h), (v[2][1] - v[0][1]) / (2.0 * h)};
    Sym2 m;
    m.xx = (v[1][2] - 2.0 * c + v[1][0]) / (h * h);
    m.yy = (v[2][1] - 2.0 * c + v[0][1]) / (h * h);
    m.xy = (v[2][2] - v[2][0] - v[0][2] + v[0][0]) / (4.0 * h * h);
    out.hessian[s] = m;
  }
  return out;
}

HessianField sample_hessian(const PLConvexFunction& u, const GridWindow& w) {
  const auto& dom = u.nodes().domain();
  const double h = w.spacing();
  for (const auto& v : w.window().vertices())
    if (dom.signed_distance(v) < std::sqrt(2.0) * h)
      throw PreconditionError("sample_hessian: difference stencil leaves the function's domain");
  return sample_hessian([&u](Point2 x) { return u(x); }, w);
}

W21Distance w21_distance(const HessianField& a, const HessianField& b) {
  require_same_samples(a, b, "w21_distance");
  W21Distance d;
  const double area = a.h * a.h;
  for (std::size_t s = 0; s < a.size(); ++s) {
    d.value += std::abs(a.value[s] - b.value[s]) * area;
    d.gradient += norm(a.gradient[s] - b.gradient[s]) * area;
    const Sym2 m{a.hessian[s].xx - b.hessian[s].xx, a.hessian[s].xy - b.hessian[s].xy,
                 a.hessian[s].yy - b.hessian[s].yy};
    d.hessian += frobenius(m) * area;
  }
  d.total = d.value + d.gradient + d.hessian;
  return d;
}

double lgamma_hessian_norm(const HessianField& a, double gamma) {
  if (!(gamma >= 1.0 && gamma <= 4.0)) throw PreconditionError("lgamma_hessian_norm: gamma must lie in [1, 4]");
  double s = 0.0;
  for (const auto& m : a.hessian) s += std::pow(frobenius(m), gamma);
  return std::pow(s * a.h * a.h, 1.0 / gamma);
}

double contact_fraction(const PLConvexFunction& u, const PLConvexFunction& uk, double eps, const GridWindow& w,
                        double tolerance_factor) {
  if (!(eps > 0.0 && eps < 1.0)) throw PreconditionError("contact_fraction: eps must lie in (0, 1)");
  const auto pts = w.samples();
  std::vector<double> d(pts.size());
  for (std::size_t s = 0; s < pts.size(); ++s) d[s] = u(pts[s]) - (1.0 - eps) * uk(pts[s]);
  if (pts.size() < 3) return 1.0;
  const auto env = convex_envelope(pts, d, tolerance_factor);
  const auto hits = std::count(env.contact.begin(), env.contact.end(), true);
  return static_cast<double>(hits) / static_cast<double>(pts.size());
}

double psd_pinch_fraction(const HessianField& a, const HessianField& b, double eps) {
  require_same_samples(a, b, "psd_pinch_fraction");
  if (!(eps > 0.0 && eps < 1.0)) throw PreconditionError("psd_pinch_fraction: eps must lie in (0, 1)");
  if (a.size() == 0) return 1.0;
  double scale = 0.0;
  for (const auto* f : {&a, &b})
    for (const auto& m : f->hessian) scale = std::max({scale, std::abs(m.xx), std::abs(m.xy), std::abs(m.yy)});
  const double tau = 1e-8 * scale;
  std::size_t hits = 0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    const Sym2& A = a.hessian[s];
    const Sym2& B = b.hessian[s];
    const double k = 1.0 - eps;
    const Sym2 lower{A.xx - k * B.xx, A.xy - k * B.xy, A.yy - k * B.yy};
    const Sym2 upper{B.xx / k - A.xx, B.xy / k - A.xy, B.yy / k - A.yy};
    if (min_eigenvalue(lower) >= -tau && min_eigenvalue(upper) >= -tau) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(a.size());
}

InequalityCheck lemma31_check(const PLConvexFunction& u, const PLConvexFunction& v, const DensitySpec& f,
                              const DensitySpec& g, const ConvexPolygon& region) {
  const NodeSet& nodes = u.nodes();
  if (!nodes.same_as(v.nodes())) throw MismatchError("lemma31_check: u and v live on different node sets");
  const auto uu = envelope_input(u);
  const auto vv = envelope_input(v);
  std::vector<double> diff(nodes.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = uu[i] - vv[i];
  const auto env = convex_envelope(nodes, diff);
  const auto mu = ma_measure(PLConvexFunction::from_values(nodes, env.envelope));
  InequalityCheck out;
  for (std::size_t i : nodes.interior()) {
    const Point2 x = nodes.point(i);
    if (!region.contains(x)) continue;
    out.lhs += mu.weights[i];
    if (env.contact[i]) {
      const double d = std::sqrt(f(x)) - std::sqrt(g(x));
      out.rhs += d * d * nodes.dual_area(i);
    }
  }
  return out;
}

InequalityCheck misconv_check(std::span<const double> v_values, const std::function<Sym2(Point2)>& hess,
                              const NodeSet& nodes, const ConvexPolygon& region) {
  if (v_values.size() != nodes.size()) throw MismatchError("misconv_check: value count differs from node count");
  const auto env = convex_envelope(nodes, v_values);
  const auto mu = ma_measure(PLConvexFunction::from_values(nodes, env.envelope));
  InequalityCheck out;
  for (std::size_t i : nodes.interior()) {
    const Point2 x = nodes.point(i);
    if (!region.contains(x)) continue;
    out.lhs += mu.weights[i];
    if (env.contact[i]) {
      const Sym2 m = hess(x);
      out.rhs += std::max(m.xx * m.yy - m.xy * m.xy, 0.0) * nodes.dual_area(i);
    }
  }
  return out;
}

InequalityCheck llogl_diagnostic(const HessianField& a, const HessianField& b, double delta) {
  require_same_samples(a, b, "llogl_diagnostic");
  if (!(delta > 0.0)) throw PreconditionError("llogl_diagnostic: delta must be positive");
  InequalityCheck out;
  const double area = a.h * a.h;
  for (std::size_t s = 0; s < a.size(); ++s) {
    const Sym2 m{a.hessian[s].xx - b.hessian[s].xx, a.hessian[s].xy - b.hessian[s].xy,
                 a.hessian[s].yy - b.hessian[s].yy};
    const double t = frobenius(m);
    out.lhs += t * area;
    out.rhs += (delta * t * std::log(2.0 + t) + std::exp(1.0 / delta)) * area;
  }
  return out;
}

void write_hessian_csv(const std::string& path, const HessianField& field) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "x,y,u,ux,uy,uxx,uxy,uyy\n";
  for (std::size_t s = 0; s < field.size(); ++s) {
    const auto& p = field.points[s];
    const auto& g = field.gradient[s];
    const auto& m = field.hessian[s];
    out << format_double(p.x) << ',' << format_double(p.y) << ',' << format_double(field.value[s]) << ','
        << format_double(g.x) << ',' << format_double(g.y) << ',' << format_double(m.xx) << ',' << format_double(m.xy)
        << ',' << format_double(m.yy) << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace malab
