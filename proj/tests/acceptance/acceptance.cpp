#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "hull_oracle.hpp"
#include "malab/convex_geom.hpp"
#include "malab/harness.hpp"
#include "malab/lower_hull.hpp"
#include "malab/ma_solver.hpp"
#include "malab/ot_semidiscrete.hpp"
#include "malab/random.hpp"
#include "malab/sobolev.hpp"
#include "quadrature_oracle.hpp"

using namespace malab;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail.clear();
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const ConvexPolygon kSquare = ConvexPolygon::rectangle(-1, -1, 1, 1);
const ConvexPolygon kUnit = ConvexPolygon::rectangle(0, 0, 1, 1);

double det(const Sym2& m) { return m.xx * m.yy - m.xy * m.xy; }
double lambda_min(const Sym2& m) {
  const double t = 0.5 * (m.xx + m.yy), d = std::hypot(0.5 * (m.xx - m.yy), m.xy);
  return t - d;
}
double quad(const Sym2& m, Point2 x) { return 0.5 * (m.xx * x.x * x.x + 2.0 * m.xy * x.x * x.y + m.yy * x.y * x.y); }

std::vector<double> sample(const NodeSet& nodes, const std::function<double(Point2)>& fn) {
  std::vector<double> v(nodes.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(nodes.point(i));
  return v;
}

bool nonincreasing_after_first(const std::vector<double>& d) {
  for (std::size_t k = 2; k < d.size(); ++k)
    if (d[k] > d[k - 1]) return false;
  return true;
}

ExperimentConfig s1_config() {
  return ExperimentConfig::parse(R"({"scenario":"S1_decaying",
      "base_density":"clamp:mix:const:1;bump:0.3,-0.2,0.8,0.35,1,1.6",
      "grid":33,"k_max":8,"epsilons":[0.05,0.1,0.2],"tol":1e-10,"seed":1})");
}

ExperimentConfig s2_config() {
  return ExperimentConfig::parse(R"({"scenario":"S2_ot_decaying",
      "base_density":"clamp:mix:const:1;bump:0.3,0.6,0.6,0.3,1,1.6",
      "target_density":"clamp:mix:const:1;bump:0.6,0.4,0.5,0.3,1,1.5",
      "domain":[[0,0],[1,0],[1,1],[0,1]],"grid":16,"k_max":8,"tol":1e-10,"seed":1})");
}

ExperimentConfig s2_translation_config() {
  return ExperimentConfig::parse(R"({"scenario":"S2_ot_decaying","domain":[[0,0],[1,0],[1,1],[0,1]],
      "translation":[0.3,-0.2],"grid":16,"k_max":8,"tol":1e-10,"seed":1})");
}

std::string s1_report, s2_report, s2t_report;

Outcome a1() {
  Outcome o;
  std::vector<Point2> pts{{0, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}};
  std::vector<bool> b(pts.size(), true);
  b[0] = false;
  std::vector<double> v(pts.size(), 1.0);
  v[0] = 0.0;
  const auto mu = ma_measure(PLConvexFunction::from_values(NodeSet::build(kSquare, pts, b), v));
  o.require(std::abs(mu.weights[0] - 2.0) <= 1e-12, "cone mass " + fmt("%.17g", mu.weights[0]));
  Rng rng(20240611);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Point3> p;
    for (int i = 0; i < 20; ++i) p.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    std::set<std::array<int, 3>> got;
    for (auto t : lower_hull_3d(p).faces) {
      std::sort(t.begin(), t.end());
      got.insert(t);
    }
    mismatches += got != testing::brute_force_lower_faces(p);
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " face-set mismatches");
  if (o.pass) o.detail = "cone mass " + fmt("%.17g", mu.weights[0]) + ", 200/200 hulls match the oracle";
  return o;
}

Outcome a2() {
  Outcome o;
  const auto dom = ConvexPolygon::regular(64, 1.0);
  std::vector<double> errs;
  for (int n : {17, 33, 65}) {
    const auto nodes = NodeSet::clipped_grid(dom, n);
    const auto u = solve_dirichlet(dom, DensitySpec::constant(1.0), nodes);
    double err = 0.0;
    for (std::size_t i : nodes.interior())
      err = std::max(err, std::abs(u.values()[i] - 0.5 * (norm2(nodes.point(i)) - 1.0)));
    errs.push_back(err);
  }
  o.require(errs[0] / errs[1] >= 1.5 && errs[1] / errs[2] >= 1.5, "refinement ratio below 1.5");
  o.require(errs[1] <= 3e-2, "error at 33 above 3e-2");
  o.detail = "max errors " + fmt("%.3e", errs[0]) + " / " + fmt("%.3e", errs[1]) + " / " + fmt("%.3e", errs[2]) +
             (o.pass ? "" : " (" + o.detail + ")");
  return o;
}

Outcome a3() {
  Outcome o;
  const auto r = run_stability(s1_config());
  s1_report = report_to_string(r, ReportFormat::Csv);
  for (double ok : r.column("ok")) o.require(ok == 1.0, "a solve failed");
  const auto w = r.column("w21");
  const double floor = r.column("w21_floor").back();
  const double contact = r.column("contact_0.1").back(), pinch = r.column("pinch_0.1").back();
  o.require(nonincreasing_after_first(w), "w21 increases after row 1");
  o.require(w.back() <= 2.0 * floor, "final w21 above twice the floor");
  o.require(contact >= 0.85, "contact fraction below 0.85");
  o.require(pinch >= 0.9, "pinch fraction below 0.9");
  o.detail = "w21 " + fmt("%.3e", w.front()) + " -> " + fmt("%.3e", w.back()) + " (floor " + fmt("%.3e", floor) +
             "), contact " + fmt("%.3f", contact) + ", pinch " + fmt("%.3f", pinch) +
             (o.pass ? "" : " (" + o.detail + ")");
  return o;
}

Outcome a4() {
  Outcome o;
  Rng rng(404);
  const auto nodes = NodeSet::clipped_grid(kSquare, 65);
  const auto region = ConvexPolygon::rectangle(-0.5, -0.5, 0.5, 0.5);
  double cells = 0.0;
  for (std::size_t i : nodes.interior())
    if (region.contains(nodes.point(i))) cells += nodes.dual_area(i);
  auto draw = [&] { return Sym2{rng.uniform(0.5, 2), rng.uniform(0.5, 2), rng.uniform(0.5, 2)}; };
  double worst_gap = -1e300, worst_l = 0.0, worst_r = 0.0;
  for (int pair = 0; pair < 100; ++pair) {
    Sym2 A, B, D;
    do {
      A = draw();
      B = draw();
      D = {A.xx - B.xx, A.xy - B.xy, A.yy - B.yy};
    } while (lambda_min(B) <= 0.0 || lambda_min(D) < 0.05);
    const auto u = PLConvexFunction::from_values(nodes, sample(nodes, [&](Point2 x) { return quad(A, x); }));
    const auto v = PLConvexFunction::from_values(nodes, sample(nodes, [&](Point2 x) { return quad(B, x); }));
    const auto c = lemma31_check(u, v, DensitySpec::constant(det(A)), DensitySpec::constant(det(B)), region);
    const double s = std::sqrt(det(A)) - std::sqrt(det(B));
    worst_gap = std::max(worst_gap, c.lhs - c.rhs);
    worst_l = std::max(worst_l, std::abs(c.lhs / cells - det(D)) / det(D));
    worst_r = std::max(worst_r, std::abs(c.rhs / cells - s * s) / (s * s));
  }
  o.require(worst_gap <= 1e-6, "lhs exceeds rhs + 1e-6");
  o.require(worst_l <= 5e-3 && worst_r <= 5e-3, "closed form missed by more than 5e-3");
  o.detail = "max lhs-rhs " + fmt("%.3e", worst_gap) + ", closed-form rel errors " + fmt("%.2e", worst_l) + " / " +
             fmt("%.2e", worst_r) + (o.pass ? "" : " (" + o.detail + ")");
  return o;
}

Outcome a5() {
  Outcome o;
  constexpr double kC = 1.0;
  const auto nodes = NodeSet::clipped_grid(kSquare, 33, 0.2, 5);
  const auto region = ConvexPolygon::rectangle(-0.5, -0.5, 0.5, 0.5);
  const double h = nodes.spacing();
  const auto affine =
      misconv_check(sample(nodes, [](Point2 x) { return 2.0 * x.x - x.y + 0.5; }), [](Point2) { return Sym2{}; },
                    nodes, region);
  o.require(affine.lhs == 0.0 && affine.rhs == 0.0, "affine case is not exactly 0 = 0");
  double fit = 0.0;
  auto check = [&](const InequalityCheck& c, const char* name) {
    fit = std::max(fit, (c.lhs - c.rhs) / h);
    o.require(c.lhs <= c.rhs + kC * h, std::string(name) + " violates lhs <= rhs + C h");
  };
  check(misconv_check(sample(nodes, [](Point2 x) { return -norm2(x); }), [](Point2) { return Sym2{-2, 0, -2}; },
                      nodes, region),
        "concave");
  check(misconv_check(sample(nodes, [](Point2 x) { return x.x * x.x - 0.5 * x.y * x.y; }),
                      [](Point2) { return Sym2{2, 0, -1}; }, nodes, region),
        "saddle");
  Rng rng(55);
  for (int t = 0; t < 10; ++t) {
    const Sym2 m{rng.uniform(0.5, 3), rng.uniform(-0.4, 0.4), rng.uniform(0.5, 3)};
    check(misconv_check(sample(nodes, [&](Point2 x) { return quad(m, x); }), [&](Point2) { return m; }, nodes,
                        region),
          "convex quadratic");
  }
  check(misconv_check(sample(nodes, [](Point2 x) { return std::exp(x.x + 0.5 * x.y); }),
                      [](Point2 x) {
                        const double e = std::exp(x.x + 0.5 * x.y);
                        return Sym2{e, 0.5 * e, 0.25 * e};
                      },
                      nodes, region),
        "convex exponential");
  o.detail = "affine 0 = 0, max (lhs-rhs)/h " + fmt("%.3e", fit) + " <= C = 1" + (o.pass ? "" : " (" + o.detail + ")");
  return o;
}

// Shifted unit-grid centroids with uniform masses.
TargetCloud shifted_centroids(int n, Point2 c) {
  TargetCloud t;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      t.points.push_back(Point2{(i + 0.5) / n, (j + 0.5) / n} + c);
      t.masses.push_back(1.0 / (n * n));
    }
  return t;
}

Outcome a6() {
  Outcome o;
  Rng rng(606);
  double worst_res = 0.0, worst_push = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const auto dom = ConvexPolygon::regular(5 + inst % 4, 1.0, {rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)});
    const auto f = DensitySpec::parse("clamp:mix:const:1;bump:" + std::to_string(rng.uniform(-0.3, 0.3)) + ",0.1," +
                                      std::to_string(rng.uniform(0.2, 1.0)) + ",0.4,0.5,3");
    const double total = integrate_polygon(f, dom.vertices());
    TargetCloud t;
    const int n = 8 + inst % 17;
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      t.points.push_back({rng.uniform(1, 2), rng.uniform(1, 3)});
      t.masses.push_back(rng.uniform(0.5, 1.5));
      sum += t.masses.back();
    }
    for (double& m : t.masses) m *= total / sum;
    const auto pot = solve_semidiscrete(f, dom, t, {.tol = 1e-8});
    const auto d = laguerre_diagram(pot, dom, f);
    for (std::size_t j = 0; j < t.size(); ++j)
      worst_res = std::max(worst_res, std::abs(d.masses[j] - t.masses[j]) / t.masses[j]);
    const Point2 lo{1.2, 1.5}, hi{1.9, 2.6};
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t j = 0; j < t.size(); ++j) {
      const Point2 y = t.points[j];
      if (y.x < lo.x || y.x > hi.x || y.y < lo.y || y.y > hi.y) continue;
      lhs += t.masses[j];
      rhs += testing::polygon_integral([&](Point2 x) { return f(x); }, d.cells[j].vertices, 1e-12);
    }
    worst_push = std::max(worst_push, std::abs(lhs - rhs) / total);
  }
  o.require(worst_res <= 1e-6, "mass residual above 1e-6");
  o.require(worst_push <= 1e-6, "push-forward identity missed by more than 1e-6");

  const Point2 c{0.3, -0.2};
  const auto t = shifted_centroids(16, c);
  const auto pot = solve_semidiscrete(DensitySpec::constant(1.0), kUnit, t);
  // Brenier convention ψ_j = |y_j|²/2 - w_j with Voronoi weights w_j = y_j·c - |c|²/2 + const.
  const auto w = [&](std::size_t j) { return 0.5 * norm2(t.points[j]) - pot.psi()[j]; };
  const double k0 = w(0) - (dot(t.points[0], c) - 0.5 * norm2(c));
  double worst_w = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j)
    worst_w = std::max(worst_w, std::abs(w(j) - (dot(t.points[j], c) - 0.5 * norm2(c) + k0)));
  o.require(worst_w <= 1e-6, "translation weights missed by more than 1e-6");
  o.detail = "50 instances: max rel mass residual " + fmt("%.2e", worst_res) + ", push-forward " +
             fmt("%.2e", worst_push) + "; translation weights " + fmt("%.2e", worst_w) +
             (o.pass ? "" : " (" + o.detail + ")");
  return o;
}

Outcome a7() {
  Outcome o;
  const auto r = run_ot_stability(s2_config());
  s2_report = report_to_string(r, ReportFormat::Csv);
  for (double ok : r.column("ok")) o.require(ok == 1.0, "a solve failed");
  const auto dr = r.column("density_ratio"), mw = r.column("map_w11");
  const double dr_floor = r.column("density_ratio_floor").back(), mw_floor = r.column("map_floor").back();
  o.require(nonincreasing_after_first(dr), "density ratio increases after row 1");
  o.require(nonincreasing_after_first(mw), "map distance increases after row 1");
  o.require(dr.back() <= 2.0 * dr_floor, "final density ratio above twice the floor");
  o.require(mw.back() <= 2.0 * mw_floor, "final map distance above twice the floor");

  const auto tr = run_ot_stability(s2_translation_config());
  s2t_report = report_to_string(tr, ReportFormat::Csv);
  double worst = 0.0;
  for (const auto& row : tr.rows) {
    const double expected = std::ldexp(1.0, -static_cast<int>(row[tr.index_of("k")])) * row[tr.index_of("window_area")];
    worst = std::max(worst, std::abs(row[tr.index_of("map_w11")] - expected) / expected);
  }
  o.require(worst <= 0.2, "translation family map distance off by more than 20%");
  o.detail = "density ratio " + fmt("%.3e", dr.front()) + " -> " + fmt("%.3e", dr.back()) + " (floor " +
             fmt("%.3e", dr_floor) + "), map " + fmt("%.3e", mw.front()) + " -> " + fmt("%.3e", mw.back()) +
             " (floor " + fmt("%.3e", mw_floor) + "), translation rel error " + fmt("%.2e", worst) +
             (o.pass ? "" : " (" + o.detail + ")");
  return o;
}

// Clips a convex polygon to {p : a·p <= b}.
std::vector<Point2> clip(const std::vector<Point2>& poly, Point2 a, double b) {
  std::vector<Point2> out;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2 p = poly[i], q = poly[(i + 1) % poly.size()];
    const double sp = dot(a, p) - b, sq = dot(a, q) - b;
    if (sp <= 0) out.push_back(p);
    if ((sp < 0 && sq > 0) || (sp > 0 && sq < 0)) out.push_back(p + (q - p) * (sp / (sp - sq)));
  }
  return out;
}

double area(const std::vector<Point2>& poly) {
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) s += cross(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * std::abs(s);
}

// Slopes p whose plane through (x_i, f_i) clears every other node by more than 2δ stay in the
// subdifferential of any δ-perturbation at x_i, so the eroded cell areas bound the mass loss.
double erosion_bound(const NodeSet& nodes, const std::vector<double>& f, const ConvexPolygon& region, double delta,
                     double box) {
  double eps = 0.0;
  for (std::size_t i : nodes.interior()) {
    const Point2 xi = nodes.point(i);
    if (!region.contains(xi)) continue;
    std::vector<Point2> full{{-box, -box}, {box, -box}, {box, box}, {-box, box}}, eroded = full;
    for (std::size_t j = 0; j < nodes.size() && !full.empty(); ++j) {
      if (j == i) continue;
      const Point2 d = nodes.point(j) - xi;
      full = clip(full, d, f[j] - f[i]);
      if (!eroded.empty()) eroded = clip(eroded, d, f[j] - f[i] - 2.0 * delta);
    }
    eps += area(full) - (eroded.size() < 3 ? 0.0 : area(eroded));
  }
  return eps;
}

Outcome a8() {
  Outcome o;
  constexpr int kMax = 14;
  Rng rng(808);
  double worst_violation = -1e300, worst_final = 0.0, worst_ratio = 0.0;
  int nonmonotone = 0;
  for (int pair = 0; pair < 20; ++pair) {
    const auto nodes = NodeSet::clipped_grid(kSquare, 17, 0.2, rng.bits());
    const double l1 = rng.uniform(0.5, 3), l2 = rng.uniform(0.5, 3), th = rng.uniform(0, 3.14159);
    const double c = std::cos(th), s = std::sin(th);
    const Sym2 m{l1 * c * c + l2 * s * s, (l1 - l2) * c * s, l1 * s * s + l2 * c * c};
    const double gam = rng.uniform(0, 0.5);
    const Point2 q{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double x0 = rng.uniform(-0.7, 0.2), y0 = rng.uniform(-0.7, 0.2);
    const auto region =
        ConvexPolygon::rectangle(x0, y0, x0 + rng.uniform(0.3, 0.7 - x0), y0 + rng.uniform(0.3, 0.7 - y0));
    const auto f =
        PLConvexFunction::from_values(nodes, sample(nodes, [&](Point2 x) { return quad(m, x) + gam * std::exp(dot(q, x)); }));
    std::vector<double> r(nodes.size());
    for (double& x : r) x = rng.uniform(-1, 1);
    const double mu = ma_measure(f).measure_of(nodes, region);
    double box = 1.0;
    for (const auto& g : f.face_gradients()) box = std::max(box, 2.0 * (std::abs(g.x) + std::abs(g.y)));
    double prev = 0.0;
    for (int k = 1; k <= kMax; ++k) {
      const double delta = std::ldexp(1.0, -k);
      auto vk = f.hull_values();
      for (std::size_t i = 0; i < vk.size(); ++i) vk[i] += delta * r[i];
      const double mu_k = ma_measure(PLConvexFunction::from_values(nodes, vk)).measure_of(nodes, region);
      const double eps = erosion_bound(nodes, f.hull_values(), region, delta, box);
      worst_violation = std::max(worst_violation, mu - mu_k - eps);
      if (k > 3 && eps > prev) ++nonmonotone;
      // ε_k → 0 linearly in δ_k: the last halving of δ halves ε up to a δ² correction.
      if (k == kMax) worst_ratio = std::max(worst_ratio, eps / prev);
      prev = eps;
      if (k == kMax) worst_final = std::max(worst_final, eps / mu);
    }
  }
  o.require(worst_violation <= 1e-12, "mass inequality violated");
  o.require(nonmonotone == 0, std::to_string(nonmonotone) + " increases of eps_k after k = 3");
  o.require(worst_ratio <= 0.51, "eps_k does not halve with delta_k");
  o.detail = "20 pairs: max mu_f(A) - mu_fk(A) - eps_k " + fmt("%.2e", worst_violation) + ", eps_14 / mu_f(A) <= " +
             fmt("%.2e", worst_final) +
             ", final eps ratio <= " + fmt("%.4f", worst_ratio) + (o.pass ? "" : " (" + o.detail + ")");
  return o;
}

Outcome a9() {
  Outcome o;
  o.require(report_to_string(run_stability(s1_config()), ReportFormat::Csv) == s1_report, "S1 report differs");
  o.require(report_to_string(run_ot_stability(s2_config()), ReportFormat::Csv) == s2_report, "S2 report differs");
  o.require(report_to_string(run_ot_stability(s2_translation_config()), ReportFormat::Csv) == s2t_report,
            "translation report differs");
  if (o.pass) o.detail = "repeated S1, S2 and translation reports are bit-identical";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    Outcome (*run)();
    double budget_s;
  };
  const Criterion criteria[] = {{"A1", a1, 5},   {"A2", a2, 60},  {"A3", a3, 300}, {"A4", a4, 60},  {"A5", a5, 10},
                                {"A6", a6, 120}, {"A7", a7, 300}, {"A8", a8, 30},  {"A9", a9, 600}};
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) {
      o.pass = false;
      o.detail += "; runtime above " + fmt("%.0f", c.budget_s) + " s";
    }
    failed += !o.pass;
    std::printf("%s %s %s [%.1f s]\n", c.id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
