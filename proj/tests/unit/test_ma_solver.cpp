#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "malab/errors.hpp"
#include "malab/ma_solver.hpp"
#include "malab/random.hpp"
#include "quadrature_oracle.hpp"

using namespace malab;

namespace {

double max_error_vs_disc(const PLConvexFunction& u) {
  double err = 0.0;
  for (std::size_t i : u.nodes().interior()) {
    const Point2 p = u.nodes().point(i);
    err = std::max(err, std::abs(u.values()[i] - 0.5 * (norm2(p) - 1.0)));
  }
  return err;
}

// Subdifferential area at a single interior node with value t, the three
// triangle corners held at 0: the triangle spanned by the three face gradients.
double single_node_area(Point2 c, const std::array<Point2, 3>& corners, double t) {
  std::array<Eigen::Vector2d, 3> g;
  for (int k = 0; k < 3; ++k) {
    const Point2 a = corners[k], b = corners[(k + 1) % 3];
    Eigen::Matrix3d m;
    m << a.x, a.y, 1, b.x, b.y, 1, c.x, c.y, 1;
    const Eigen::Vector3d coef = m.partialPivLu().solve(Eigen::Vector3d(0, 0, t));
    g[k] = coef.head<2>();
  }
  const Eigen::Vector2d u = g[1] - g[0], w = g[2] - g[0];
  return 0.5 * std::abs(u.x() * w.y() - u.y() * w.x());
}

}  // namespace

TEST_CASE("density grammar parses and prints back") {
  for (const char* text : {"const:1.5", "bump:0.25,-0.5,2,0.3", "mix:const:1;bump:0,0,0.5,0.2",
                           "clamp:mix:const:1;bump:0.2,0.1,0.5,0.3,0.5,2"}) {
    const auto f = DensitySpec::parse(text);
    CHECK(f.to_string() == text);
    CHECK(DensitySpec::parse(f.to_string()).to_string() == text);
  }
  const auto f = DensitySpec::parse("clamp:mix:const:1;bump:0.2,0.1,0.5,0.3,0.5,2");
  CHECK(f({0.2, 0.1}) == doctest::Approx(1.5));
  CHECK(f({5, 5}) == doctest::Approx(1.0));
  const auto b = f.bounds(ConvexPolygon::rectangle(-1, -1, 1, 1));
  CHECK(b.lo == 0.5);
  CHECK(b.hi == 2.0);
  for (const char* bad : {"", "const", "const:x", "bump:1,2,3", "clamp:const:1,2", "clamp:const:1,0,2", "wave:1"})
    CHECK_THROWS_AS(DensitySpec::parse(bad), ConfigError);
  CHECK_THROWS_AS(DensitySpec::constant(0.0).bounds(ConvexPolygon::rectangle(0, 0, 1, 1)), PreconditionError);
}

TEST_CASE("derived density forms") {
  const auto one = DensitySpec::constant(2.0);
  CHECK(DensitySpec::averaged(one, 0.3)({0.1, 0.2}) == 2.0);
  // Disc average of a bump against a fine polygonal-disc integral.
  const auto avg = DensitySpec::averaged(DensitySpec::bump({0, 0}, 1.0, 0.5), 0.2);
  const double direct = testing::polygon_integral(
      [](Point2 p) { return std::exp(-norm2(p) / 0.25); }, ConvexPolygon::regular(256, 0.2).vertices());
  CHECK(avg({0, 0}) == doctest::Approx(direct / ConvexPolygon::regular(256, 0.2).area()).epsilon(1e-3));
  const auto osc = DensitySpec::oscillating(one, 0.5, 4.0 * std::numbers::pi);
  CHECK(osc({0.1, 0}) == doctest::Approx(3.0));
  CHECK(osc({0.3, 0}) == doctest::Approx(1.0));
  CHECK(DensitySpec::scaled(one, 0.25)({3, 3}) == 0.5);
}

TEST_CASE("cell masses of a constant density are scaled dual areas") {
  const auto dom = ConvexPolygon::rectangle(0, 0, 1, 1);
  const auto ns = NodeSet::clipped_grid(dom, 17);
  const auto m1 = cell_masses(DensitySpec::constant(1.0), ns);
  const auto m3 = cell_masses(DensitySpec::constant(3.0), ns);
  for (std::size_t i : ns.interior()) {
    CHECK(m1.weights[i] == doctest::Approx(ns.dual_area(i)).epsilon(1e-14));
    CHECK(m3.weights[i] == doctest::Approx(3.0 * m1.weights[i]).epsilon(1e-14));
  }
  CHECK(m1.total() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cell masses of a bump match the refined Gauss oracle") {
  const auto dom = ConvexPolygon::regular(64, 1.0);
  const auto f = DensitySpec::parse("mix:const:1;bump:0.2,0.1,0.5,0.3");
  const auto ns = NodeSet::clipped_grid(dom, 33, 0.2, 3);
  const double total = cell_masses(f, ns).total();
  const double oracle = testing::polygon_integral([&](Point2 p) { return f(p); }, dom.vertices());
  CHECK(std::abs(total - oracle) <= 1e-8 * oracle);
}

TEST_CASE("disc solution converges under mesh refinement") {
  const auto dom = ConvexPolygon::regular(64, 1.0);
  double prev = 0.0;
  for (int n : {17, 33, 65}) {
    const auto ns = NodeSet::clipped_grid(dom, n);
    const auto u = solve_dirichlet(dom, DensitySpec::constant(1.0), ns);
    const double err = max_error_vs_disc(u);
    if (n == 33) CHECK(err <= 3e-2);
    if (prev > 0.0) CHECK(prev / err >= 1.5);
    prev = err;
    for (std::size_t i = 0; i < ns.size(); ++i) {
      if (ns.is_boundary(i))
        CHECK(u.values()[i] == 0.0);
      else
        CHECK(u.values()[i] < 0.0);
    }
  }
}

TEST_CASE("solution scales with the square root of a constant density") {
  const auto dom = ConvexPolygon::from_vertices({{0, 0}, {2, 0}, {2.5, 1.5}, {0.5, 2}});
  const auto ns = NodeSet::clipped_grid(dom, 17, 0.2, 1);
  SolverOptions opts;
  opts.newton_tol = 1e-11;
  const auto u1 = solve_dirichlet(dom, DensitySpec::constant(1.0), ns, opts);
  const auto u4 = solve_dirichlet(dom, DensitySpec::constant(4.0), ns, opts);
  double scale = 0.0;
  for (double v : u1.values()) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < ns.size(); ++i) CHECK(std::abs(u4.values()[i] - 2.0 * u1.values()[i]) <= 1e-9 * scale);
}

TEST_CASE("single interior node matches a bisection oracle") {
  const std::array<Point2, 3> corners{Point2{0, 0}, Point2{1, 0}, Point2{0, 1}};
  const auto dom = ConvexPolygon::from_vertices({corners[0], corners[1], corners[2]});
  const Point2 c{1.0 / 3, 1.0 / 3};
  const auto ns = NodeSet::build(dom, {c, corners[0], corners[1], corners[2]}, {false, true, true, true});
  for (double m : {0.1, 1.0, 7.0}) {
    AtomicMeasure targets;
    targets.weights = {m, 0, 0, 0};
    const auto u = solve_dirichlet_masses(ns, targets);
    double lo = -100.0, hi = 0.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (single_node_area(c, corners, mid) > m ? lo : hi) = mid;
    }
    CHECK(u.values()[0] == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-9));
  }
}

TEST_CASE("solver residual") {
  const auto dom = ConvexPolygon::rectangle(-1, -1, 1, 1);
  const auto ns = NodeSet::clipped_grid(dom, 9);
  const auto m = cell_masses(DensitySpec::constant(1.0), ns);
  SUBCASE("zero function has residual -m") {
    const auto zero = PLConvexFunction::from_values(ns, std::vector<double>(ns.size(), 0.0));
    const auto r = solver_residual(zero, m);
    for (std::size_t i : ns.interior()) CHECK(r[i] == -m.weights[i]);
  }
  SUBCASE("converged solution satisfies the tolerance") {
    SolverOptions opts;
    opts.newton_tol = 1e-9;
    const auto u = solve_dirichlet(dom, DensitySpec::constant(1.0), ns, opts);
    const auto r = solver_residual(u, m);
    for (std::size_t i : ns.interior()) CHECK(std::abs(r[i]) <= 1e-9 * m.weights[i]);
  }
  SUBCASE("hand-built cone") {
    std::vector<Point2> pts{{0, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}};
    std::vector<bool> b(pts.size(), true);
    b[0] = false;
    std::vector<double> v(pts.size(), 1.0);
    v[0] = 0.0;
    const auto cone = PLConvexFunction::from_values(NodeSet::build(dom, pts, b), v);
    AtomicMeasure t;
    t.weights.assign(pts.size(), 0.0);
    t.weights[0] = 1.5;
    // Diamond conv{(±1,0),(0,±1)} by the shoelace formula: area 2.
    CHECK(solver_residual(cone, t)[0] == doctest::Approx(0.5).epsilon(1e-14));
    t.weights.pop_back();
    CHECK_THROWS_AS(solver_residual(cone, t), MismatchError);
  }
}

TEST_CASE("comparison principle and mass conservation") {
  const auto dom = ConvexPolygon::regular(7, 1.0);
  const auto ns = NodeSet::clipped_grid(dom, 17, 0.25, 4);
  const auto base = cell_masses(DensitySpec::parse("mix:const:1;bump:0.3,0,1,0.4"), ns);
  SolverOptions opts;
  opts.newton_tol = 1e-10;
  Rng rng(99);
  for (int trial = 0; trial < 4; ++trial) {
    AtomicMeasure m = base, mp = base;
    for (std::size_t i : ns.interior()) {
      m.weights[i] *= 1.0 + 0.3 * rng.uniform();
      mp.weights[i] = m.weights[i] * (1.0 + 0.5 * rng.uniform());
    }
    const auto u = solve_dirichlet_masses(ns, m, opts);
    const auto up = solve_dirichlet_masses(ns, mp, opts);
    double scale = 0.0;
    for (double v : u.values()) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < ns.size(); ++i) CHECK(up.values()[i] <= u.values()[i] + 1e-9 * scale);
    CHECK(std::abs(ma_measure(u).total() - m.total()) <= 1e-10 * m.total());
  }
}

TEST_CASE("translation equivariance") {
  const auto dom = ConvexPolygon::regular(6, 1.0);
  const Point2 shift{0.75, -0.5};
  const auto f = DensitySpec::bump({0.1, 0.2}, 1.0, 0.5);
  const auto g = DensitySpec::bump(Point2{0.1, 0.2} + shift, 1.0, 0.5);
  const auto fm = DensitySpec::mixture({DensitySpec::constant(1.0), f});
  const auto gm = DensitySpec::mixture({DensitySpec::constant(1.0), g});
  const auto moved = dom.translated(shift);
  const auto ns = NodeSet::clipped_grid(dom, 17);
  const auto nt = NodeSet::clipped_grid(moved, 17);
  REQUIRE(ns.size() == nt.size());
  const auto u = solve_dirichlet(dom, fm, ns);
  const auto v = solve_dirichlet(moved, gm, nt);
  double scale = 0.0;
  for (double x : u.values()) scale = std::max(scale, std::abs(x));
  for (std::size_t i = 0; i < ns.size(); ++i) {
    CHECK(norm(nt.point(i) - ns.point(i) - shift) <= 1e-12);
    CHECK(std::abs(u.values()[i] - v.values()[i]) <= 1e-12 * scale);
  }
}

TEST_CASE("lifting sweeps alone reach the Newton solution") {
  const auto dom = ConvexPolygon::rectangle(-1, -1, 1, 1);
  const auto ns = NodeSet::clipped_grid(dom, 7);
  const auto f = DensitySpec::parse("mix:const:1;bump:0.2,0,1,0.5");
  SolverOptions newton;
  newton.newton_tol = 1e-9;
  SolverOptions sweeps = newton;
  sweeps.newton = false;
  sweeps.newton_tol = 1e-6;
  sweeps.max_iter = 5000;
  SolverStats st;
  const auto a = solve_dirichlet(dom, f, ns, newton);
  const auto b = solve_dirichlet(dom, f, ns, sweeps, &st);
  CHECK(st.newton_steps == 0);
  CHECK(st.sweeps > 0);
  for (std::size_t i = 0; i < ns.size(); ++i) CHECK(b.values()[i] == doctest::Approx(a.values()[i]).epsilon(1e-4));
}

TEST_CASE("solver errors") {
  const auto dom = ConvexPolygon::regular(8, 1.0);
  const auto ns = NodeSet::clipped_grid(dom, 17);
  SolverOptions opts;
  opts.max_iter = 1;
  opts.newton_tol = 1e-14;
  try {
    solve_dirichlet(dom, DensitySpec::parse("mix:const:1;bump:0.5,0,4,0.2"), ns, opts);
    FAIL("expected non-convergence");
  } catch (const ConvergenceError& e) {
    CHECK(e.last_residual() > 0.0);
  }
  SolverOptions bad;
  bad.damping = 0.0;
  CHECK_THROWS_AS(solve_dirichlet(dom, DensitySpec::constant(1.0), ns, bad), PreconditionError);
  AtomicMeasure zero;
  zero.weights.assign(ns.size(), 0.0);
  CHECK_THROWS_AS(solve_dirichlet_masses(ns, zero), PreconditionError);
  CHECK_THROWS_AS(solve_dirichlet(ConvexPolygon::regular(5, 1.0), DensitySpec::constant(1.0), ns), MismatchError);
}
