#include "malab/density.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <functional>
#include <numbers>

#include "malab/errors.hpp"
#include "malab/io.hpp"

namespace malab {

struct DensitySpec::Node {
  enum class Kind { Constant, Bump, Mixture, Clamped, Scaled, Oscillating, Averaged } kind;
  double a = 0.0, b = 0.0;  // constant / amplitude / bounds / factor / radius
  Point2 center;
  double width = 0.0;
  std::vector<DensitySpec> parts;
};

namespace {

using Kind = DensitySpec::Node::Kind;

double parse_number(std::string_view s) {
  try {
    return parse_double(s);
  } catch (const IoError&) {
    throw ConfigError("density spec: malformed number '" + std::string(s) + "'");
  }
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

// Gauss-Legendre nodes/weights on [0, 1] for the radial part of disc averages.
constexpr std::array<double, 6> kGlNodes{0.033765242898423986, 0.16939530676686776, 0.38069040695840156,
                                         0.61930959304159844, 0.83060469323313224, 0.96623475710157601};
constexpr std::array<double, 6> kGlWeights{0.085662246189585173, 0.18038078652406930, 0.23395696728634552,
                                           0.23395696728634552, 0.18038078652406930, 0.085662246189585173};
constexpr int kAngles = 16;

}  // namespace

DensitySpec DensitySpec::constant(double c) {
  if (!std::isfinite(c)) throw ConfigError("density spec: non-finite constant");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Constant;
  n->a = c;
  return DensitySpec(std::move(n));
}

DensitySpec DensitySpec::bump(Point2 center, double amplitude, double width) {
  if (!(width > 0.0) || !std::isfinite(amplitude) || !std::isfinite(center.x) || !std::isfinite(center.y))
    throw ConfigError("density spec: bump needs finite center/amplitude and width > 0");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Bump;
  n->center = center;
  n->a = amplitude;
  n->width = width;
  return DensitySpec(std::move(n));
}

DensitySpec DensitySpec::mixture(std::vector<DensitySpec> parts) {
  if (parts.empty()) throw ConfigError("density spec: empty mixture");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Mixture;
  n->parts = std::move(parts);
  return DensitySpec(std::move(n));
}

DensitySpec DensitySpec::clamped(DensitySpec base, double lo, double hi) {
  if (!(lo > 0.0) || !(hi >= lo) || !std::isfinite(hi))
    throw ConfigError("density spec: clamp bounds must satisfy 0 < lambda <= Lambda");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Clamped;
  n->a = lo;
  n->b = hi;
  n->parts = {std::move(base)};
  return DensitySpec(std::move(n));
}

DensitySpec DensitySpec::scaled(DensitySpec base, double factor) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Scaled;
  n->a = factor;
  n->parts = {std::move(base)};
  return DensitySpec(std::move(n));
}

DensitySpec DensitySpec::oscillating(DensitySpec base, double amplitude, double frequency) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Oscillating;
  n->a = amplitude;
  n->b = frequency;
  n->parts = {std::move(base)};
  return DensitySpec(std::move(n));
}

DensitySpec DensitySpec::averaged(DensitySpec base, double radius) {
  if (!(radius >= 0.0)) throw ConfigError("density spec: negative averaging radius");
  if (radius == 0.0 || base.is_constant()) return base;
  auto n = std::make_shared<Node>();
  n->kind = Kind::Averaged;
  n->a = radius;
  n->parts = {std::move(base)};
  return DensitySpec(std::move(n));
}

bool DensitySpec::is_constant() const {
  switch (node_->kind) {
    case Kind::Constant:
      return true;
    case Kind::Clamped:
    case Kind::Scaled:
    case Kind::Averaged:
      return node_->parts[0].is_constant();
    default:
      return false;
  }
}

double DensitySpec::operator()(Point2 x) const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::Constant:
      return n.a;
    case Kind::Bump:
      return n.a * std::exp(-norm2(x - n.center) / (n.width * n.width));
    case Kind::Mixture: {
      double s = 0.0;
      for (const auto& p : n.parts) s += p(x);
      return s;
    }
    case Kind::Clamped:
      return std::clamp(n.parts[0](x), n.a, n.b);
    case Kind::Scaled:
      return n.a * n.parts[0](x);
    case Kind::Oscillating: {
      const double s = std::sin(n.b * x.x);
      const double sign = s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0);
      return n.parts[0](x) * (1.0 + n.a * sign);
    }
    case Kind::Averaged: {
      double s = 0.0;
      for (std::size_t r = 0; r < kGlNodes.size(); ++r) {
        const double rho = n.a * kGlNodes[r];
        double ring = 0.0;
        for (int t = 0; t < kAngles; ++t) {
          const double th = 2.0 * std::numbers::pi * (t + 0.5) / kAngles;
          ring += n.parts[0]({x.x + rho * std::cos(th), x.y + rho * std::sin(th)});
        }
        // Area element rho d(rho) d(theta), normalized by the disc area.
        s += kGlWeights[r] * 2.0 * kGlNodes[r] * ring / kAngles;
      }
      return s;
    }
  }
  return 0.0;
}

DensityBounds DensitySpec::bounds(const ConvexPolygon& domain) const {
  DensityBounds b;
  const Node& n = *node_;
  if (n.kind == Kind::Constant) {
    b = {n.a, n.a};
  } else if (n.kind == Kind::Clamped) {
    b = {n.a, n.b};
  } else {
    Point2 lo, hi;
    domain.bounding_box(lo, hi);
    const double box = (hi.x - lo.x) * (hi.y - lo.y);
    const int m = static_cast<int>(std::ceil(100.0 * std::sqrt(box / domain.area())));
    b = {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    auto visit = [&](Point2 p) {
      const double v = (*this)(p);
      b.lo = std::min(b.lo, v);
      b.hi = std::max(b.hi, v);
    };
    for (const auto& v : domain.vertices()) visit(v);
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) {
        const Point2 p{lo.x + (i + 0.5) * (hi.x - lo.x) / m, lo.y + (j + 0.5) * (hi.y - lo.y) / m};
        if (domain.contains(p)) visit(p);
      }
  }
  if (!(b.lo > 0.0) || !std::isfinite(b.hi))
    throw PreconditionError("density " + to_string() + " is not bounded below by a positive constant on the domain");
  return b;
}

DensitySpec DensitySpec::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ConfigError("density spec: missing ':' in '" + std::string(text) + "'");
  const auto head = text.substr(0, colon);
  const auto body = text.substr(colon + 1);
  if (head == "const") return constant(parse_number(body));
  if (head == "bump") {
    const auto f = split(body, ',');
    if (f.size() != 4) throw ConfigError("density spec: bump expects cx,cy,amp,w");
    return bump({parse_number(f[0]), parse_number(f[1])}, parse_number(f[2]), parse_number(f[3]));
  }
  if (head == "mix") {
    std::vector<DensitySpec> parts;
    for (auto p : split(body, ';')) parts.push_back(parse(p));
    return mixture(std::move(parts));
  }
  if (head == "clamp") {
    // Bounds are the last two comma fields; the inner spec may contain commas.
    const auto c2 = body.rfind(',');
    if (c2 == std::string_view::npos || c2 == 0) throw ConfigError("density spec: clamp expects spec,lambda,Lambda");
    const auto c1 = body.rfind(',', c2 - 1);
    if (c1 == std::string_view::npos) throw ConfigError("density spec: clamp expects spec,lambda,Lambda");
    return clamped(parse(body.substr(0, c1)), parse_number(body.substr(c1 + 1, c2 - c1 - 1)),
                   parse_number(body.substr(c2 + 1)));
  }
  throw ConfigError("density spec: unknown form '" + std::string(head) + "'");
}

std::string DensitySpec::to_string() const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::Constant:
      return "const:" + format_double(n.a);
    case Kind::Bump:
      return "bump:" + format_double(n.center.x) + "," + format_double(n.center.y) + "," + format_double(n.a) + "," +
             format_double(n.width);
    case Kind::Mixture: {
      std::string s = "mix:";
      for (std::size_t i = 0; i < n.parts.size(); ++i) s += (i ? ";" : "") + n.parts[i].to_string();
      return s;
    }
    case Kind::Clamped:
      return "clamp:" + n.parts[0].to_string() + "," + format_double(n.a) + "," + format_double(n.b);
    case Kind::Scaled:
      return "scaled(" + format_double(n.a) + "," + n.parts[0].to_string() + ")";
    case Kind::Oscillating:
      return "oscillating(" + format_double(n.a) + "," + format_double(n.b) + "," + n.parts[0].to_string() + ")";
    case Kind::Averaged:
      return "averaged(" + format_double(n.a) + "," + n.parts[0].to_string() + ")";
  }
  return {};
}

namespace {

double rule_estimate(const std::function<double(Point2)>& f, Point2 a, Point2 b, Point2 c, int order) {
  const double area = 0.5 * std::abs(cross(b - a, c - a));
  auto at = [&](double l0, double l1, double l2) { return f(l0 * a + l1 * b + l2 * c); };
  switch (order) {
    case 1:
      return area * at(1.0 / 3, 1.0 / 3, 1.0 / 3);
    case 3:
      return area / 3.0 * (at(2.0 / 3, 1.0 / 6, 1.0 / 6) + at(1.0 / 6, 2.0 / 3, 1.0 / 6) + at(1.0 / 6, 1.0 / 6, 2.0 / 3));
    case 7: {
      const double s15 = std::sqrt(15.0);
      const double a1 = (6.0 - s15) / 21.0, w1 = (155.0 - s15) / 1200.0;
      const double a2 = (6.0 + s15) / 21.0, w2 = (155.0 + s15) / 1200.0;
      const double b1 = 1.0 - 2.0 * a1, b2 = 1.0 - 2.0 * a2;
      return area * (0.225 * at(1.0 / 3, 1.0 / 3, 1.0 / 3) + w1 * (at(a1, a1, b1) + at(a1, b1, a1) + at(b1, a1, a1)) +
                     w2 * (at(a2, a2, b2) + at(a2, b2, a2) + at(b2, a2, a2)));
    }
    default:
      throw PreconditionError("quadrature order must be 1, 3 or 7");
  }
}

double refine(const std::function<double(Point2)>& f, Point2 a, Point2 b, Point2 c, double coarse, const QuadratureRule& rule,
              int depth) {
  const Point2 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
  const double q[4] = {rule_estimate(f, a, ab, ca, rule.order), rule_estimate(f, ab, b, bc, rule.order),
                       rule_estimate(f, ca, bc, c, rule.order), rule_estimate(f, ab, bc, ca, rule.order)};
  const double fine = q[0] + q[1] + q[2] + q[3];
  if (depth >= rule.max_depth || std::abs(fine - coarse) <= rule.rel_tol * std::abs(fine)) return fine;
  return refine(f, a, ab, ca, q[0], rule, depth + 1) + refine(f, ab, b, bc, q[1], rule, depth + 1) +
         refine(f, ca, bc, c, q[2], rule, depth + 1) + refine(f, ab, bc, ca, q[3], rule, depth + 1);
}

}  // namespace

double integrate_triangle(const std::function<double(Point2)>& f, Point2 a, Point2 b, Point2 c,
                          const QuadratureRule& rule) {
  const double coarse = rule_estimate(f, a, b, c, rule.order);
  if (rule.rel_tol <= 0.0 || rule.max_depth <= 0) return coarse;
  return refine(f, a, b, c, coarse, rule, 1);
}

double integrate_polygon(const std::function<double(Point2)>& f, std::span<const Point2> loop,
                         const QuadratureRule& rule) {
  if (loop.size() < 3) return 0.0;
  const Point2 c = loop_centroid(loop);
  double s = 0.0;
  for (std::size_t i = 0; i < loop.size(); ++i) s += integrate_triangle(f, c, loop[i], loop[(i + 1) % loop.size()], rule);
  return s;
}

double integrate_triangle(const DensitySpec& f, Point2 a, Point2 b, Point2 c, const QuadratureRule& rule) {
  return integrate_triangle([&f](Point2 p) { return f(p); }, a, b, c, rule);
}

double integrate_polygon(const DensitySpec& f, std::span<const Point2> loop, const QuadratureRule& rule) {
  return integrate_polygon([&f](Point2 p) { return f(p); }, loop, rule);
}

}  // namespace malab
