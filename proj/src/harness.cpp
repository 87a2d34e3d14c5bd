#include "malab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <sstream>
#include <thread>

#include "malab/errors.hpp"
#include "malab/io.hpp"
#include "malab/ma_solver.hpp"
#include "malab/ot_semidiscrete.hpp"
#include "malab/sobolev.hpp"

namespace malab {
namespace {

using nlohmann::json;

constexpr double kGammas[] = {1.0, 1.1, 1.25, 1.5, 2.0};
constexpr double kLloglDelta = 0.5;
// Target positions of the OT floor re-solve are jittered by this many cloud steps.
constexpr double kCloudJitter = 0.25;

struct ScenarioName {
  Scenario s;
  const char* name;
};
constexpr ScenarioName kScenarios[] = {{Scenario::S1Decaying, "S1_decaying"},
                                       {Scenario::S1OscillatoryControl, "S1_oscillatory_control"},
                                       {Scenario::S1Mollified, "S1_mollified"},
                                       {Scenario::S1DomainHausdorff, "S1_domain_hausdorff"},
                                       {Scenario::S2OtDecaying, "S2_ot_decaying"}};

std::vector<Point2> read_points(const json& j, const char* key) {
  if (!j.is_array()) throw ConfigError(std::string("config key '") + key + "' must be a list of [x, y] pairs");
  std::vector<Point2> out;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw ConfigError(std::string("config key '") + key + "' must be a list of [x, y] pairs");
    out.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return out;
}

json write_points(const std::vector<Point2>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back({p.x, p.y});
  return arr;
}

ConvexPolygon polygon_or(const std::vector<Point2>& pts, const char* what) {
  try {
    return ConvexPolygon::from_vertices(pts);
  } catch (const DegenerateGeometry& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

DensitySpec density_or(const std::string& text, const char* what) {
  try {
    return DensitySpec::parse(text);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

// Default decaying perturbation: a bump at the domain centroid of width a quarter diameter.
DensitySpec perturbation_for(const std::string& text, const ConvexPolygon& dom, const char* what) {
  if (!text.empty()) return density_or(text, what);
  return DensitySpec::bump(dom.centroid(), 0.5, 0.25 * dom.diameter());
}

ConvexPolygon window_for(const ExperimentConfig& cfg, const ConvexPolygon& dom) {
  if (!cfg.window.empty()) return polygon_or(cfg.window, "window");
  return dom.dilated(dom.centroid(), 0.5);
}

std::string eps_name(const char* prefix, double v) { return std::string(prefix) + "_" + format_double(v); }

// Runs fn(0..n-1) on up to `workers` threads; every index runs exactly once.
template <class Fn>
void parallel_for(int n, int workers, Fn&& fn) {
  if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

QuadratureRule fine_rule() { return {.order = 7, .rel_tol = 1e-12, .max_depth = 8}; }

double l1_difference(const DensitySpec& a, const DensitySpec& b, const ConvexPolygon& region) {
  return integrate_polygon([&](Point2 x) { return std::abs(a(x) - b(x)); }, region.vertices(), fine_rule());
}

struct SolveResult {
  PLConvexFunction u;
  SolverStats stats;
  HessianField field;
  bool ok = false;
};

}  // namespace

std::string to_string(Scenario s) {
  for (const auto& n : kScenarios)
    if (n.s == s) return n.name;
  return "unknown";
}

Scenario parse_scenario(std::string_view name) {
  for (const auto& n : kScenarios)
    if (name == n.name) return n.s;
  throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

ExperimentConfig ExperimentConfig::parse(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  bool grid_given = false;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "scenario") c.scenario = parse_scenario(v.get<std::string>());
      else if (key == "base_density") c.base_density = v.get<std::string>();
      else if (key == "target_density") c.target_density = v.get<std::string>();
      else if (key == "perturbation") c.perturbation = v.get<std::string>();
      else if (key == "target_perturbation") c.target_perturbation = v.get<std::string>();
      else if (key == "domain") c.domain = read_points(v, "domain");
      else if (key == "target_domain") c.target_domain = read_points(v, "target_domain");
      else if (key == "window") c.window = read_points(v, "window");
      else if (key == "translation") {
        const auto p = read_points(json::array({v}), "translation");
        c.translation = p[0];
      } else if (key == "grid") {
        c.grid = v.get<int>();
        grid_given = true;
      } else if (key == "k_max") c.k_max = v.get<int>();
      else if (key == "epsilons") c.epsilons = v.get<std::vector<double>>();
      else if (key == "tol") c.tol = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "jitter") c.jitter = v.get<double>();
      else if (key == "oscillation_amplitude") c.oscillation_amplitude = v.get<double>();
      else if (key == "workers") c.workers = v.get<int>();
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
  if (!grid_given && c.scenario == Scenario::S2OtDecaying) c.grid = 16;
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string ExperimentConfig::dump() const {
  json j;
  j["scenario"] = to_string(scenario);
  j["base_density"] = base_density;
  j["target_density"] = target_density;
  if (!perturbation.empty()) j["perturbation"] = perturbation;
  if (!target_perturbation.empty()) j["target_perturbation"] = target_perturbation;
  j["domain"] = write_points(domain);
  if (!target_domain.empty()) j["target_domain"] = write_points(target_domain);
  if (!window.empty()) j["window"] = write_points(window);
  if (translation) j["translation"] = {translation->x, translation->y};
  j["grid"] = grid;
  j["k_max"] = k_max;
  j["epsilons"] = epsilons;
  j["tol"] = tol;
  j["seed"] = seed;
  j["jitter"] = jitter;
  j["oscillation_amplitude"] = oscillation_amplitude;
  j["workers"] = workers;
  return j.dump(2);
}

void ExperimentConfig::validate() const {
  if (k_max < 3) throw ConfigError("k_max must be at least 3");
  if (grid < 2) throw ConfigError("grid must be at least 2");
  if (epsilons.empty()) throw ConfigError("epsilons must not be empty");
  for (double e : epsilons)
    if (!(e > 0.0 && e < 1.0)) throw ConfigError("every epsilon must lie in (0, 1)");
  if (!(tol > 0.0)) throw ConfigError("tol must be positive");
  if (!(jitter >= 0.0 && jitter < 0.5)) throw ConfigError("jitter must lie in [0, 0.5)");
  if (!(oscillation_amplitude >= 0.0 && oscillation_amplitude < 1.0))
    throw ConfigError("oscillation_amplitude must lie in [0, 1)");
  if (workers < 0) throw ConfigError("workers must be nonnegative");
  const auto dom = polygon_or(domain, "domain");
  if (!target_domain.empty()) polygon_or(target_domain, "target_domain");
  density_or(base_density, "base_density");
  density_or(target_density, "target_density");
  if (!perturbation.empty()) density_or(perturbation, "perturbation");
  if (!target_perturbation.empty()) density_or(target_perturbation, "target_perturbation");
  if (translation && scenario != Scenario::S2OtDecaying)
    throw ConfigError("translation applies to the S2_ot_decaying scenario only");
  // Window margin against the solver-independent window spacing used by the runs.
  const auto win = window_for(*this, dom);
  Point2 lo, hi;
  dom.bounding_box(lo, hi);
  const double side = std::max(hi.x - lo.x, hi.y - lo.y);
  const double h = scenario == Scenario::S2OtDecaying ? std::min(hi.x - lo.x, hi.y - lo.y) / 32.0
                                                      : 2.0 * side / (grid - 1);
  try {
    GridWindow::make(win, dom, h);
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("window: ") + e.what());
  }
}

DensitySpec gen_density_sequence(const DensitySpec& base, SequenceKind kind, int k, const SequenceParams& p) {
  if (k < 0) throw PreconditionError("sequence index must be nonnegative");
  const double step = std::ldexp(1.0, -k);
  switch (kind) {
    case SequenceKind::Decaying:
      return DensitySpec::mixture({base, DensitySpec::scaled(p.perturbation, step)});
    case SequenceKind::OscillatoryControl:
      if (!(p.lo > 0.0) || p.lo > p.hi) throw PreconditionError("oscillatory control: clamp bounds are inconsistent");
      return DensitySpec::clamped(
          DensitySpec::oscillating(base, p.amplitude, std::ldexp(std::numbers::pi, k)), p.lo, p.hi);
    case SequenceKind::Mollified:
      return DensitySpec::averaged(base, step);
  }
  return base;
}

ConvexPolygon gen_domain_sequence(const ConvexPolygon& limit, int k) {
  if (k < 0) throw PreconditionError("sequence index must be nonnegative");
  return limit.dilated(limit.centroid(), 1.0 + std::ldexp(1.0, -k));
}

ConvergenceReport run_stability(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.scenario == Scenario::S2OtDecaying) throw ConfigError("run_stability needs an S1 scenario");
  const ConvexPolygon dom = ConvexPolygon::from_vertices(cfg.domain);
  const DensitySpec f = DensitySpec::parse(cfg.base_density);
  const DensityBounds fb = f.bounds(dom);
  SequenceParams params;
  params.perturbation = perturbation_for(cfg.perturbation, dom, "perturbation");
  params.amplitude = cfg.oscillation_amplitude;
  params.lo = fb.lo * (1.0 - cfg.oscillation_amplitude);
  params.hi = fb.hi * (1.0 + cfg.oscillation_amplitude);

  const int K = cfg.k_max;
  std::vector<DensitySpec> fk(K + 1, f);
  std::vector<ConvexPolygon> domk(K + 1, dom);
  for (int k = 1; k <= K; ++k) {
    switch (cfg.scenario) {
      case Scenario::S1Decaying:
        fk[k] = gen_density_sequence(f, SequenceKind::Decaying, k, params);
        break;
      case Scenario::S1OscillatoryControl:
        fk[k] = gen_density_sequence(f, SequenceKind::OscillatoryControl, k, params);
        break;
      case Scenario::S1Mollified:
        fk[k] = gen_density_sequence(f, SequenceKind::Mollified, k, params);
        break;
      case Scenario::S1DomainHausdorff:
        domk[k] = gen_domain_sequence(dom, k);
        break;
      case Scenario::S2OtDecaying:
        break;
    }
  }

  const NodeSet limit_nodes = NodeSet::clipped_grid(dom, cfg.grid, cfg.jitter, cfg.seed);
  const NodeSet floor_nodes = NodeSet::clipped_grid(dom, cfg.grid, cfg.jitter, cfg.seed + 1);
  Point2 lo, hi;
  dom.bounding_box(lo, hi);
  const double h_window = 2.0 * std::max(hi.x - lo.x, hi.y - lo.y) / (cfg.grid - 1);
  const GridWindow window = GridWindow::make(window_for(cfg, dom), dom, h_window);

  SolverOptions opts;
  opts.newton_tol = cfg.tol;
  // Jobs 0 and 1: limit and floor solves; job 1 + k: the k-th problem.
  std::vector<SolveResult> res(K + 2);
  std::vector<std::string> failure(K + 2);
  parallel_for(K + 2, cfg.workers, [&](int job) {
    const int k = job - 1;
    try {
      const bool limit = job <= 1;
      NodeSet nodes = job == 1 ? floor_nodes
                      : (limit || cfg.scenario != Scenario::S1DomainHausdorff)
                          ? limit_nodes
                          : NodeSet::clipped_grid(domk[k], cfg.grid, cfg.jitter, cfg.seed);
      const ConvexPolygon& d = limit ? dom : domk[k];
      const DensitySpec& dens = limit ? f : fk[k];
      SolveResult r;
      r.u = solve_dirichlet(d, dens, nodes, opts, &r.stats);
      r.field = sample_hessian(r.u, window);
      r.ok = true;
      res[job] = std::move(r);
    } catch (const Error& e) {
      failure[job] = e.what();
    }
  });
  if (!res[0].ok) throw ConvergenceError("limit solve failed: " + failure[0], 0.0);
  if (!res[1].ok) throw ConvergenceError("floor solve failed: " + failure[1], 0.0);

  ConvergenceReport rep;
  rep.columns = {"k", "l1_density", "hausdorff", "w21", "w21_value", "w21_gradient", "w21_hessian", "w21_floor"};
  for (double e : cfg.epsilons) rep.columns.push_back(eps_name("contact", e));
  for (double e : cfg.epsilons) rep.columns.push_back(eps_name("pinch", e));
  rep.columns.insert(rep.columns.end(), {"lemma31_lhs", "lemma31_rhs"});
  for (double g : kGammas) rep.columns.push_back(eps_name("lgamma", g));
  rep.columns.insert(rep.columns.end(), {"llogl_lhs", "llogl_rhs", "newton_steps", "residual", "ok"});
  rep.rows.assign(K, std::vector<double>(rep.columns.size(), 0.0));

  const SolveResult& base = res[0];
  const double floor = w21_distance(base.field, res[1].field).total;
  parallel_for(K, cfg.workers, [&](int row) {
    const int k = row + 1;
    auto& out = rep.rows[row];
    std::size_t c = 0;
    auto put = [&](double v) { out[c++] = v; };
    put(k);
    put(l1_difference(fk[k], f, window.window()));
    put(hausdorff_distance(domk[k], dom));
    const SolveResult& r = res[k + 1];
    if (!r.ok) return;  // flagged row: remaining columns stay 0 with ok = 0
    const auto d = w21_distance(r.field, base.field);
    for (double v : {d.total, d.value, d.gradient, d.hessian, floor}) put(v);
    for (double e : cfg.epsilons) put(contact_fraction(base.u, r.u, e, window));
    for (double e : cfg.epsilons) put(psd_pinch_fraction(base.field, r.field, e));
    if (r.u.nodes().same_as(base.u.nodes())) {
      const auto l = lemma31_check(r.u, base.u, fk[k], f, window.window());
      put(l.lhs);
      put(l.rhs);
    } else {
      c += 2;
    }
    for (double g : kGammas) put(lgamma_hessian_norm(r.field, g));
    const auto ll = llogl_diagnostic(r.field, base.field, kLloglDelta);
    put(ll.lhs);
    put(ll.rhs);
    put(r.stats.newton_steps);
    put(r.stats.residual);
    put(1.0);
  });
  if (std::none_of(res.begin() + 2, res.end(), [](const SolveResult& r) { return r.ok; }))
    throw ConvergenceError("every k-solve failed; first failure: " + failure[2], 0.0);
  return rep;
}

ConvergenceReport run_ot_stability(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.scenario != Scenario::S2OtDecaying) throw ConfigError("run_ot_stability needs the S2_ot_decaying scenario");
  const ConvexPolygon src = ConvexPolygon::from_vertices(cfg.domain);
  const ConvexPolygon tgt0 = cfg.target_domain.empty() ? src : ConvexPolygon::from_vertices(cfg.target_domain);
  const bool translation = cfg.translation.has_value();
  const DensitySpec f = translation ? DensitySpec::constant(1.0) : DensitySpec::parse(cfg.base_density);
  const DensitySpec g = translation ? DensitySpec::constant(1.0) : DensitySpec::parse(cfg.target_density);
  f.bounds(src);
  const Point2 c0 = translation ? *cfg.translation : Point2{};
  const ConvexPolygon tgt = tgt0.translated(c0);
  g.bounds(tgt);

  const int K = cfg.k_max;
  SequenceParams pf, pg;
  pf.perturbation = perturbation_for(cfg.perturbation, src, "perturbation");
  pg.perturbation = perturbation_for(cfg.target_perturbation, tgt, "target_perturbation");
  std::vector<DensitySpec> fk(K + 1, f), gk(K + 1, g);
  std::vector<ConvexPolygon> tk(K + 1, tgt);
  std::vector<double> shift(K + 1, 0.0);
  for (int k = 1; k <= K; ++k) {
    if (translation) {
      shift[k] = std::ldexp(1.0, -k);
      tk[k] = tgt0.translated(c0 + Point2{shift[k], 0.0});
    } else {
      fk[k] = gen_density_sequence(f, SequenceKind::Decaying, k, pf);
      gk[k] = gen_density_sequence(g, SequenceKind::Decaying, k, pg);
    }
  }

  Point2 lo, hi;
  src.bounding_box(lo, hi);
  const double h_window = std::min(hi.x - lo.x, hi.y - lo.y) / 32.0;
  const double sample_h = std::max(hi.x - lo.x, hi.y - lo.y) / 128.0;
  const GridWindow window = GridWindow::make(window_for(cfg, src), src, h_window);
  const double window_area = static_cast<double>(window.samples().size()) * h_window * h_window;

  OTOptions opts;
  opts.tol = cfg.tol;
  const double jitter = std::max(cfg.jitter, kCloudJitter);
  std::vector<BrenierPotential> pot(K + 2);
  std::vector<OTStats> stats(K + 2);
  std::vector<char> ok(K + 2, 0);
  std::vector<std::string> failure(K + 2);
  parallel_for(K + 2, cfg.workers, [&](int job) {
    const int k = job - 1;
    const bool limit = job <= 1;
    const DensitySpec& fs = limit ? f : fk[k];
    const DensitySpec& gs = limit ? g : gk[k];
    const ConvexPolygon& ts = limit ? tgt : tk[k];
    try {
      const double mass = integrate_polygon(fs, src.vertices());
      const auto cloud = quantize_density(gs, ts, cfg.grid, mass, jitter, job == 1 ? cfg.seed + 1 : cfg.seed);
      pot[job] = solve_semidiscrete(fs, src, cloud, opts, &stats[job]);
      ok[job] = 1;
    } catch (const Error& e) {
      failure[job] = e.what();
    }
  });
  if (!ok[0]) throw ConvergenceError("limit OT solve failed: " + failure[0], 0.0);
  if (!ok[1]) throw ConvergenceError("floor OT solve failed: " + failure[1], 0.0);

  const double sigma = 4.0 * h_window;
  const double ratio_floor = density_ratio_l1(f, g, pot[1], f, g, pot[0], src, sample_h);
  const double map_floor = map_w11_distance(pot[1], pot[0], window, sigma).total;

  ConvergenceReport rep;
  rep.columns = {"k",           "shift",    "window_area", "l1_source",    "l1_target", "density_ratio",
                 "density_ratio_floor", "map_w11", "map_term", "map_gradient", "map_floor", "dual_residual",
                 "newton_steps", "ok"};
  rep.rows.assign(K, std::vector<double>(rep.columns.size(), 0.0));
  parallel_for(K, cfg.workers, [&](int row) {
    const int k = row + 1;
    auto& out = rep.rows[row];
    std::size_t c = 0;
    auto put = [&](double v) { out[c++] = v; };
    put(k);
    put(shift[k]);
    put(window_area);
    put(l1_difference(fk[k], f, src));
    put(l1_difference(gk[k], g, tgt));
    if (!ok[k + 1]) return;
    put(density_ratio_l1(fk[k], gk[k], pot[k + 1], f, g, pot[0], src, sample_h));
    put(ratio_floor);
    const auto m = map_w11_distance(pot[k + 1], pot[0], window, sigma);
    put(m.total);
    put(m.map);
    put(m.gradient);
    put(map_floor);
    put(stats[k + 1].residual);
    put(stats[k + 1].newton_steps);
    put(1.0);
  });
  if (std::none_of(ok.begin() + 2, ok.end(), [](char v) { return v != 0; }))
    throw ConvergenceError("every k-solve failed; first failure: " + failure[2], 0.0);
  return rep;
}

ConvergenceReport run_experiment(const ExperimentConfig& cfg) {
  return cfg.scenario == Scenario::S2OtDecaying ? run_ot_stability(cfg) : run_stability(cfg);
}

}  // namespace malab
