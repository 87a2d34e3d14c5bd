#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "malab/errors.hpp"
#include "malab/harness.hpp"
#include "malab/io.hpp"
#include "malab/ma_solver.hpp"
#include "malab/ot_semidiscrete.hpp"

using namespace malab;

namespace {

constexpr int kConfigError = 2;
constexpr int kSolverError = 3;

void write_envelope_csv(const std::string& path, const NodalTable& in, const EnvelopeResult& env) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "x,y,value,envelope,contact\n";
  for (std::size_t i = 0; i < in.points.size(); ++i)
    out << format_double(in.points[i].x) << ',' << format_double(in.points[i].y) << ',' << format_double(in.values[i])
        << ',' << format_double(env.envelope[i]) << ',' << (env.contact[i] ? 1 : 0) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Alexandrov Monge-Ampere and semi-discrete optimal transport lab"};
  app.require_subcommand(1);

  std::string domain, density, out;
  int grid = 33, quadrature = 7;
  double tol = 1e-10, jitter = 0.0;
  std::uint64_t seed = 0;
  auto* solve = app.add_subcommand("solve", "Discrete Alexandrov solution of det D²u = f, u = 0 on the boundary");
  solve->add_option("--domain", domain, "Polygon CSV (x,y)")->required();
  solve->add_option("--density", density, "Density spec, e.g. const:1 or bump:0,0,1,0.3")->required();
  solve->add_option("--grid", grid, "Clipped grid resolution n (n² points)");
  solve->add_option("--tol", tol, "Relative nodal mass tolerance");
  solve->add_option("--jitter", jitter, "Node jitter in grid steps, [0, 0.5)");
  solve->add_option("--seed", seed, "Jitter seed");
  solve->add_option("--quadrature", quadrature, "Points per triangle: 1, 3 or 7");
  solve->add_option("--out", out, "Solution CSV (x,y,value,boundary)")->required();

  std::string source, source_domain, target, target_domain;
  int cloud = 16;
  double ot_tol = 1e-9;
  auto* ot = app.add_subcommand("ot", "Semi-discrete optimal transport between a density and a quantized target");
  ot->add_option("--source", source, "Source density spec")->required();
  ot->add_option("--source-domain", source_domain, "Source polygon CSV")->required();
  ot->add_option("--target", target, "Target density spec")->required();
  ot->add_option("--target-domain", target_domain, "Target polygon CSV")->required();
  ot->add_option("--cloud", cloud, "Target grid resolution N (N² targets)");
  ot->add_option("--tol", ot_tol, "Relative cell mass tolerance");
  ot->add_option("--out", out, "Potential CSV (yx,yy,mass,psi)")->required();

  std::string in;
  auto* envelope = app.add_subcommand("envelope", "Convex envelope and contact set of nodal data");
  envelope->add_option("--in", in, "Nodal CSV (x,y,value,boundary)")->required();
  envelope->add_option("--out", out, "Envelope CSV (x,y,value,envelope,contact)")->required();

  std::string config, window;
  auto add_study = [&](const char* name, const char* help) {
    auto* sc = app.add_subcommand(name, help);
    sc->add_option("--config", config, "Experiment config JSON")->required();
    sc->add_option("--out", out, "Report path (.csv or .json)")->required();
    sc->add_option("--window", window, "Polygon CSV overriding the config window");
    return sc;
  };
  auto* stability = add_study("stability", "Monge-Ampere stability study (S1 scenarios)");
  auto* ot_stability = add_study("ot-stability", "Optimal transport stability study (S2 scenario)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*solve) {
      const auto poly = read_polygon_csv(domain);
      const auto f = DensitySpec::parse(density);
      SolverOptions opts;
      opts.newton_tol = tol;
      opts.quadrature_order = quadrature;
      opts.validate();
      const auto nodes = NodeSet::clipped_grid(poly, grid, jitter, seed);
      SolverStats st;
      const auto u = solve_dirichlet(poly, f, nodes, opts, &st);
      write_nodes_csv(out, to_table(u));
      std::printf("solve: %zu nodes, %d Newton steps, residual %s\n", nodes.size(), st.newton_steps,
                  format_double(st.residual).c_str());
    } else if (*ot) {
      const auto src = read_polygon_csv(source_domain);
      const auto tgt = read_polygon_csv(target_domain);
      const auto f = DensitySpec::parse(source);
      const auto g = DensitySpec::parse(target);
      if (cloud < 1) throw ConfigError("--cloud must be positive");
      const auto targets = quantize_density(g, tgt, cloud, integrate_polygon(f, src.vertices()));
      OTOptions opts;
      opts.tol = ot_tol;
      OTStats st;
      const auto pot = solve_semidiscrete(f, src, targets, opts, &st);
      write_potential_csv(out, pot);
      std::printf("ot: %zu targets, %d Newton steps, residual %s\n", targets.size(), st.newton_steps,
                  format_double(st.residual).c_str());
    } else if (*envelope) {
      const auto table = read_nodes_csv(in);
      const auto env = convex_envelope(table.points, table.values);
      write_envelope_csv(out, table, env);
      std::printf("envelope: %zu nodes\n", table.points.size());
    } else if (*stability || *ot_stability) {
      auto cfg = ExperimentConfig::load(config);
      if (!window.empty()) {
        cfg.window = read_polygon_csv(window).vertices();
        cfg.validate();
      }
      if (*stability && cfg.scenario == Scenario::S2OtDecaying)
        throw ConfigError("the stability subcommand runs S1 scenarios; use ot-stability");
      if (*ot_stability && cfg.scenario != Scenario::S2OtDecaying)
        throw ConfigError("the ot-stability subcommand runs the S2_ot_decaying scenario");
      const auto format = report_format_for(out);
      const auto report = run_experiment(cfg);
      emit_report(report, out, format);
      std::printf("%s: %zu rows written to %s\n", to_string(cfg.scenario).c_str(), report.rows.size(), out.c_str());
    }
  } catch (const ConvergenceError& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kSolverError;
  } catch (const SingularJacobian& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kSolverError;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  }
  return 0;
}
