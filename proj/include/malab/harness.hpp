#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "malab/density.hpp"
#include "malab/geometry.hpp"
#include "malab/report.hpp"

namespace malab {

enum class Scenario { S1Decaying, S1OscillatoryControl, S1Mollified, S1DomainHausdorff, S2OtDecaying };

std::string to_string(Scenario s);
/// Accepts the names S1_decaying, S1_oscillatory_control, S1_mollified,
/// S1_domain_hausdorff and S2_ot_decaying; throws ConfigError otherwise.
Scenario parse_scenario(std::string_view name);

/// Experiment description, read from JSON. Randomness comes only from `seed`
/// through malab::Rng (std::mt19937_64).
struct ExperimentConfig {
  Scenario scenario = Scenario::S1Decaying;
  std::string base_density = "const:1";
  /// Target density g (S2 only).
  std::string target_density = "const:1";
  /// Decaying perturbations g₀ of f and g; empty selects a bump at the domain centroid.
  std::string perturbation;
  std::string target_perturbation;
  std::vector<Point2> domain{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
  /// Ω₂ (S2 only); empty means the source domain.
  std::vector<Point2> target_domain;
  /// Ω′; empty means the domain shrunk by ½ about its centroid.
  std::vector<Point2> window;
  /// S2 translation family: Ω₂ shifted by c + 2^{-k} e₁ and uniform densities.
  std::optional<Point2> translation;
  /// Solver grid n (n² clipped grid) for S1; cloud resolution n for S2.
  int grid = 33;
  int k_max = 8;
  std::vector<double> epsilons{0.05, 0.1, 0.2};
  /// Newton tolerance (S1) or relative dual residual (S2).
  double tol = 1e-10;
  std::uint64_t seed = 1;
  /// Node (S1) or target (S2) position perturbation, in grid steps.
  double jitter = 0.1;
  double oscillation_amplitude = 0.3;
  /// Concurrent solve jobs; 0 uses the hardware concurrency.
  int workers = 0;

  /// Throws ConfigError for malformed JSON, unknown keys or invalid values.
  static ExperimentConfig parse(std::string_view json_text);
  static ExperimentConfig load(const std::string& path);
  std::string dump() const;
  void validate() const;
};

enum class SequenceKind { Decaying, OscillatoryControl, Mollified };

struct SequenceParams {
  DensitySpec perturbation = DensitySpec::constant(1.0);
  double amplitude = 0.3;
  /// Clamp bounds of the oscillatory control.
  double lo = 0.0, hi = 0.0;
};

/// f_k for the three density sequences: f + 2^{-k} g₀; clamp(f (1 + a sign sin(2^k π x₁)), lo, hi);
/// f averaged over discs of radius 2^{-k}. Throws PreconditionError if lo > hi for the control.
DensitySpec gen_density_sequence(const DensitySpec& base, SequenceKind kind, int k, const SequenceParams& params);

/// Ω_k = limit dilated about its centroid by 1 + 2^{-k}.
ConvexPolygon gen_domain_sequence(const ConvexPolygon& limit, int k);

/// Monge-Ampère stability study (S1 scenarios). Columns: k, l1_density, hausdorff,
/// w21 (+ _value, _gradient, _hessian), w21_floor, contact_<ε>, pinch_<ε>,
/// lemma31_lhs, lemma31_rhs, lgamma_<γ>, llogl_lhs, llogl_rhs, newton_steps, residual, ok.
ConvergenceReport run_stability(const ExperimentConfig& cfg);

/// Optimal-transport stability study (S2). Columns: k, shift, window_area, l1_source, l1_target,
/// density_ratio, density_ratio_floor, map_w11, map_term, map_gradient, map_floor,
/// dual_residual, newton_steps, ok.
ConvergenceReport run_ot_stability(const ExperimentConfig& cfg);

/// Dispatches on the scenario.
ConvergenceReport run_experiment(const ExperimentConfig& cfg);

}  // namespace malab
