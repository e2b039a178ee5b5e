#pragma once

// Gradient-free differential-evolution attack over the (center, magnitude)
// bump space, maximizing the gap between a surrogate's prediction and the
// physics solution of the same perturbed input. Also: per-sample weakness
// probing and a matched-budget random-search baseline.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "opdef/physics.hpp"

namespace opdef {

/// Full-grid surrogate evaluation; attacks treat the model as a black box.
using Predictor = std::function<Field(const Field&)>;

struct AttackConfig {
  int iterations = 40;      // DE generations after initialization
  int population = 15;
  double mutation = 0.8;    // F
  double crossover = 0.9;   // CR
  double magnitude_bound = kMagnitudeBound;
  double width = kDefaultBumpWidth;  // bump sigma, fixed during the search
  std::uint64_t seed = 0;

  /// Evaluation attacks plant one zero-magnitude member so the best objective
  /// provably dominates the clean error; probing keeps a fully random start.
  bool include_zero_magnitude = false;

  /// Cheaper probing objective ||f(u0+d) - f(u0)|| / ||f(u0)|| that skips the
  /// solver entirely. Off by default; the physics-gap objective is the real
  /// target.
  bool model_shift_objective = false;

  void validate() const;
};

struct AttackResult {
  Perturbation best;
  double best_error = 0.0;
  std::vector<double> history;   // best objective after each generation
  long long evaluations = 0;     // objective calls: population * (iterations + 1)
  long long solver_calls = 0;    // PDE solves actually performed (memo misses)
};

struct WeaknessRecord {
  int sample_id = 0;
  Perturbation best;
  double best_error = 0.0;
};

/// Magnitudes are snapped to this tick at evaluation time so that a memo key
/// (rounded center, magnitude tick) exactly determines the evaluated input.
constexpr double kMagnitudeTick = 1e-6;

Perturbation snap_candidate(double center, double magnitude, double width);

/// Relative L2 between the surrogate prediction and the solver solution for
/// the same perturbed input (the physics-gap objective).
double attack_objective(const Predictor& model, const Field& u0, const Perturbation& p,
                        const BurgersSolver& solver);

/// DE/rand/1/bin over (center, magnitude): uniform in-bounds initialization,
/// v = a + F (b - c) with distinct members, binomial crossover with one forced
/// dimension, clipping, greedy selection. Deterministic per (seed, model, u0).
AttackResult de_attack(const Predictor& model, const Field& u0, const AttackConfig& cfg,
                       const BurgersSolver& solver);

/// One probing attack per validation sample; records sorted by error, worst
/// first. Attack seeds derive from cfg.seed and the sample index.
std::vector<WeaknessRecord> probe_weaknesses(const Predictor& model,
                                             std::span<const Field> validation_set,
                                             const AttackConfig& cfg,
                                             const BurgersSolver& solver,
                                             long long* solver_calls = nullptr);

/// Max objective over n uniformly sampled in-bounds perturbations. Nested
/// seeds give monotone results in n.
double random_perturbation_error(const Predictor& model, const Field& u0, int n_trials,
                                 std::uint64_t seed, const BurgersSolver& solver,
                                 long long* solver_calls = nullptr);

}  // namespace opdef
