#pragma once

// Iterative probe -> evaluate -> adapt -> generate -> retrain loop with the
// adaptive smooth-ratio safeguard and the simulation-budget ledger, plus the
// shared two-metric model evaluation.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "opdef/attack.hpp"
#include "opdef/deeponet.hpp"
#include "opdef/nn.hpp"
#include "opdef/physics.hpp"

namespace opdef {

enum class Provenance { kSmooth, kTargeted, kBalancedPerturbed };

const char* provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& name);

/// An (input, solver output) training pair. The label is the solver's
/// response to this exact input; perturbed samples carry their bump.
struct LabeledSample {
  Field input;
  Field label;
  Provenance provenance = Provenance::kSmooth;
  std::optional<Perturbation> perturbation;
};

std::vector<TrainSample> to_train_samples(std::span<const LabeledSample> data);

/// The adaptive smooth-ratio state. alpha is the minimum fraction of smooth
/// samples within each round's batch, clamped to [0.3, 0.7].
struct SafeguardState {
  double alpha = 0.4;
  double e_base_prev = 0.0;
  double tau = 0.05;
};

/// One safeguard update:
///   e_base > 1.1 e_prev            -> alpha = min(alpha + 0.1, 0.7)
///   e_base < 0.9 e_prev && < tau   -> alpha = max(alpha - 0.05, 0.3)
/// e_base_prev is refreshed with e_base regardless of the branch taken.
SafeguardState adapt_alpha(SafeguardState state, double e_base);

/// ceil(alpha * n) computed against a tiny downward guard so that products
/// like 0.7 * 20 land on their real-arithmetic ceilings.
int smooth_quota(double alpha, int n);

struct BudgetLedger {
  int budget = 600;
  int training_sims_used = 0;      // solves whose outputs entered the dataset
  long long eval_sims_used = 0;    // attack/evaluation solves, metered apart
};

struct RoundLog {
  int round = 0;
  double e_base = 0.0;
  double e_robust = 0.0;
  double alpha_after = 0.0;
  std::size_t dataset_size = 0;
  int sims_used = 0;
  // worst discovered weakness this round
  int top_center = 0;
  double top_magnitude = 0.0;
  double top_error = 0.0;
};

/// Builds one round of samples: smooth_quota(alpha, n) fresh smooth ICs and,
/// for the rest, fresh smooth ICs plus bumps steered by the discovered
/// weaknesses (center jittered by up to +/-2 indices, magnitude scaled by up
/// to +/-20%, both clipped). Empty weakness lists fall back to uniform random
/// bumps. Every sample is labeled by the solver on its exact input.
std::vector<LabeledSample> generate_targeted(int n, std::span<const WeaknessRecord> weaknesses,
                                             double alpha, const BurgersSolver& solver,
                                             std::uint64_t seed);

struct EvalOutcome {
  double e_base = 0.0;
  double e_robust = 0.0;
  double combined = 0.0;
  std::vector<double> clean_errors;       // per sample
  std::vector<double> attack_errors;      // per sample
  std::vector<Perturbation> worst_bumps;  // per sample
  long long solver_calls = 0;
};

/// Two-metric evaluation: mean clean relative L2 and the mean best DE-attack
/// objective over the set (per-sample attack seeds derive from cfg.seed).
EvalOutcome evaluate_model(const Predictor& model, std::span<const Field> test_set,
                           const BurgersSolver& solver, const AttackConfig& eval_cfg);

struct ActiveLearningConfig {
  int budget = 600;
  int bootstrap_size = 50;   // n0
  int per_round = 20;        // n_r
  int validation_size = 8;
  double alpha0 = 0.4;
  double tau = 0.05;
  AttackConfig probe;        // 30 iterations, fully random start
  AttackConfig eval;         // 40 iterations, zero-magnitude member planted
  TrainConfig initial_train; // 200 epochs
  TrainConfig update_train;  // 100 epochs per retrain
  bool warm_start = true;    // continue from current parameters when retraining
  std::uint64_t seed = 0;

  void validate() const;
};

ActiveLearningConfig default_al_config(std::uint64_t seed);

struct ActiveLearningRun {
  DeepOnetModel model;
  std::vector<RoundLog> rounds;
  BudgetLedger ledger;
  std::vector<LabeledSample> dataset;
  std::vector<Field> validation_set;
  std::string abort_reason;  // nonempty when training diverged; logs are partial
};

/// The full loop: bootstrap smooth data, initial training, then rounds of
/// probe / evaluate / adapt / generate / retrain until the training budget is
/// spent. The per-round evaluation runs on the fixed validation set;
/// validation and evaluation solves never touch the training budget.
ActiveLearningRun run_active_learning(const DeepOnetConfig& variant,
                                      const ActiveLearningConfig& cfg,
                                      const BurgersSolver& solver);

}  // namespace opdef
