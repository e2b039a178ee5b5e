#include "opdef/active_learning.hpp"

#include <algorithm>
#include <cmath>

namespace opdef {

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kSmooth: return "smooth";
    case Provenance::kTargeted: return "targeted";
    case Provenance::kBalancedPerturbed: return "balanced-perturbed";
  }
  return "unknown";
}

Provenance provenance_from_name(const std::string& name) {
  if (name == "smooth") return Provenance::kSmooth;
  if (name == "targeted") return Provenance::kTargeted;
  if (name == "balanced-perturbed") return Provenance::kBalancedPerturbed;
  throw ConfigError("unknown provenance: " + name);
}

std::vector<TrainSample> to_train_samples(std::span<const LabeledSample> data) {
  std::vector<TrainSample> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[i].input = data[i].input;
    out[i].target = data[i].label;
  }
  return out;
}

SafeguardState adapt_alpha(SafeguardState state, double e_base) {
  if (e_base > 1.1 * state.e_base_prev) {
    state.alpha = std::min(state.alpha + 0.1, 0.7);
  } else if (e_base < 0.9 * state.e_base_prev && e_base < state.tau) {
    state.alpha = std::max(state.alpha - 0.05, 0.3);
  }
  state.e_base_prev = e_base;
  return state;
}

int smooth_quota(double alpha, int n) {
  const int q = static_cast<int>(std::ceil(alpha * n - 1e-9));
  return std::clamp(q, 0, n);
}

namespace {

LabeledSample labeled_smooth(const BurgersSolver& solver, std::uint64_t ic_seed) {
  LabeledSample s;
  s.input = sample_smooth_ic({4, 0.25, ic_seed}, solver.grid());
  s.label = solver.solve(s.input);
  s.provenance = Provenance::kSmooth;
  return s;
}

}  // namespace

std::vector<LabeledSample> generate_targeted(int n, std::span<const WeaknessRecord> weaknesses,
                                             double alpha, const BurgersSolver& solver,
                                             std::uint64_t seed) {
  if (n < 1) throw UsageError("generate_targeted: n >= 1");
  const int n_smooth = smooth_quota(alpha, n);
  const int n_x = solver.grid().n_x;
  Rng rng(seed);

  std::vector<LabeledSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n_smooth; ++i) out.push_back(labeled_smooth(solver, rng.raw()));

  for (int i = n_smooth; i < n; ++i) {
    LabeledSample s;
    const Field base = sample_smooth_ic({4, 0.25, rng.raw()}, solver.grid());

    Perturbation p;
    if (weaknesses.empty()) {
      p.center_index = rng.index(n_x);
      p.magnitude = rng.uniform(-kMagnitudeBound, kMagnitudeBound);
    } else {
      const auto& w = weaknesses[rng.below(weaknesses.size())];
      const int jitter = rng.index(5) - 2;  // -2 .. +2
      p.center_index = std::clamp(w.best.center_index + jitter, 0, n_x - 1);
      const double scale = 1.0 + rng.uniform(-0.2, 0.2);
      p.magnitude = std::clamp(w.best.magnitude * scale, -kMagnitudeBound, kMagnitudeBound);
      p.width = w.best.width;
    }

    s.input = apply_perturbation(base, p, solver.grid());
    s.label = solver.solve(s.input);
    s.provenance = Provenance::kTargeted;
    s.perturbation = p;
    out.push_back(std::move(s));
  }
  return out;
}

EvalOutcome evaluate_model(const Predictor& model, std::span<const Field> test_set,
                           const BurgersSolver& solver, const AttackConfig& eval_cfg) {
  if (test_set.empty()) throw UsageError("evaluate_model: empty test set");
  EvalOutcome out;
  out.clean_errors.reserve(test_set.size());
  out.attack_errors.reserve(test_set.size());

  double base_sum = 0.0, robust_sum = 0.0;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const Field& u0 = test_set[i];
    const Field truth = solver.solve(u0);
    ++out.solver_calls;
    const double clean = relative_l2(model(u0), truth);

    AttackConfig per_sample = eval_cfg;
    per_sample.seed = derive_seed(eval_cfg.seed, i);
    const AttackResult attack = de_attack(model, u0, per_sample, solver);
    out.solver_calls += attack.solver_calls;

    out.clean_errors.push_back(clean);
    out.attack_errors.push_back(attack.best_error);
    out.worst_bumps.push_back(attack.best);
    base_sum += clean;
    robust_sum += attack.best_error;
  }

  out.e_base = base_sum / static_cast<double>(test_set.size());
  out.e_robust = robust_sum / static_cast<double>(test_set.size());
  out.combined = out.e_base + out.e_robust;
  return out;
}

void ActiveLearningConfig::validate() const {
  if (budget < 1 || bootstrap_size < 1 || per_round < 1) {
    throw ConfigError("active learning sizes must be >= 1");
  }
  if (bootstrap_size > budget) throw ConfigError("bootstrap exceeds the simulation budget");
  if (validation_size < 1) throw ConfigError("validation set must be nonempty");
  if (!(alpha0 >= 0.3 && alpha0 <= 0.7)) throw ConfigError("alpha0 must lie in [0.3, 0.7]");
  probe.validate();
  eval.validate();
  initial_train.validate();
  update_train.validate();
}

ActiveLearningConfig default_al_config(std::uint64_t seed) {
  ActiveLearningConfig cfg;
  cfg.seed = seed;
  cfg.probe.iterations = 30;
  cfg.probe.seed = derive_seed(seed, "probe-root");
  cfg.eval.iterations = 40;
  cfg.eval.include_zero_magnitude = true;
  cfg.eval.seed = derive_seed(seed, "eval-root");
  cfg.initial_train.epochs = 200;
  cfg.initial_train.seed = derive_seed(seed, "train-initial");
  cfg.update_train.epochs = 100;
  cfg.update_train.seed = derive_seed(seed, "train-update");
  return cfg;
}

ActiveLearningRun run_active_learning(const DeepOnetConfig& variant,
                                      const ActiveLearningConfig& cfg,
                                      const BurgersSolver& solver) {
  cfg.validate();

  ActiveLearningRun run{DeepOnetModel(variant, derive_seed(cfg.seed, "model-init")), {}, {}, {}, {}, {}};
  run.ledger.budget = cfg.budget;

  // Fixed validation set, outside the training budget; clean solutions are
  // reused every round.
  std::vector<Field> val_set;
  std::vector<Field> val_truth;
  for (int i = 0; i < cfg.validation_size; ++i) {
    val_set.push_back(sample_smooth_ic({4, 0.25, derive_seed(cfg.seed, derive_seed(0x5a17, static_cast<std::uint64_t>(i)))},
                                       solver.grid()));
    val_truth.push_back(solver.solve(val_set.back()));
    ++run.ledger.eval_sims_used;
  }
  run.validation_set = val_set;

  // Bootstrap smooth dataset and initial training.
  Rng data_rng(derive_seed(cfg.seed, "bootstrap-data"));
  for (int i = 0; i < cfg.bootstrap_size; ++i) {
    run.dataset.push_back(labeled_smooth(solver, data_rng.raw()));
  }
  run.ledger.training_sims_used = cfg.bootstrap_size;

  auto retrain = [&](const TrainConfig& tc, int round) -> bool {
    TrainConfig local = tc;
    local.seed = derive_seed(tc.seed, static_cast<std::uint64_t>(round));
    if (!cfg.warm_start && round > 0) {
      run.model = DeepOnetModel(variant, derive_seed(cfg.seed, derive_seed(0xc01d, static_cast<std::uint64_t>(round))));
    }
    const auto samples = to_train_samples(run.dataset);
    try {
      train(run.model, samples, local);
    } catch (const TrainingDivergenceError& e) {
      run.abort_reason = e.what();
      return false;
    }
    return true;
  };

  if (!retrain(cfg.initial_train, 0)) return run;

  auto clean_error = [&]() {
    const FrozenDeepOnet frozen(run.model);
    double sum = 0.0;
    for (std::size_t i = 0; i < val_set.size(); ++i) {
      sum += relative_l2(frozen.predict(val_set[i]), val_truth[i]);
    }
    return sum / static_cast<double>(val_set.size());
  };

  SafeguardState safeguard{cfg.alpha0, clean_error(), cfg.tau};

  int round = 0;
  while (run.ledger.training_sims_used < cfg.budget) {
    ++round;
    const FrozenDeepOnet frozen(run.model);
    const Predictor predictor = [&frozen](const Field& u) { return frozen.predict(u); };

    AttackConfig probe_cfg = cfg.probe;
    probe_cfg.seed = derive_seed(cfg.probe.seed, static_cast<std::uint64_t>(round));
    long long probe_calls = 0;
    const auto weaknesses = probe_weaknesses(predictor, val_set, probe_cfg, solver, &probe_calls);

    AttackConfig eval_cfg = cfg.eval;
    eval_cfg.seed = derive_seed(cfg.eval.seed, static_cast<std::uint64_t>(round));
    const EvalOutcome metrics = evaluate_model(predictor, val_set, solver, eval_cfg);
    run.ledger.eval_sims_used += metrics.solver_calls + probe_calls;

    safeguard = adapt_alpha(safeguard, metrics.e_base);

    const int n_new = std::min(cfg.per_round, cfg.budget - run.ledger.training_sims_used);
    auto fresh = generate_targeted(n_new, weaknesses, safeguard.alpha, solver,
                                   derive_seed(cfg.seed, derive_seed(0x9e4f, static_cast<std::uint64_t>(round))));
    for (auto& s : fresh) run.dataset.push_back(std::move(s));
    run.ledger.training_sims_used += n_new;

    RoundLog log;
    log.round = round;
    log.e_base = metrics.e_base;
    log.e_robust = metrics.e_robust;
    log.alpha_after = safeguard.alpha;
    log.dataset_size = run.dataset.size();
    log.sims_used = run.ledger.training_sims_used;
    if (!weaknesses.empty()) {
      log.top_center = weaknesses.front().best.center_index;
      log.top_magnitude = weaknesses.front().best.magnitude;
      log.top_error = weaknesses.front().best_error;
    }
    run.rounds.push_back(log);

    if (!retrain(cfg.update_train, round)) return run;
  }

  return run;
}

}  // namespace opdef
