#include "opdef/active_learning.hpp"

#include <cmath>

#include "doctest.h"

using namespace opdef;

namespace {

SolverConfig tiny_solver_config() {
  SolverConfig cfg;
  cfg.grid = make_grid(32);
  cfg.n_steps = 60;
  return cfg;
}

ActiveLearningConfig tiny_al_config(std::uint64_t seed) {
  ActiveLearningConfig cfg = default_al_config(seed);
  cfg.budget = 20;
  cfg.bootstrap_size = 6;
  cfg.per_round = 4;
  cfg.validation_size = 2;
  cfg.probe.iterations = 2;
  cfg.probe.population = 4;
  cfg.eval.iterations = 2;
  cfg.eval.population = 4;
  cfg.initial_train.epochs = 3;
  cfg.initial_train.batch_size = 8;
  cfg.update_train.epochs = 2;
  cfg.update_train.batch_size = 8;
  return cfg;
}

DeepOnetConfig tiny_variant(bool denoiser) {
  DeepOnetConfig cfg;
  cfg.n_sensors = 32;
  cfg.branch_hidden = 12;
  cfg.trunk_hidden = 12;
  cfg.latent_dim = 8;
  cfg.depth = 2;
  cfg.has_denoiser = denoiser;
  cfg.bottleneck_dim = 8;
  return cfg;
}

}  // namespace

TEST_CASE("adapt_alpha reproduces every branch of the safeguard, clamps included") {
  // baseline got worse by more than 10%: raise alpha by 0.1
  {
    const auto out = adapt_alpha({0.4, 0.040, 0.05}, 0.048);
    CHECK(out.alpha == 0.5);
    CHECK(out.e_base_prev == 0.048);
  }
  // baseline improved by more than 10% and is under tau: lower alpha by 0.05
  {
    const auto out = adapt_alpha({0.4, 0.040, 0.05}, 0.030);
    CHECK(out.alpha == 0.4 - 0.05);
    CHECK(out.e_base_prev == 0.030);
  }
  // upper clamp
  {
    const auto out = adapt_alpha({0.7, 0.010, 0.05}, 0.040);
    CHECK(out.alpha == 0.7);
  }
  // lower clamp
  {
    const auto out = adapt_alpha({0.3, 0.040, 0.05}, 0.030);
    CHECK(out.alpha == 0.3);
  }
  // dead zone: equal errors change nothing but still refresh the history
  {
    const auto out = adapt_alpha({0.45, 0.040, 0.05}, 0.040);
    CHECK(out.alpha == 0.45);
    CHECK(out.e_base_prev == 0.040);
  }
  // improved but above tau: no decrease
  {
    const auto out = adapt_alpha({0.45, 0.10, 0.05}, 0.080);
    CHECK(out.alpha == 0.45);
  }
}

TEST_CASE("alpha stays inside [0.3, 0.7] for arbitrary error sequences") {
  Rng rng(5);
  SafeguardState st{0.4, 0.05, 0.05};
  for (int i = 0; i < 2000; ++i) {
    const double e = rng.uniform(0.0, 0.2);
    st = adapt_alpha(st, e);
    CHECK(st.alpha >= 0.3);
    CHECK(st.alpha <= 0.7);
    CHECK(st.e_base_prev == e);
  }
}

TEST_CASE("smooth quota matches real-arithmetic ceilings") {
  CHECK(smooth_quota(0.4, 20) == 8);
  CHECK(smooth_quota(0.7, 20) == 14);
  CHECK(smooth_quota(0.4 - 0.05, 20) == 7);   // ceil(0.35 * 20) = 7, not 8
  CHECK(smooth_quota(0.3, 20) == 6);
  CHECK(smooth_quota(0.41, 20) == 9);         // genuine fractional quota rounds up
  CHECK(smooth_quota(0.7, 10) == 7);
  CHECK(smooth_quota(0.35, 2) == 1);
}

TEST_CASE("generate_targeted honors the smooth quota and labels by the solver") {
  BurgersSolver solver(tiny_solver_config());
  std::vector<WeaknessRecord> weaknesses{
      {0, {12, 0.25, 5.0}, 0.3},
      {1, {20, -0.2, 5.0}, 0.2},
  };

  const auto batch = generate_targeted(20, weaknesses, 0.4, solver, 77);
  CHECK(batch.size() == 20);
  int smooth = 0, targeted = 0;
  for (const auto& s : batch) {
    if (s.provenance == Provenance::kSmooth) {
      ++smooth;
      CHECK(!s.perturbation.has_value());
    } else {
      ++targeted;
      REQUIRE(s.perturbation.has_value());
      const auto& p = *s.perturbation;
      // jitter stays within +/-2 of a discovered center, magnitude within +/-20%
      const bool near_first = std::abs(p.center_index - 12) <= 2 && p.magnitude > 0.0;
      const bool near_second = std::abs(p.center_index - 20) <= 2 && p.magnitude < 0.0;
      CHECK((near_first || near_second));
      const double ref = near_first ? 0.25 : -0.2;
      CHECK(std::abs(p.magnitude) >= std::abs(ref) * 0.8 - 1e-12);
      CHECK(std::abs(p.magnitude) <= std::abs(ref) * 1.2 + 1e-12);
    }
    // label fidelity: relabeling reproduces the stored label bit-exactly
    CHECK(solver.solve(s.input) == s.label);
  }
  CHECK(smooth == 8);
  CHECK(targeted == 12);

  const auto high_alpha = generate_targeted(20, weaknesses, 0.7, solver, 78);
  int smooth_high = 0;
  for (const auto& s : high_alpha) smooth_high += s.provenance == Provenance::kSmooth ? 1 : 0;
  CHECK(smooth_high == 14);

  // empty weakness list falls back to uniform random bumps
  const auto fallback = generate_targeted(6, {}, 0.3, solver, 79);
  int bumps = 0;
  for (const auto& s : fallback) {
    if (s.perturbation) {
      ++bumps;
      CHECK(std::abs(s.perturbation->magnitude) <= kMagnitudeBound);
      CHECK(s.perturbation->center_index >= 0);
      CHECK(s.perturbation->center_index < 32);
    }
  }
  CHECK(bumps == 4);

  // determinism
  const auto again = generate_targeted(20, weaknesses, 0.4, solver, 77);
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(again[i].input == batch[i].input);
    CHECK(again[i].label == batch[i].label);
  }
}

TEST_CASE("evaluate_model: oracle flatness, combined additivity, clean-error domination") {
  BurgersSolver solver(tiny_solver_config());
  std::vector<Field> test_set;
  for (int i = 0; i < 3; ++i) {
    test_set.push_back(sample_smooth_ic({4, 0.25, 200 + static_cast<std::uint64_t>(i)}, solver.grid()));
  }

  AttackConfig eval_cfg;
  eval_cfg.iterations = 2;
  eval_cfg.population = 4;
  eval_cfg.include_zero_magnitude = true;
  eval_cfg.seed = 4;

  const Predictor oracle = [&solver](const Field& u) { return solver.solve(u); };
  const auto perfect = evaluate_model(oracle, test_set, solver, eval_cfg);
  CHECK(perfect.e_base <= 1e-10);
  CHECK(perfect.e_robust <= 1e-10);
  CHECK(perfect.combined <= 1e-10);

  const Predictor skewed = [&solver](const Field& u) {
    Field out = solver.solve(u);
    for (auto& v : out) v *= 1.07;
    return out;
  };
  const auto metrics = evaluate_model(skewed, test_set, solver, eval_cfg);
  CHECK(metrics.combined == metrics.e_base + metrics.e_robust);
  CHECK(metrics.e_robust >= metrics.e_base - 1e-12);
  CHECK(metrics.clean_errors.size() == test_set.size());
  CHECK(metrics.attack_errors.size() == test_set.size());
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    CHECK(metrics.attack_errors[i] >= metrics.clean_errors[i] - 1e-12);
  }
}

TEST_CASE("active learning run: exact ledger, growing dataset, determinism") {
  BurgersSolver solver(tiny_solver_config());
  const auto cfg = tiny_al_config(31);

  auto run = run_active_learning(tiny_variant(false), cfg, solver);
  CHECK(run.abort_reason.empty());

  // 6 bootstrap + 3 full rounds of 4 + final truncated round of 2 = 20
  CHECK(run.ledger.training_sims_used == 20);
  CHECK(run.ledger.budget == 20);
  CHECK(run.rounds.size() == 4);
  CHECK(run.dataset.size() == 20);
  CHECK(run.ledger.eval_sims_used > 0);

  std::size_t prev = cfg.bootstrap_size;
  for (const auto& log : run.rounds) {
    CHECK(log.dataset_size > prev);
    prev = log.dataset_size;
    CHECK(log.alpha_after >= 0.3);
    CHECK(log.alpha_after <= 0.7);
    CHECK(log.e_base >= 0.0);
    CHECK(log.e_robust >= 0.0);
  }
  CHECK(run.rounds.back().dataset_size == 20);

  // per-round smooth quota holds among the fresh samples
  std::size_t cursor = static_cast<std::size_t>(cfg.bootstrap_size);
  prev = cursor;
  for (const auto& log : run.rounds) {
    int smooth = 0;
    const int n_new = static_cast<int>(log.dataset_size - prev);
    for (std::size_t i = cursor; i < log.dataset_size; ++i) {
      smooth += run.dataset[i].provenance == Provenance::kSmooth ? 1 : 0;
    }
    CHECK(smooth == smooth_quota(log.alpha_after, n_new));
    cursor = log.dataset_size;
    prev = log.dataset_size;
  }

  // audit: stored labels replay bit-exactly through the solver
  for (std::size_t i = 0; i < run.dataset.size(); i += 3) {
    CHECK(solver.solve(run.dataset[i].input) == run.dataset[i].label);
  }

  auto rerun = run_active_learning(tiny_variant(false), cfg, solver);
  CHECK(rerun.rounds.size() == run.rounds.size());
  for (std::size_t i = 0; i < run.rounds.size(); ++i) {
    CHECK(rerun.rounds[i].e_base == run.rounds[i].e_base);
    CHECK(rerun.rounds[i].e_robust == run.rounds[i].e_robust);
    CHECK(rerun.rounds[i].alpha_after == run.rounds[i].alpha_after);
  }
  CHECK(std::vector<double>(rerun.model.params().begin(), rerun.model.params().end()) ==
        std::vector<double>(run.model.params().begin(), run.model.params().end()));
}

TEST_CASE("active learning works with the denoising variant too") {
  BurgersSolver solver(tiny_solver_config());
  ActiveLearningConfig cfg = tiny_al_config(8);
  cfg.budget = 10;
  cfg.bootstrap_size = 4;
  cfg.per_round = 3;

  const auto run = run_active_learning(tiny_variant(true), cfg, solver);
  CHECK(run.abort_reason.empty());
  // 4 + 3 + 3 = 10 exactly
  CHECK(run.ledger.training_sims_used == 10);
  CHECK(run.rounds.size() == 2);
  CHECK(run.model.config().has_denoiser);
}
