#include "opdef/attack.hpp"

#include <cmath>

#include "doctest.h"
#include "opdef/deeponet.hpp"

using namespace opdef;

namespace {

// Fast solver setup for unit tests: coarse grid, short horizon.
SolverConfig tiny_solver_config() {
  SolverConfig cfg;
  cfg.grid = make_grid(32);
  cfg.n_steps = 60;
  return cfg;
}

AttackConfig tiny_attack(std::uint64_t seed, int iterations = 4) {
  AttackConfig cfg;
  cfg.iterations = iterations;
  cfg.population = 5;
  cfg.seed = seed;
  return cfg;
}

Predictor oracle_predictor(const BurgersSolver& solver) {
  return [&solver](const Field& u) { return solver.solve(u); };
}

// A deliberately wrong surrogate with a localized blind spot.
Predictor biased_predictor(const BurgersSolver& solver) {
  return [&solver](const Field& u) {
    Field out = solver.solve(u);
    for (std::size_t j = 8; j < 14 && j < out.size(); ++j) out[j] += 0.45 * u[j];
    return out;
  };
}

}  // namespace

TEST_CASE("attack objective: oracle model is flat, zero magnitude reduces to the clean error") {
  BurgersSolver solver(tiny_solver_config());
  const auto u0 = sample_smooth_ic({4, 0.25, 3}, solver.grid());
  const auto oracle = oracle_predictor(solver);

  CHECK(attack_objective(oracle, u0, {10, 0.2, 5.0}, solver) <= 1e-10);
  CHECK(attack_objective(oracle, u0, {31, -0.3, 5.0}, solver) <= 1e-10);

  const auto model = biased_predictor(solver);
  const double clean = relative_l2(model(u0), solver.solve(u0));
  CHECK(attack_objective(model, u0, {20, 0.0, 5.0}, solver) == clean);

  // purity: repeated calls are bit-equal
  const double a = attack_objective(model, u0, {9, 0.17, 5.0}, solver);
  const double b = attack_objective(model, u0, {9, 0.17, 5.0}, solver);
  CHECK(a == b);

  CHECK_THROWS_AS(attack_objective(model, u0, {9, 0.5, 5.0}, solver), ConfigError);
}

TEST_CASE("de_attack contract: flat oracle, monotone history, exact budget") {
  BurgersSolver solver(tiny_solver_config());
  const auto u0 = sample_smooth_ic({4, 0.25, 11}, solver.grid());

  const auto oracle = oracle_predictor(solver);
  const auto flat = de_attack(oracle, u0, tiny_attack(5), solver);
  CHECK(flat.best_error <= 1e-10);

  const auto model = biased_predictor(solver);
  const auto cfg = tiny_attack(7, 6);
  const auto r = de_attack(model, u0, cfg, solver);

  CHECK(r.history.size() == static_cast<std::size_t>(cfg.iterations));
  for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] >= r.history[i - 1]);
  CHECK(r.best_error == r.history.back());
  CHECK(r.evaluations == cfg.population * (cfg.iterations + 1));
  CHECK(r.solver_calls <= r.evaluations);
  CHECK(r.solver_calls >= 1);

  // bounds after clipping and snapping
  CHECK(r.best.center_index >= 0);
  CHECK(r.best.center_index < solver.grid().n_x);
  CHECK(std::abs(r.best.magnitude) <= kMagnitudeBound + 1e-12);

  // determinism in seed, sensitivity to seed
  const auto r2 = de_attack(model, u0, cfg, solver);
  CHECK(r2.best_error == r.best_error);
  CHECK(r2.history == r.history);
  CHECK(r2.best.center_index == r.best.center_index);
  CHECK(r2.best.magnitude == r.best.magnitude);
}

TEST_CASE("attack finds the planted blind spot") {
  BurgersSolver solver(tiny_solver_config());
  const auto u0 = sample_smooth_ic({4, 0.25, 13}, solver.grid());
  const auto model = biased_predictor(solver);

  AttackConfig cfg = tiny_attack(21, 15);
  cfg.population = 10;
  const auto r = de_attack(model, u0, cfg, solver);

  const double clean = relative_l2(model(u0), solver.solve(u0));
  CHECK(r.best_error > clean);
  // the rigged region is indices [8, 14); a magnitude-bearing bump should land near it
  CHECK(r.best.center_index >= 4);
  CHECK(r.best.center_index <= 18);
  CHECK(std::abs(r.best.magnitude) > 0.1);
}

TEST_CASE("zero-magnitude seeding makes the attack dominate the clean error") {
  BurgersSolver solver(tiny_solver_config());
  const auto u0 = sample_smooth_ic({4, 0.25, 17}, solver.grid());
  const auto model = biased_predictor(solver);

  AttackConfig cfg = tiny_attack(33, 3);
  cfg.include_zero_magnitude = true;
  const auto r = de_attack(model, u0, cfg, solver);
  const double clean = relative_l2(model(u0), solver.solve(u0));
  CHECK(r.best_error >= clean - 1e-12);
}

TEST_CASE("model-shift proxy objective runs without any solver calls") {
  BurgersSolver solver(tiny_solver_config());
  const auto u0 = sample_smooth_ic({4, 0.25, 19}, solver.grid());
  const auto model = biased_predictor(solver);

  AttackConfig cfg = tiny_attack(3, 3);
  cfg.model_shift_objective = true;
  const auto r = de_attack(model, u0, cfg, solver);
  CHECK(r.solver_calls == 0);
  CHECK(r.best_error >= 0.0);
}

TEST_CASE("probe_weaknesses: one sorted record per sample") {
  BurgersSolver solver(tiny_solver_config());
  std::vector<Field> val;
  for (int i = 0; i < 5; ++i) val.push_back(sample_smooth_ic({4, 0.25, 40 + static_cast<std::uint64_t>(i)}, solver.grid()));

  const auto model = biased_predictor(solver);
  const auto records = probe_weaknesses(model, val, tiny_attack(2, 3), solver);
  CHECK(records.size() == val.size());
  for (std::size_t i = 1; i < records.size(); ++i) CHECK(records[i - 1].best_error >= records[i].best_error);

  const auto oracle = oracle_predictor(solver);
  const auto flat = probe_weaknesses(oracle, val, tiny_attack(2, 2), solver);
  for (const auto& rec : flat) CHECK(rec.best_error <= 1e-10);

  CHECK_THROWS_AS(probe_weaknesses(model, std::span<const Field>{}, tiny_attack(1), solver), UsageError);
}

TEST_CASE("random perturbation baseline: degenerate max, nested monotonicity, flat oracle") {
  BurgersSolver solver(tiny_solver_config());
  const auto u0 = sample_smooth_ic({4, 0.25, 23}, solver.grid());
  const auto model = biased_predictor(solver);

  // n = 1 equals the objective at the single sampled perturbation
  Rng probe(99);
  const Perturbation p = snap_candidate(probe.uniform(0.0, 31.0),
                                        probe.uniform(-kMagnitudeBound, kMagnitudeBound), 5.0);
  CHECK(random_perturbation_error(model, u0, 1, 99, solver) ==
        attack_objective(model, u0, p, solver));

  const double r3 = random_perturbation_error(model, u0, 3, 7, solver);
  const double r8 = random_perturbation_error(model, u0, 8, 7, solver);
  CHECK(r8 >= r3);

  long long calls = 0;
  CHECK(random_perturbation_error(oracle_predictor(solver), u0, 4, 1, solver, &calls) <= 1e-10);
  CHECK(calls == 4);

  CHECK_THROWS_AS(random_perturbation_error(model, u0, 0, 1, solver), UsageError);
}

TEST_CASE("attack config validation") {
  AttackConfig cfg;
  cfg.population = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.population = 15;
  cfg.mutation = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.mutation = 0.8;
  cfg.crossover = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.crossover = 0.9;
  CHECK_NOTHROW(cfg.validate());
}
