#include "opdef/attack.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace opdef {

namespace {

struct Genome {
  double center;
  double magnitude;
};

std::int64_t pack_key(const Perturbation& p) {
  const auto ticks = static_cast<std::int64_t>(std::llround(p.magnitude / kMagnitudeTick));
  return (static_cast<std::int64_t>(p.center_index) << 32) ^ (ticks & 0xffffffffLL);
}

double clip(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

// Evaluates one DE generation (or the initial population) against the memo
// table. Candidate keys are deduplicated in first-appearance order before any
// objective runs, so both the results and the solver-call count are identical
// for every worker count.
class ObjectiveTable {
 public:
  ObjectiveTable(const Predictor& model, const Field& u0, const AttackConfig& cfg,
                 const BurgersSolver& solver)
      : model_(model), u0_(u0), cfg_(cfg), solver_(solver) {
    if (cfg_.model_shift_objective) clean_prediction_ = model_(u0_);
  }

  void evaluate(std::span<const Genome> candidates, std::span<double> fitness) {
    std::vector<std::int64_t> keys(candidates.size());
    std::vector<Perturbation> fresh;
    std::vector<std::int64_t> fresh_keys;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const Perturbation p = snap_candidate(candidates[i].center, candidates[i].magnitude, cfg_.width);
      keys[i] = pack_key(p);
      if (!memo_.count(keys[i]) &&
          std::find(fresh_keys.begin(), fresh_keys.end(), keys[i]) == fresh_keys.end()) {
        fresh.push_back(p);
        fresh_keys.push_back(keys[i]);
      }
    }

    std::vector<double> values(fresh.size());
    parallel_chunks(fresh.size(), static_cast<int>(fresh.size()), [&](int, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) values[i] = objective(fresh[i]);
    });
    for (std::size_t i = 0; i < fresh.size(); ++i) memo_.emplace(fresh_keys[i], values[i]);
    if (!cfg_.model_shift_objective) solver_calls_ += static_cast<long long>(fresh.size());

    for (std::size_t i = 0; i < candidates.size(); ++i) fitness[i] = memo_.at(keys[i]);
  }

  long long solver_calls() const { return solver_calls_; }

 private:
  double objective(const Perturbation& p) const {
    const Field input = apply_perturbation(u0_, p, solver_.grid());
    const Field pred = model_(input);
    if (cfg_.model_shift_objective) return relative_l2(pred, clean_prediction_);
    return relative_l2(pred, solver_.solve(input));
  }

  const Predictor& model_;
  const Field& u0_;
  const AttackConfig& cfg_;
  const BurgersSolver& solver_;
  Field clean_prediction_;
  std::unordered_map<std::int64_t, double> memo_;
  long long solver_calls_ = 0;
};

}  // namespace

void AttackConfig::validate() const {
  if (iterations < 1) throw ConfigError("attack needs iterations >= 1");
  if (population < 4) throw ConfigError("DE rand/1 mutation needs population >= 4");
  if (!(mutation > 0.0 && mutation <= 2.0)) throw ConfigError("mutation factor must be in (0, 2]");
  if (!(crossover >= 0.0 && crossover <= 1.0)) throw ConfigError("crossover rate must be in [0, 1]");
  if (!(magnitude_bound > 0.0)) throw ConfigError("magnitude bound must be positive");
  if (!(width > 0.0)) throw ConfigError("bump width must be positive");
}

Perturbation snap_candidate(double center, double magnitude, double width) {
  Perturbation p;
  p.center_index = static_cast<int>(std::llround(center));
  p.magnitude = static_cast<double>(std::llround(magnitude / kMagnitudeTick)) * kMagnitudeTick;
  p.width = width;
  return p;
}

double attack_objective(const Predictor& model, const Field& u0, const Perturbation& p,
                        const BurgersSolver& solver) {
  if (std::abs(p.magnitude) > kMagnitudeBound + 1e-12) {
    throw ConfigError("perturbation magnitude outside the threat model");
  }
  const Field input = apply_perturbation(u0, p, solver.grid());
  return relative_l2(model(input), solver.solve(input));
}

AttackResult de_attack(const Predictor& model, const Field& u0, const AttackConfig& cfg,
                       const BurgersSolver& solver) {
  cfg.validate();
  const int n_x = solver.grid().n_x;
  if (u0.size() != static_cast<std::size_t>(n_x)) throw ShapeError("attack input size");
  const double c_max = static_cast<double>(n_x - 1);
  const double m_max = cfg.magnitude_bound;

  Rng rng(cfg.seed);
  const std::size_t pop_n = static_cast<std::size_t>(cfg.population);
  std::vector<Genome> pop(pop_n);
  for (auto& g : pop) g = {rng.uniform(0.0, c_max), rng.uniform(-m_max, m_max)};
  if (cfg.include_zero_magnitude) pop[0].magnitude = 0.0;

  ObjectiveTable table(model, u0, cfg, solver);
  std::vector<double> fitness(pop_n);
  table.evaluate(pop, fitness);

  AttackResult result;
  result.evaluations = cfg.population;
  std::size_t best_i = 0;
  for (std::size_t i = 1; i < pop_n; ++i) {
    if (fitness[i] > fitness[best_i]) best_i = i;
  }

  std::vector<Genome> trials(pop_n);
  std::vector<double> trial_fitness(pop_n);
  result.history.reserve(static_cast<std::size_t>(cfg.iterations));

  for (int gen = 0; gen < cfg.iterations; ++gen) {
    for (std::size_t i = 0; i < pop_n; ++i) {
      std::size_t a, b, c;
      do { a = rng.below(pop_n); } while (a == i);
      do { b = rng.below(pop_n); } while (b == i || b == a);
      do { c = rng.below(pop_n); } while (c == i || c == a || c == b);

      const Genome v{clip(pop[a].center + cfg.mutation * (pop[b].center - pop[c].center), 0.0, c_max),
                     clip(pop[a].magnitude + cfg.mutation * (pop[b].magnitude - pop[c].magnitude),
                          -m_max, m_max)};

      const int forced = rng.index(2);
      Genome t = pop[i];
      if (rng.uniform() < cfg.crossover || forced == 0) t.center = v.center;
      if (rng.uniform() < cfg.crossover || forced == 1) t.magnitude = v.magnitude;
      trials[i] = t;
    }

    table.evaluate(trials, trial_fitness);
    result.evaluations += cfg.population;

    for (std::size_t i = 0; i < pop_n; ++i) {
      if (trial_fitness[i] >= fitness[i]) {
        pop[i] = trials[i];
        fitness[i] = trial_fitness[i];
      }
      if (fitness[i] > fitness[best_i]) best_i = i;
    }
    result.history.push_back(fitness[best_i]);
  }

  result.best = snap_candidate(pop[best_i].center, pop[best_i].magnitude, cfg.width);
  result.best_error = fitness[best_i];
  result.solver_calls = table.solver_calls();
  return result;
}

std::vector<WeaknessRecord> probe_weaknesses(const Predictor& model,
                                             std::span<const Field> validation_set,
                                             const AttackConfig& cfg,
                                             const BurgersSolver& solver,
                                             long long* solver_calls) {
  if (validation_set.empty()) throw UsageError("probe_weaknesses: empty validation set");
  std::vector<WeaknessRecord> records;
  records.reserve(validation_set.size());
  for (std::size_t i = 0; i < validation_set.size(); ++i) {
    AttackConfig per_sample = cfg;
    per_sample.seed = derive_seed(cfg.seed, i);
    const AttackResult r = de_attack(model, validation_set[i], per_sample, solver);
    if (solver_calls) *solver_calls += r.solver_calls;
    records.push_back({static_cast<int>(i), r.best, r.best_error});
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const WeaknessRecord& a, const WeaknessRecord& b) { return a.best_error > b.best_error; });
  return records;
}

double random_perturbation_error(const Predictor& model, const Field& u0, int n_trials,
                                 std::uint64_t seed, const BurgersSolver& solver,
                                 long long* solver_calls) {
  if (n_trials < 1) throw UsageError("random_perturbation_error: n_trials >= 1");
  const double c_max = static_cast<double>(solver.grid().n_x - 1);
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < n_trials; ++t) {
    const Perturbation p = snap_candidate(rng.uniform(0.0, c_max),
                                          rng.uniform(-kMagnitudeBound, kMagnitudeBound),
                                          kDefaultBumpWidth);
    worst = std::max(worst, attack_objective(model, u0, p, solver));
    if (solver_calls) ++*solver_calls;
  }
  return worst;
}

}  // namespace opdef
