#include "opdef/experiment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace opdef {

namespace {

constexpr std::array<StrategyInfo, 5> kStrategies{{
    {Strategy::kBaseline, "baseline", "Baseline", "smooth", "standard", false, false},
    {Strategy::kBalanced, "balanced", "Balanced", "mixed", "standard", false, false},
    {Strategy::kDenoiseOnly, "denoise-only", "Denoising only", "smooth", "denoising", false, true},
    {Strategy::kActiveLearning, "active-learning", "Active Learning", "adaptive", "standard", true, false},
    {Strategy::kAlDenoise, "al-denoise", "AL + Denoising", "adaptive", "denoising", true, true},
}};

ActiveLearningConfig reseed_al(ActiveLearningConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.probe.seed = derive_seed(seed, "probe-root");
  cfg.eval.seed = derive_seed(seed, "eval-root");
  cfg.initial_train.seed = derive_seed(seed, "train-initial");
  cfg.update_train.seed = derive_seed(seed, "train-update");
  return cfg;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  return f;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

std::string two_decimals(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::span<const StrategyInfo> strategy_table() { return kStrategies; }

const StrategyInfo& strategy_info(Strategy s) {
  for (const auto& info : kStrategies) {
    if (info.strategy == s) return info;
  }
  throw ConfigError("unknown strategy");
}

Strategy strategy_from_name(const std::string& name) {
  for (const auto& info : kStrategies) {
    if (name == info.name) return info.strategy;
  }
  throw ConfigError("unknown strategy name: " + name +
                    " (expected baseline|balanced|denoise-only|active-learning|al-denoise)");
}

void ExperimentConfig::validate() const {
  if (strategies.empty()) throw ConfigError("no strategies requested");
  if (budget < 1) throw ConfigError("budget must be >= 1");
  if (test_size < 8) throw ConfigError("test set must hold at least 8 samples");
  if (seed_repeats < 1) throw ConfigError("seed repeat count must be >= 1");
  model.validate();
  al.validate();
  final_eval.validate();
  upfront_train.validate();
  if (model.n_sensors != solver.grid.n_x) {
    throw ConfigError("model sensor count must match the solver grid");
  }
}

ExperimentConfig default_experiment_config(std::uint64_t seed) {
  ExperimentConfig cfg;
  for (const auto& info : kStrategies) cfg.strategies.push_back(info.strategy);
  cfg.seed = seed;
  cfg.solver = default_solver_config();
  cfg.al = default_al_config(seed);
  cfg.final_eval.iterations = 40;
  cfg.final_eval.include_zero_magnitude = true;
  cfg.final_eval.seed = derive_seed(seed, "final-eval");
  cfg.upfront_train.epochs = 200;
  cfg.upfront_train.seed = derive_seed(seed, "upfront-train");
  return cfg;
}

ExperimentConfig config_from_kv(const KvConfig& kv) {
  static const std::array<const char*, 31> known{
      "n_x", "nu", "T", "n_steps", "seed", "out_dir", "budget", "test_size", "strategies",
      "seeds", "n0", "n_r", "alpha0", "tau", "val_size", "probe_iterations", "eval_iterations",
      "population", "mutation_f", "crossover_cr", "sigma", "epochs_initial", "epochs_update",
      "batch_size", "lr0", "lr_min", "warm_start", "hidden_dim", "latent_dim", "depth",
      "bottleneck_dim"};
  for (const auto& [key, value] : kv.entries()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end()) {
      throw ConfigError("unknown config key: " + key + " = " + value);
    }
  }

  ExperimentConfig cfg = default_experiment_config(kv.get_u64("seed", 1));

  SolverConfig solver;
  solver.grid = make_grid(kv.get_int("n_x", 64));
  solver.viscosity = kv.get_double("nu", 0.1);
  solver.terminal_time = kv.get_double("T", 1.0);
  solver.n_steps = kv.get_int("n_steps", 500);
  cfg.solver = solver;

  cfg.out_dir = kv.get_string("out_dir", cfg.out_dir);
  cfg.budget = kv.get_int("budget", cfg.budget);
  cfg.test_size = kv.get_int("test_size", cfg.test_size);
  cfg.seed_repeats = kv.get_int("seeds", cfg.seed_repeats);

  if (kv.has("strategies")) {
    cfg.strategies.clear();
    std::istringstream ss(kv.get_string("strategies", ""));
    std::string name;
    while (std::getline(ss, name, ',')) {
      const auto begin = name.find_first_not_of(" \t");
      const auto end = name.find_last_not_of(" \t");
      if (begin == std::string::npos) continue;
      cfg.strategies.push_back(strategy_from_name(name.substr(begin, end - begin + 1)));
    }
  }

  cfg.model.n_sensors = cfg.solver.grid.n_x;
  cfg.model.branch_hidden = kv.get_int("hidden_dim", cfg.model.branch_hidden);
  cfg.model.trunk_hidden = cfg.model.branch_hidden;
  cfg.model.latent_dim = kv.get_int("latent_dim", cfg.model.latent_dim);
  cfg.model.depth = kv.get_int("depth", cfg.model.depth);
  cfg.model.bottleneck_dim = kv.get_int("bottleneck_dim", cfg.model.bottleneck_dim);

  cfg.al.budget = cfg.budget;
  cfg.al.bootstrap_size = kv.get_int("n0", cfg.al.bootstrap_size);
  cfg.al.per_round = kv.get_int("n_r", cfg.al.per_round);
  cfg.al.alpha0 = kv.get_double("alpha0", cfg.al.alpha0);
  cfg.al.tau = kv.get_double("tau", cfg.al.tau);
  cfg.al.validation_size = kv.get_int("val_size", cfg.al.validation_size);
  cfg.al.probe.iterations = kv.get_int("probe_iterations", cfg.al.probe.iterations);
  cfg.al.eval.iterations = kv.get_int("eval_iterations", cfg.al.eval.iterations);

  const int population = kv.get_int("population", cfg.final_eval.population);
  const double mutation = kv.get_double("mutation_f", cfg.final_eval.mutation);
  const double crossover = kv.get_double("crossover_cr", cfg.final_eval.crossover);
  const double width = kv.get_double("sigma", cfg.final_eval.width);
  for (AttackConfig* a : {&cfg.al.probe, &cfg.al.eval, &cfg.final_eval}) {
    a->population = population;
    a->mutation = mutation;
    a->crossover = crossover;
    a->width = width;
  }
  cfg.final_eval.iterations = kv.get_int("eval_iterations", cfg.final_eval.iterations);

  cfg.al.initial_train.epochs = kv.get_int("epochs_initial", cfg.al.initial_train.epochs);
  cfg.al.update_train.epochs = kv.get_int("epochs_update", cfg.al.update_train.epochs);
  cfg.upfront_train.epochs = cfg.al.initial_train.epochs;
  const int batch = kv.get_int("batch_size", cfg.upfront_train.batch_size);
  const double lr0 = kv.get_double("lr0", cfg.upfront_train.lr0);
  const double lr_min = kv.get_double("lr_min", cfg.upfront_train.lr_min);
  for (TrainConfig* t : {&cfg.al.initial_train, &cfg.al.update_train, &cfg.upfront_train}) {
    t->batch_size = batch;
    t->lr0 = lr0;
    t->lr_min = lr_min;
  }
  cfg.al.warm_start = kv.get_bool("warm_start", cfg.al.warm_start);

  cfg.validate();
  return cfg;
}

KvConfig kv_from_config(const ExperimentConfig& cfg) {
  KvConfig kv;
  kv.set("n_x", std::to_string(cfg.solver.grid.n_x));
  kv.set("nu", format_double(cfg.solver.viscosity));
  kv.set("T", format_double(cfg.solver.terminal_time));
  kv.set("n_steps", std::to_string(cfg.solver.n_steps));
  kv.set("seed", std::to_string(cfg.seed));
  kv.set("out_dir", cfg.out_dir);
  kv.set("budget", std::to_string(cfg.budget));
  kv.set("test_size", std::to_string(cfg.test_size));
  kv.set("seeds", std::to_string(cfg.seed_repeats));
  std::string names;
  for (const auto s : cfg.strategies) {
    if (!names.empty()) names += ",";
    names += strategy_info(s).name;
  }
  kv.set("strategies", names);
  kv.set("n0", std::to_string(cfg.al.bootstrap_size));
  kv.set("n_r", std::to_string(cfg.al.per_round));
  kv.set("alpha0", format_double(cfg.al.alpha0));
  kv.set("tau", format_double(cfg.al.tau));
  kv.set("val_size", std::to_string(cfg.al.validation_size));
  kv.set("probe_iterations", std::to_string(cfg.al.probe.iterations));
  kv.set("eval_iterations", std::to_string(cfg.final_eval.iterations));
  kv.set("population", std::to_string(cfg.final_eval.population));
  kv.set("mutation_f", format_double(cfg.final_eval.mutation));
  kv.set("crossover_cr", format_double(cfg.final_eval.crossover));
  kv.set("sigma", format_double(cfg.final_eval.width));
  kv.set("epochs_initial", std::to_string(cfg.al.initial_train.epochs));
  kv.set("epochs_update", std::to_string(cfg.al.update_train.epochs));
  kv.set("batch_size", std::to_string(cfg.upfront_train.batch_size));
  kv.set("lr0", format_double(cfg.upfront_train.lr0));
  kv.set("lr_min", format_double(cfg.upfront_train.lr_min));
  kv.set("warm_start", cfg.al.warm_start ? "true" : "false");
  kv.set("hidden_dim", std::to_string(cfg.model.branch_hidden));
  kv.set("latent_dim", std::to_string(cfg.model.latent_dim));
  kv.set("depth", std::to_string(cfg.model.depth));
  kv.set("bottleneck_dim", std::to_string(cfg.model.bottleneck_dim));
  return kv;
}

std::vector<LabeledSample> build_strategy_dataset(Strategy s, int budget,
                                                  const BurgersSolver& solver,
                                                  std::uint64_t seed) {
  const auto& info = strategy_info(s);
  if (info.adaptive) {
    throw UsageError("adaptive strategies build their dataset inside the learning loop");
  }
  if (budget < 1) throw UsageError("dataset budget must be >= 1");

  Rng rng(seed);
  std::vector<LabeledSample> data;
  data.reserve(static_cast<std::size_t>(budget));

  const int n_perturbed = s == Strategy::kBalanced ? static_cast<int>(std::llround(0.6 * budget)) : 0;
  const int n_x = solver.grid().n_x;

  for (int i = 0; i < n_perturbed; ++i) {
    LabeledSample sample;
    const Field base = sample_smooth_ic({4, 0.25, rng.raw()}, solver.grid());
    Perturbation p;
    p.center_index = rng.index(n_x);
    p.magnitude = rng.uniform(-kMagnitudeBound, kMagnitudeBound);
    sample.input = apply_perturbation(base, p, solver.grid());
    sample.label = solver.solve(sample.input);
    sample.provenance = Provenance::kBalancedPerturbed;
    sample.perturbation = p;
    data.push_back(std::move(sample));
  }
  for (int i = n_perturbed; i < budget; ++i) {
    LabeledSample sample;
    sample.input = sample_smooth_ic({4, 0.25, rng.raw()}, solver.grid());
    sample.label = solver.solve(sample.input);
    sample.provenance = Provenance::kSmooth;
    data.push_back(std::move(sample));
  }
  return data;
}

StrategyOutcome run_strategy(Strategy s, const ExperimentConfig& cfg, const BurgersSolver& solver,
                             std::span<const Field> test_set) {
  const auto& info = strategy_info(s);
  const std::uint64_t strategy_seed = derive_seed(cfg.seed, info.name);

  StrategyOutcome outcome;
  outcome.row.strategy = info.name;
  outcome.row.data_policy = info.data_policy;
  outcome.row.model_variant = info.model_variant;

  DeepOnetConfig variant = cfg.model;
  variant.has_denoiser = info.denoiser;

  try {
    if (info.adaptive) {
      ActiveLearningConfig al = reseed_al(cfg.al, strategy_seed);
      al.budget = cfg.budget;
      auto run = run_active_learning(variant, al, solver);
      if (!run.abort_reason.empty()) throw TrainingDivergenceError(run.abort_reason, -1);
      outcome.rounds = std::move(run.rounds);
      outcome.row.training_sims = run.ledger.training_sims_used;
      outcome.row.eval_sims = run.ledger.eval_sims_used;
      outcome.model.emplace(std::move(run.model));
    } else {
      const auto dataset =
          build_strategy_dataset(s, cfg.budget, solver, derive_seed(strategy_seed, "data"));
      DeepOnetModel model(variant, derive_seed(strategy_seed, "model-init"));
      TrainConfig tc = cfg.upfront_train;
      tc.seed = derive_seed(strategy_seed, "train");
      train(model, to_train_samples(dataset), tc);
      outcome.row.training_sims = static_cast<int>(dataset.size());
      outcome.model.emplace(std::move(model));
    }

    const FrozenDeepOnet frozen(*outcome.model);
    const Predictor predictor = [&frozen](const Field& u) { return frozen.predict(u); };
    outcome.eval = evaluate_model(predictor, test_set, solver, cfg.final_eval);
    outcome.row.eval_sims += outcome.eval.solver_calls;
    outcome.row.baseline_pct = 100.0 * outcome.eval.e_base;
    outcome.row.robust_pct = 100.0 * outcome.eval.e_robust;
    outcome.row.combined_pct = 100.0 * outcome.eval.combined;
  } catch (const std::exception& e) {
    outcome.row.error = e.what();
    outcome.row.baseline_pct = std::nan("");
    outcome.row.robust_pct = std::nan("");
    outcome.row.combined_pct = std::nan("");
  }
  return outcome;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  const BurgersSolver solver(cfg.solver);

  std::vector<Field> test_set;
  test_set.reserve(static_cast<std::size_t>(cfg.test_size));
  for (int i = 0; i < cfg.test_size; ++i) {
    test_set.push_back(sample_smooth_ic(
        {4, 0.25, derive_seed(derive_seed(cfg.seed, "test-ic"), static_cast<std::uint64_t>(i))},
        cfg.solver.grid));
  }

  ExperimentResult result;
  std::vector<StrategyOutcome> outcomes;
  for (const Strategy s : cfg.strategies) {
    outcomes.push_back(run_strategy(s, cfg, solver, test_set));
    const auto& outcome = outcomes.back();
    result.rows.push_back(outcome.row);
    if (!outcome.rounds.empty()) result.round_logs[outcome.row.strategy] = outcome.rounds;
  }

  result.files = emit_report(result.rows, result.round_logs, cfg.out_dir);

  // per-sample evaluation detail, worst bump included
  const std::string samples_path = join_path(cfg.out_dir, "eval_samples.csv");
  {
    auto out = open_out(samples_path);
    out << "strategy,sample,clean_error,attack_error,center,magnitude\n";
    for (const auto& outcome : outcomes) {
      if (!outcome.row.ok()) continue;
      for (std::size_t i = 0; i < outcome.eval.clean_errors.size(); ++i) {
        out << outcome.row.strategy << ',' << i << ',' << format_double(outcome.eval.clean_errors[i])
            << ',' << format_double(outcome.eval.attack_errors[i]) << ','
            << outcome.eval.worst_bumps[i].center_index << ','
            << format_double(outcome.eval.worst_bumps[i].magnitude) << '\n';
      }
    }
  }
  result.files.push_back(samples_path);

  for (const auto& outcome : outcomes) {
    if (!outcome.model) continue;
    const std::string ckpt = join_path(cfg.out_dir, "model_" + outcome.row.strategy + ".ckpt");
    save_checkpoint(*outcome.model, ckpt);
    result.files.push_back(ckpt);
  }

  const std::string cfg_path = join_path(cfg.out_dir, "config_used.txt");
  kv_from_config(cfg).save(cfg_path);
  result.files.push_back(cfg_path);

  return result;
}

std::vector<std::string> emit_report(std::span<const ResultsRow> rows,
                                     const std::map<std::string, std::vector<RoundLog>>& round_logs,
                                     const std::string& out_dir) {
  if (rows.empty()) throw UsageError("emit_report: no rows");
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> files;

  const std::string results_path = join_path(out_dir, "results.csv");
  {
    auto out = open_out(results_path);
    out << "strategy,data_policy,model_variant,baseline_pct,robust_pct,combined_pct\n";
    for (const auto& r : rows) {
      out << r.strategy << ',' << r.data_policy << ',' << r.model_variant << ','
          << format_double(r.baseline_pct) << ',' << format_double(r.robust_pct) << ','
          << format_double(r.combined_pct) << '\n';
    }
  }
  files.push_back(results_path);

  const std::string fig5_path = join_path(out_dir, "fig5_bars.csv");
  {
    auto out = open_out(fig5_path);
    out << "strategy,e_base,e_robust\n";
    for (const auto& r : rows) {
      out << r.strategy << ',' << format_double(r.baseline_pct) << ',' << format_double(r.robust_pct)
          << '\n';
    }
  }
  files.push_back(fig5_path);

  const std::string fig6_path = join_path(out_dir, "fig6_scatter.csv");
  {
    auto out = open_out(fig6_path);
    out << "strategy,baseline_pct,robust_pct\n";
    for (const auto& r : rows) {
      out << r.strategy << ',' << format_double(r.baseline_pct) << ',' << format_double(r.robust_pct)
          << '\n';
    }
  }
  files.push_back(fig6_path);

  for (const auto& [name, rounds] : round_logs) {
    const std::string path = join_path(out_dir, "rounds_" + name + ".csv");
    write_round_logs_csv(path, rounds);
    files.push_back(path);
  }
  return files;
}

std::vector<ResultsRow> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty results file");
  std::vector<ResultsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    ResultsRow r;
    std::string cell;
    std::getline(ss, r.strategy, ',');
    std::getline(ss, r.data_policy, ',');
    std::getline(ss, r.model_variant, ',');
    std::getline(ss, cell, ',');
    r.baseline_pct = parse_double(cell);
    std::getline(ss, cell, ',');
    r.robust_pct = parse_double(cell);
    std::getline(ss, cell, ',');
    r.combined_pct = parse_double(cell);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string render_results_table(std::span<const ResultsRow> rows) {
  std::ostringstream out;
  out << "Strategy             Data      Model      Baseline(%)  Robust(%)  Combined(%)\n";
  out << "-------------------- --------- ---------- -----------  ---------  -----------\n";
  for (const auto& r : rows) {
    std::string display = r.strategy;
    for (const auto& info : kStrategies) {
      if (display == info.name) display = info.display_name;
    }
    char line[160];
    if (r.ok()) {
      std::snprintf(line, sizeof(line), "%-20s %-9s %-10s %11s  %9s  %11s\n", display.c_str(),
                    r.data_policy.c_str(), r.model_variant.c_str(), two_decimals(r.baseline_pct).c_str(),
                    two_decimals(r.robust_pct).c_str(), two_decimals(r.combined_pct).c_str());
    } else {
      std::snprintf(line, sizeof(line), "%-20s %-9s %-10s FAILED: %s\n", display.c_str(),
                    r.data_policy.c_str(), r.model_variant.c_str(), r.error.c_str());
    }
    out << line;
  }
  return out.str();
}

}  // namespace opdef
