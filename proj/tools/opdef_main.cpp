// Command-line surface: one-off solves, dataset generation, training,
// attacks, the active-learning loop, the full strategy comparison, and
// report re-rendering. Configuration comes from a flat key-value file plus
// a few overriding flags; everything is seed-deterministic.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "opdef/experiment.hpp"
#include "opdef/io.hpp"

namespace {

using namespace opdef;

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
};

ExperimentConfig load_config(const GlobalArgs& g) {
  KvConfig kv = g.config_path.empty() ? KvConfig{} : KvConfig::load(g.config_path);
  if (g.seed_set) kv.set("seed", std::to_string(g.seed));
  ExperimentConfig cfg = config_from_kv(kv);
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  if (g.threads > 0) set_worker_count(g.threads);
  return cfg;
}

int cmd_simulate(const ExperimentConfig& cfg, const std::string& ic_path, std::string out_path) {
  const BurgersSolver solver(cfg.solver);
  const Field u0 = read_field_csv(ic_path);
  const Field u_final = solver.solve(u0);
  if (out_path.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    out_path = join_path(cfg.out_dir, "solution.csv");
  }
  write_field_csv(out_path, u_final);
  std::printf("solved %s -> %s (mean %.6g, l2 %.6g)\n", ic_path.c_str(), out_path.c_str(),
              field_mean(u_final), l2_norm(u_final));
  return 0;
}

int cmd_gen_data(const ExperimentConfig& cfg, const std::string& strategy_name, int budget,
                 std::string out_path) {
  const Strategy s = strategy_from_name(strategy_name);
  const BurgersSolver solver(cfg.solver);
  const auto data = build_strategy_dataset(s, budget > 0 ? budget : cfg.budget, solver,
                                           derive_seed(derive_seed(cfg.seed, strategy_name), "data"));
  if (out_path.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    out_path = join_path(cfg.out_dir, "dataset_" + strategy_name + ".csv");
  }
  write_dataset_csv(out_path, data);
  std::printf("wrote %zu samples to %s\n", data.size(), out_path.c_str());
  return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& data_path, const std::string& variant,
              int epochs, std::string out_path) {
  const auto data = read_dataset_csv(data_path);
  if (data.empty()) throw UsageError("dataset is empty");

  DeepOnetConfig model_cfg = cfg.model;
  model_cfg.n_sensors = static_cast<int>(data.front().input.size());
  if (variant == "denoising") model_cfg.has_denoiser = true;
  else if (variant == "standard") model_cfg.has_denoiser = false;
  else throw UsageError("variant must be standard or denoising");

  DeepOnetModel model(model_cfg, derive_seed(cfg.seed, "cli-train-init"));
  TrainConfig tc = cfg.upfront_train;
  tc.seed = derive_seed(cfg.seed, "cli-train");
  if (epochs > 0) tc.epochs = epochs;
  const auto result = train(model, to_train_samples(data), tc);

  if (out_path.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    out_path = join_path(cfg.out_dir, "model_" + variant + ".ckpt");
  }
  save_checkpoint(model, out_path);
  std::printf("trained %s model on %zu samples for %d epochs; final mse %.6g; checkpoint %s\n",
              variant.c_str(), data.size(), tc.epochs, result.epoch_mse.back(), out_path.c_str());
  return 0;
}

int cmd_attack(const ExperimentConfig& cfg, const std::string& model_path, const std::string& ic_path,
               int iterations, std::string out_prefix) {
  const auto model = load_checkpoint(model_path);
  const Field u0 = read_field_csv(ic_path);
  const BurgersSolver solver(cfg.solver);

  AttackConfig atk = cfg.final_eval;
  atk.seed = derive_seed(cfg.seed, "cli-attack");
  if (iterations > 0) atk.iterations = iterations;

  const FrozenDeepOnet frozen(model);
  const auto result = de_attack([&frozen](const Field& u) { return frozen.predict(u); }, u0, atk, solver);

  if (out_prefix.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    out_prefix = join_path(cfg.out_dir, "attack");
  }
  {
    std::ofstream out(out_prefix + ".csv");
    if (!out) throw IoError("cannot write " + out_prefix + ".csv");
    out << "sample,center,magnitude,best_error,evaluations\n";
    out << "0," << result.best.center_index << ',' << format_double(result.best.magnitude) << ','
        << format_double(result.best_error) << ',' << result.evaluations << '\n';
  }
  {
    std::ofstream out(out_prefix + "_history.csv");
    if (!out) throw IoError("cannot write " + out_prefix + "_history.csv");
    out << "generation,best_error\n";
    for (std::size_t gen = 0; gen < result.history.size(); ++gen) {
      out << (gen + 1) << ',' << format_double(result.history[gen]) << '\n';
    }
  }
  std::printf("best bump: center %d magnitude %.6g -> relative error %.6g (%lld objective calls)\n",
              result.best.center_index, result.best.magnitude, result.best_error, result.evaluations);
  return 0;
}

int cmd_al_run(const ExperimentConfig& cfg, const std::string& variant) {
  DeepOnetConfig model_cfg = cfg.model;
  if (variant == "denoising") model_cfg.has_denoiser = true;
  else if (variant == "standard") model_cfg.has_denoiser = false;
  else throw UsageError("variant must be standard or denoising");

  const BurgersSolver solver(cfg.solver);
  ActiveLearningConfig al = cfg.al;
  al.budget = cfg.budget;
  const auto run = run_active_learning(model_cfg, al, solver);

  std::filesystem::create_directories(cfg.out_dir);
  const std::string rounds_path = join_path(cfg.out_dir, "al_rounds_" + variant + ".csv");
  write_round_logs_csv(rounds_path, run.rounds);
  const std::string ckpt_path = join_path(cfg.out_dir, "al_model_" + variant + ".ckpt");
  save_checkpoint(run.model, ckpt_path);
  const std::string data_path = join_path(cfg.out_dir, "al_dataset_" + variant + ".csv");
  write_dataset_csv(data_path, run.dataset);

  if (!run.abort_reason.empty()) {
    std::fprintf(stderr, "active learning aborted: %s\n", run.abort_reason.c_str());
    return 1;
  }
  std::printf("active learning: %zu rounds, %d training sims, %lld eval solves\n",
              run.rounds.size(), run.ledger.training_sims_used, run.ledger.eval_sims_used);
  std::printf("wrote %s, %s, %s\n", rounds_path.c_str(), ckpt_path.c_str(), data_path.c_str());
  return 0;
}

int cmd_experiment(ExperimentConfig cfg, const std::string& strategies_csv) {
  if (!strategies_csv.empty()) {
    cfg.strategies.clear();
    std::stringstream ss(strategies_csv);
    std::string name;
    while (std::getline(ss, name, ',')) cfg.strategies.push_back(strategy_from_name(name));
  }

  if (cfg.seed_repeats == 1) {
    const auto result = run_experiment(cfg);
    std::fputs(render_results_table(result.rows).c_str(), stdout);
    std::printf("report files under %s\n", cfg.out_dir.c_str());
    for (const auto& row : result.rows) {
      if (!row.ok()) return 1;
    }
    return 0;
  }

  // multi-seed runs: one subdirectory per seed plus a mean/min/max summary
  std::map<std::string, std::vector<ResultsRow>> by_strategy;
  const std::string root = cfg.out_dir;
  bool all_ok = true;
  for (int r = 0; r < cfg.seed_repeats; ++r) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(r);
    KvConfig kv = kv_from_config(cfg);
    kv.set("seed", std::to_string(seed));
    kv.set("seeds", "1");
    ExperimentConfig per_seed = config_from_kv(kv);
    per_seed.out_dir = join_path(root, "seed_" + std::to_string(seed));
    const auto result = run_experiment(per_seed);
    std::printf("== seed %llu ==\n", static_cast<unsigned long long>(seed));
    std::fputs(render_results_table(result.rows).c_str(), stdout);
    for (const auto& row : result.rows) {
      all_ok = all_ok && row.ok();
      if (row.ok()) by_strategy[row.strategy].push_back(row);
    }
  }

  std::filesystem::create_directories(root);
  const std::string summary_path = join_path(root, "results_summary.csv");
  std::ofstream out(summary_path);
  if (!out) throw IoError("cannot write " + summary_path);
  out << "strategy,metric,mean,min,max\n";
  for (const auto& [name, rows] : by_strategy) {
    const auto emit = [&](const char* metric, auto getter) {
      double sum = 0.0, lo = 1e300, hi = -1e300;
      for (const auto& row : rows) {
        const double v = getter(row);
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      out << name << ',' << metric << ',' << format_double(sum / static_cast<double>(rows.size()))
          << ',' << format_double(lo) << ',' << format_double(hi) << '\n';
    };
    emit("baseline_pct", [](const ResultsRow& r) { return r.baseline_pct; });
    emit("robust_pct", [](const ResultsRow& r) { return r.robust_pct; });
    emit("combined_pct", [](const ResultsRow& r) { return r.combined_pct; });
  }
  std::printf("summary written to %s\n", summary_path.c_str());
  return all_ok ? 0 : 1;
}

int cmd_report(const ExperimentConfig& cfg, const std::string& results_path) {
  const auto rows = read_results_csv(results_path);
  const auto files = emit_report(rows, {}, cfg.out_dir);
  std::fputs(render_results_table(rows).c_str(), stdout);
  for (const auto& f : files) std::printf("wrote %s\n", f.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial-robustness workbench for Burgers neural-operator surrogates"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "flat key-value config file");
  auto* seed_opt = app.add_option("--seed", g.seed, "master seed override");
  app.add_option("--out-dir", g.out_dir, "output directory override");
  app.add_option("--threads", g.threads, "worker thread count");

  auto* simulate = app.add_subcommand("simulate", "solve one initial condition from a field CSV");
  std::string ic_path, out_path;
  simulate->add_option("--ic", ic_path, "input field CSV")->required();
  simulate->add_option("--out", out_path, "output field CSV");

  auto* gen = app.add_subcommand("gen-data", "generate a labeled dataset for a non-adaptive strategy");
  std::string gen_strategy = "baseline", gen_out;
  int gen_budget = 0;
  gen->add_option("--strategy", gen_strategy, "baseline|balanced|denoise-only");
  gen->add_option("--budget", gen_budget, "simulation budget (default: config budget)");
  gen->add_option("--out", gen_out, "output dataset CSV");

  auto* tr = app.add_subcommand("train", "train a model on a dataset CSV");
  std::string train_data, train_variant = "standard", train_out;
  int train_epochs = 0;
  tr->add_option("--data", train_data, "dataset CSV")->required();
  tr->add_option("--variant", train_variant, "standard|denoising");
  tr->add_option("--epochs", train_epochs, "override epoch count");
  tr->add_option("--out", train_out, "checkpoint path");

  auto* atk = app.add_subcommand("attack", "run the DE attack against a checkpoint");
  std::string atk_model, atk_ic, atk_prefix;
  int atk_iters = 0;
  atk->add_option("--model", atk_model, "model checkpoint")->required();
  atk->add_option("--ic", atk_ic, "input field CSV")->required();
  atk->add_option("--iterations", atk_iters, "DE generations");
  atk->add_option("--out-prefix", atk_prefix, "output file prefix");

  auto* al = app.add_subcommand("al-run", "run the active-learning loop");
  std::string al_variant = "standard";
  al->add_option("--variant", al_variant, "standard|denoising");

  auto* exp = app.add_subcommand("experiment", "run the full strategy comparison");
  std::string exp_strategies;
  exp->add_option("--strategies", exp_strategies, "comma-separated strategy subset");

  auto* rep = app.add_subcommand("report", "re-render report CSVs from a results.csv");
  std::string rep_results;
  rep->add_option("--results", rep_results, "results.csv path")->required();

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;

  try {
    const ExperimentConfig cfg = load_config(g);
    if (simulate->parsed()) return cmd_simulate(cfg, ic_path, out_path);
    if (gen->parsed()) return cmd_gen_data(cfg, gen_strategy, gen_budget, gen_out);
    if (tr->parsed()) return cmd_train(cfg, train_data, train_variant, train_epochs, train_out);
    if (atk->parsed()) return cmd_attack(cfg, atk_model, atk_ic, atk_iters, atk_prefix);
    if (al->parsed()) return cmd_al_run(cfg, al_variant);
    if (exp->parsed()) return cmd_experiment(cfg, exp_strategies);
    if (rep->parsed()) return cmd_report(cfg, rep_results);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
