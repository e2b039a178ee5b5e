#pragma once

// The five-strategy comparison: dataset policies, per-strategy runs under the
// shared simulation budget, evaluation on a common test set, and report
// emission (results table plus bar-chart and scatter plot data).

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "opdef/active_learning.hpp"
#include "opdef/io.hpp"

namespace opdef {

enum class Strategy { kBaseline, kBalanced, kDenoiseOnly, kActiveLearning, kAlDenoise };

struct StrategyInfo {
  Strategy strategy;
  const char* name;          // stable id used in files and the CLI
  const char* display_name;  // table heading
  const char* data_policy;   // smooth | mixed | adaptive
  const char* model_variant; // standard | denoising
  bool adaptive;
  bool denoiser;
};

std::span<const StrategyInfo> strategy_table();
const StrategyInfo& strategy_info(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct ExperimentConfig {
  std::vector<Strategy> strategies;  // defaults to all five
  std::uint64_t seed = 1;
  SolverConfig solver;
  int budget = 600;
  int test_size = 32;
  DeepOnetConfig model;              // dims shared by both variants
  ActiveLearningConfig al;           // loop settings for the adaptive strategies
  AttackConfig final_eval;           // evaluation attack shared by all strategies
  TrainConfig upfront_train;         // training for the non-adaptive strategies
  std::string out_dir = "opdef-out";
  int seed_repeats = 1;

  void validate() const;
};

ExperimentConfig default_experiment_config(std::uint64_t seed);

/// Reads every recognized key from a flat key-value document (unknown keys
/// are rejected) and writes the full key set back out.
ExperimentConfig config_from_kv(const KvConfig& kv);
KvConfig kv_from_config(const ExperimentConfig& cfg);

struct ResultsRow {
  std::string strategy;
  std::string data_policy;
  std::string model_variant;
  double baseline_pct = 0.0;
  double robust_pct = 0.0;
  double combined_pct = 0.0;
  int training_sims = 0;
  long long eval_sims = 0;
  std::string error;  // nonempty when the strategy failed

  bool ok() const { return error.empty(); }
};

/// Upfront dataset for the non-adaptive strategies: all-smooth for
/// baseline/denoise-only, 60% uniformly perturbed / 40% smooth for balanced.
/// Adaptive strategies build their data inside the loop and are rejected.
std::vector<LabeledSample> build_strategy_dataset(Strategy s, int budget,
                                                  const BurgersSolver& solver,
                                                  std::uint64_t seed);

struct StrategyOutcome {
  ResultsRow row;
  std::vector<RoundLog> rounds;  // adaptive strategies only
  EvalOutcome eval;
  std::optional<DeepOnetModel> model;
};

StrategyOutcome run_strategy(Strategy s, const ExperimentConfig& cfg, const BurgersSolver& solver,
                             std::span<const Field> test_set);

struct ExperimentResult {
  std::vector<ResultsRow> rows;
  std::map<std::string, std::vector<RoundLog>> round_logs;
  std::vector<std::string> files;  // manifest of everything written
};

/// Runs every requested strategy against the shared test set and attack
/// seeds, writes all report files under cfg.out_dir, and returns the rows
/// plus the file manifest. A failing strategy yields a row with its error
/// recorded; the others still run.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Writes results.csv, fig5_bars.csv, fig6_scatter.csv and one round-log CSV
/// per adaptive strategy. Returns the written paths.
std::vector<std::string> emit_report(std::span<const ResultsRow> rows,
                                     const std::map<std::string, std::vector<RoundLog>>& round_logs,
                                     const std::string& out_dir);

std::vector<ResultsRow> read_results_csv(const std::string& path);

/// Two-decimal console rendering of the results table.
std::string render_results_table(std::span<const ResultsRow> rows);

}  // namespace opdef
