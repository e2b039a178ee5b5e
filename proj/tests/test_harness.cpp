#include "opdef/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "opdef/io.hpp"

using namespace opdef;

namespace {

SolverConfig tiny_solver_config() {
  SolverConfig cfg;
  cfg.grid = make_grid(16);
  cfg.n_steps = 40;
  return cfg;
}

ExperimentConfig tiny_experiment(std::uint64_t seed, const std::string& out_dir) {
  ExperimentConfig cfg = default_experiment_config(seed);
  cfg.solver = tiny_solver_config();
  cfg.budget = 10;
  cfg.test_size = 8;
  cfg.out_dir = out_dir;

  cfg.model.n_sensors = 16;
  cfg.model.branch_hidden = 10;
  cfg.model.trunk_hidden = 10;
  cfg.model.latent_dim = 6;
  cfg.model.depth = 2;
  cfg.model.bottleneck_dim = 4;

  cfg.al.bootstrap_size = 4;
  cfg.al.per_round = 3;
  cfg.al.validation_size = 2;
  cfg.al.probe.iterations = 2;
  cfg.al.probe.population = 4;
  cfg.al.eval.iterations = 2;
  cfg.al.eval.population = 4;
  cfg.al.initial_train.epochs = 3;
  cfg.al.initial_train.batch_size = 8;
  cfg.al.update_train.epochs = 2;
  cfg.al.update_train.batch_size = 8;

  cfg.final_eval.iterations = 2;
  cfg.final_eval.population = 4;
  cfg.upfront_train.epochs = 3;
  cfg.upfront_train.batch_size = 8;
  return cfg;
}

std::string temp_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("opdef_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("build_strategy_dataset: policies, labels, determinism") {
  BurgersSolver solver(tiny_solver_config());

  const auto smooth = build_strategy_dataset(Strategy::kBaseline, 12, solver, 5);
  CHECK(smooth.size() == 12);
  for (const auto& s : smooth) {
    CHECK(s.provenance == Provenance::kSmooth);
    CHECK(!s.perturbation.has_value());
    CHECK(solver.solve(s.input) == s.label);
  }

  const auto mixed = build_strategy_dataset(Strategy::kBalanced, 20, solver, 6);
  CHECK(mixed.size() == 20);
  int perturbed = 0, plain = 0;
  for (const auto& s : mixed) {
    if (s.provenance == Provenance::kBalancedPerturbed) {
      ++perturbed;
      REQUIRE(s.perturbation.has_value());
      CHECK(std::abs(s.perturbation->magnitude) <= kMagnitudeBound);
      CHECK(s.perturbation->center_index >= 0);
      CHECK(s.perturbation->center_index < 16);
    } else {
      ++plain;
    }
    CHECK(solver.solve(s.input) == s.label);
  }
  CHECK(perturbed == 12);  // 60% of 20
  CHECK(plain == 8);

  const auto again = build_strategy_dataset(Strategy::kBalanced, 20, solver, 6);
  for (std::size_t i = 0; i < again.size(); ++i) CHECK(again[i].input == mixed[i].input);

  CHECK_THROWS_AS(build_strategy_dataset(Strategy::kActiveLearning, 10, solver, 1), UsageError);
  CHECK_THROWS_AS(build_strategy_dataset(Strategy::kAlDenoise, 10, solver, 1), UsageError);
}

TEST_CASE("key-value config parsing and unknown-key rejection") {
  const auto kv = KvConfig::parse(
      "# solver\n"
      "n_x = 16\n"
      "nu = 0.1\n"
      "T = 1.0\n"
      "n_steps = 40   # comment after the value\n"
      "seed = 9\n"
      "strategies = baseline, balanced\n"
      "warm_start = false\n");
  CHECK(kv.get_int("n_x", 0) == 16);
  CHECK(kv.get_double("nu", 0) == 0.1);
  CHECK(kv.get_bool("warm_start", true) == false);
  CHECK(kv.get_string("missing", "dflt") == "dflt");

  ExperimentConfig cfg = default_experiment_config(1);
  cfg.model.n_sensors = 16;
  cfg.model.bottleneck_dim = 4;

  auto parsed = config_from_kv(kv);
  CHECK(parsed.solver.grid.n_x == 16);
  CHECK(parsed.seed == 9);
  CHECK(parsed.strategies.size() == 2);
  CHECK(parsed.strategies[0] == Strategy::kBaseline);
  CHECK(parsed.strategies[1] == Strategy::kBalanced);
  CHECK(parsed.al.warm_start == false);
  CHECK(parsed.model.n_sensors == 16);

  CHECK_THROWS_AS(KvConfig::parse("key_without_value\n"), ConfigError);
  CHECK_THROWS_AS(config_from_kv(KvConfig::parse("bogus_key = 3\n")), ConfigError);

  // full round trip through the serialized form
  const auto echoed = config_from_kv(KvConfig::parse(kv_from_config(parsed).serialize()));
  CHECK(echoed.seed == parsed.seed);
  CHECK(echoed.budget == parsed.budget);
  CHECK(echoed.al.alpha0 == parsed.al.alpha0);
  CHECK(echoed.strategies == parsed.strategies);
}

TEST_CASE("field and dataset CSV round-trips are bit-exact") {
  const auto dir = temp_dir("io");
  Rng rng(3);
  Field f(16);
  for (auto& v : f) v = rng.uniform(-1.0, 1.0) * std::pow(10.0, rng.index(7) - 3);
  f[0] = 1.0 / 3.0;
  f[1] = -2.2250738585072014e-308;  // smallest normal
  const auto field_path = dir + "/field.csv";
  write_field_csv(field_path, f);
  CHECK(read_field_csv(field_path) == f);

  BurgersSolver solver(tiny_solver_config());
  const auto data = build_strategy_dataset(Strategy::kBalanced, 6, solver, 8);
  const auto ds_path = dir + "/dataset.csv";
  write_dataset_csv(ds_path, data);
  const auto loaded = read_dataset_csv(ds_path);
  REQUIRE(loaded.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(loaded[i].input == data[i].input);
    CHECK(loaded[i].label == data[i].label);
    CHECK(loaded[i].provenance == data[i].provenance);
    CHECK(loaded[i].perturbation.has_value() == data[i].perturbation.has_value());
    if (data[i].perturbation) {
      CHECK(loaded[i].perturbation->center_index == data[i].perturbation->center_index);
      CHECK(loaded[i].perturbation->magnitude == data[i].perturbation->magnitude);
    }
  }
}

TEST_CASE("checkpoint save/load round-trips bit-exactly") {
  const auto dir = temp_dir("ckpt");
  DeepOnetConfig cfg;
  cfg.n_sensors = 16;
  cfg.branch_hidden = 10;
  cfg.trunk_hidden = 10;
  cfg.latent_dim = 6;
  cfg.depth = 2;
  cfg.has_denoiser = true;
  cfg.bottleneck_dim = 4;

  DeepOnetModel model(cfg, 77);
  model.params()[model.layout().blend] = 0.3121;
  const auto path = dir + "/model.ckpt";
  save_checkpoint(model, path);
  const auto loaded = load_checkpoint(path);

  CHECK(loaded.config().has_denoiser);
  CHECK(loaded.config().n_sensors == 16);
  CHECK(loaded.param_count() == model.param_count());
  CHECK(std::vector<double>(loaded.params().begin(), loaded.params().end()) ==
        std::vector<double>(model.params().begin(), model.params().end()));

  Field u0(16, 0.1);
  CHECK(loaded.predict(u0) == model.predict(u0));

  CHECK_THROWS_AS(load_checkpoint(dir + "/missing.ckpt"), IoError);
}

TEST_CASE("emit_report writes the schema'd files exactly once") {
  const auto dir = temp_dir("report");
  std::vector<ResultsRow> rows;
  for (const auto& info : strategy_table()) {
    ResultsRow r;
    r.strategy = info.name;
    r.data_policy = info.data_policy;
    r.model_variant = info.model_variant;
    r.baseline_pct = 1.0 + static_cast<double>(rows.size());
    r.robust_pct = 2.0 + static_cast<double>(rows.size());
    r.combined_pct = r.baseline_pct + r.robust_pct;
    rows.push_back(r);
  }
  std::map<std::string, std::vector<RoundLog>> logs;
  logs["active-learning"] = {{1, 0.1, 0.2, 0.4, 70, 70, 12, 0.25, 0.3}};

  const auto files = emit_report(rows, logs, dir);
  std::set<std::string> unique(files.begin(), files.end());
  CHECK(unique.size() == files.size());
  for (const auto& f : files) CHECK(std::filesystem::exists(f));

  const auto results_text = slurp(dir + "/results.csv");
  CHECK(results_text.find("strategy,data_policy,model_variant,baseline_pct,robust_pct,combined_pct") == 0);
  int lines = 0;
  for (char c : results_text) lines += c == '\n' ? 1 : 0;
  CHECK(lines == 6);  // header + five rows

  const auto fig6 = slurp(dir + "/fig6_scatter.csv");
  CHECK(fig6.find("strategy,baseline_pct,robust_pct") == 0);
  CHECK(std::filesystem::exists(dir + "/rounds_active-learning.csv"));

  const auto parsed = read_results_csv(dir + "/results.csv");
  REQUIRE(parsed.size() == 5);
  CHECK(parsed[0].strategy == "baseline");
  CHECK(parsed[0].baseline_pct == 1.0);

  CHECK_THROWS_AS(emit_report({}, logs, dir), UsageError);
}

TEST_CASE("tiny end-to-end experiment: five rows, additivity, bit-identical reruns") {
  const auto dir_a = temp_dir("exp_a");
  const auto dir_b = temp_dir("exp_b");

  auto cfg = tiny_experiment(5, dir_a);
  const auto result = run_experiment(cfg);
  REQUIRE(result.rows.size() == 5);
  for (const auto& row : result.rows) {
    INFO("strategy ", row.strategy, " error: ", row.error);
    CHECK(row.ok());
    CHECK(row.training_sims == cfg.budget);
    CHECK(row.combined_pct == doctest::Approx(row.baseline_pct + row.robust_pct).epsilon(1e-12));
    CHECK(row.eval_sims > 0);
  }
  CHECK(result.round_logs.count("active-learning") == 1);
  CHECK(result.round_logs.count("al-denoise") == 1);
  CHECK(result.round_logs.at("active-learning").size() == 2);  // 4 + 3 + 3 = 10
  for (const auto& f : result.files) CHECK(std::filesystem::exists(f));

  cfg.out_dir = dir_b;
  const auto rerun = run_experiment(cfg);
  CHECK(slurp(dir_a + "/results.csv") == slurp(dir_b + "/results.csv"));
  CHECK(slurp(dir_a + "/eval_samples.csv") == slurp(dir_b + "/eval_samples.csv"));
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    CHECK(result.rows[i].baseline_pct == rerun.rows[i].baseline_pct);
    CHECK(result.rows[i].robust_pct == rerun.rows[i].robust_pct);
  }

  // the rendered table shows two-decimal percentages
  const auto table = render_results_table(result.rows);
  CHECK(table.find("AL + Denoising") != std::string::npos);
}
