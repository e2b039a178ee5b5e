#pragma once

// Minimal dense-network engine: layer stacks with exact reverse-mode
// gradients, Adam with cosine-annealed learning rate, and a seeded
// minibatch training loop. No frameworks; flat parameter storage.

#include <cstdint>
#include <span>
#include <vector>

#include "opdef/common.hpp"

namespace opdef {

enum class Activation { kTanh, kIdentity };

struct LayerSpec {
  int in_dim = 0;
  int out_dim = 0;
  Activation activation = Activation::kTanh;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().out_dim; }
  std::size_t param_count() const;
  void validate() const;  // dims >= 1 and consecutive layers chain
};

/// Stack of dense layers: tanh on all but the last, which stays linear.
NetworkSpec dense_stack(int in_dim, const std::vector<int>& widths);

/// Glorot-uniform weights with bound sqrt(6/(in+out)), zero biases.
/// Parameter layout per layer: row-major weights (out x in), then biases.
void init_glorot(const NetworkSpec& spec, std::span<double> params, Rng& rng);
std::vector<double> init_params(const NetworkSpec& spec, std::uint64_t seed);

/// Post-activation values cached by forward for the backward pass.
/// act[0] is the input; act[l] is layer l's output.
struct MlpTape {
  std::vector<std::vector<double>> act;
};

void mlp_forward(const NetworkSpec& spec, std::span<const double> params,
                 std::span<const double> input, std::span<double> output,
                 MlpTape* tape = nullptr);

/// Reverse pass: accumulates d(loss)/d(params) into param_grad given
/// d(loss)/d(output), and optionally propagates d(loss)/d(input).
void mlp_backward(const NetworkSpec& spec, std::span<const double> params,
                  const MlpTape& tape, std::span<const double> output_grad,
                  std::span<double> param_grad, std::span<double> input_grad = {});

struct TrainSample {
  std::vector<double> input;
  std::vector<double> target;
};

struct TrainConfig {
  double lr0 = 1e-3;
  double lr_min = 1e-5;
  int epochs = 1;
  int batch_size = 64;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// lr(e) = lr_min + 0.5 (lr0 - lr_min)(1 + cos(pi e / epochs)).
double cosine_lr(int epoch, const TrainConfig& cfg);

struct AdamState {
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
  std::vector<double> m, v;
  long long step = 0;
};

/// One bias-corrected Adam update; increments state.step.
void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state,
               double lr, const TrainConfig& cfg);

/// Anything the training loop can optimize: flat parameters plus exact batch
/// gradients of the MSE over every output of every sample in the batch.
class DifferentiableModel {
 public:
  virtual ~DifferentiableModel() = default;

  virtual std::size_t param_count() const = 0;
  virtual std::span<double> params() = 0;
  virtual std::span<const double> params() const = 0;

  /// Accumulates d(mse)/d(params) into grad (caller zeroes it) and returns
  /// the batch MSE, averaged over samples x output entries.
  virtual double loss_and_grad(std::span<const TrainSample> data,
                               std::span<const std::size_t> batch,
                               std::span<double> grad) const = 0;
};

struct TrainResult {
  std::vector<double> epoch_mse;  // mean training MSE per epoch
};

/// Seeded-shuffle minibatch Adam under the cosine schedule. Deterministic per
/// (seed, data, initial parameters). Throws TrainingDivergenceError with the
/// epoch index if the loss becomes non-finite.
TrainResult train(DifferentiableModel& model, std::span<const TrainSample> data,
                  const TrainConfig& cfg);

/// Plain MLP wrapper, mainly exercised by tests and gradient checks.
class MlpModel : public DifferentiableModel {
 public:
  MlpModel(NetworkSpec spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }
  std::size_t param_count() const override { return params_.size(); }
  std::span<double> params() override { return params_; }
  std::span<const double> params() const override { return params_; }

  std::vector<double> forward(std::span<const double> input) const;

  double loss_and_grad(std::span<const TrainSample> data,
                       std::span<const std::size_t> batch,
                       std::span<double> grad) const override;

 private:
  NetworkSpec spec_;
  std::vector<double> params_;
};

}  // namespace opdef
