#pragma once

// DeepONet assembly on top of the dense-network kernel: branch/trunk inner
// product plus output bias, and the input-denoising variant that prepends a
// learnable bottleneck autoencoder with a sigmoid-gated residual blend.

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "opdef/nn.hpp"
#include "opdef/physics.hpp"

namespace opdef {

struct DeepOnetConfig {
  int n_sensors = 64;
  int branch_hidden = 128;
  int trunk_hidden = 128;
  int latent_dim = 128;
  int depth = 3;  // weight layers per subnetwork; hidden layers use tanh, the last is linear
  bool has_denoiser = false;
  int bottleneck_dim = 32;

  void validate() const;
  NetworkSpec branch_spec() const;
  NetworkSpec trunk_spec() const;
  NetworkSpec encoder_spec() const;  // n_sensors -> bottleneck, tanh
  NetworkSpec decoder_spec() const;  // bottleneck -> n_sensors, linear
};

/// Flat offsets of the model's parameter segments:
/// [branch | trunk | output bias | encoder | decoder | blend logit].
/// Denoiser segments exist only when the variant has one.
struct ParamLayout {
  std::size_t branch = 0, trunk = 0, bias = 0;
  std::size_t encoder = 0, decoder = 0, blend = 0;
  std::size_t total = 0;
  bool has_denoiser = false;
};
ParamLayout make_layout(const DeepOnetConfig& cfg);

class DeepOnetModel : public DifferentiableModel {
 public:
  DeepOnetModel(DeepOnetConfig cfg, std::uint64_t seed);
  DeepOnetModel(DeepOnetConfig cfg, std::vector<double> params);
  DeepOnetModel(DeepOnetModel&&) noexcept;
  DeepOnetModel& operator=(DeepOnetModel&&) noexcept;
  ~DeepOnetModel() override;

  const DeepOnetConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }
  const std::vector<double>& grid_queries() const { return queries_; }

  std::size_t param_count() const override { return params_.size(); }
  std::span<double> params() override { return params_; }
  std::span<const double> params() const override { return params_; }

  double output_bias() const { return params_[layout_.bias]; }
  double blend_logit() const;           // omega; VariantError on the standard model
  double blend_weight() const;          // sigmoid(omega)

  /// Denoiser pass (Eq-style blend): w D(u0) + (1-w) u0.
  Field denoise(const Field& u0) const;

  /// Branch embedding of the (possibly denoised) input; latent_dim entries.
  std::vector<double> branch_embedding(const Field& u0) const;

  /// Trunk embedding of one query coordinate; latent_dim entries.
  std::vector<double> trunk_embedding(double x) const;

  /// Operator evaluation at arbitrary query coordinates in [0, 2pi).
  std::vector<double> forward(const Field& u0, std::span<const double> queries) const;

  /// Evaluation at every sensor grid point.
  Field predict(const Field& u0) const;

  double loss_and_grad(std::span<const TrainSample> data,
                       std::span<const std::size_t> batch,
                       std::span<double> grad) const override;

 private:
  struct Scratch;
  void denoise_into(const Field& u0, std::vector<double>& out, MlpTape* enc_tape,
                    MlpTape* dec_tape, std::vector<double>* decoded) const;

  DeepOnetConfig cfg_;
  NetworkSpec branch_spec_, trunk_spec_, enc_spec_, dec_spec_;
  ParamLayout layout_;
  std::vector<double> params_;
  std::vector<double> queries_;  // sensor grid coordinates
  std::unique_ptr<Scratch> scratch_;  // reused by loss_and_grad; single-writer training
};

DeepOnetModel build_model(const DeepOnetConfig& cfg, std::uint64_t seed);

/// Immutable inference snapshot: copies the parameters and precomputes trunk
/// outputs at the grid queries. Safe to share across threads and unaffected
/// by later training of the source model.
class FrozenDeepOnet {
 public:
  explicit FrozenDeepOnet(const DeepOnetModel& model);
  Field predict(const Field& u0) const;

 private:
  DeepOnetConfig cfg_;
  NetworkSpec branch_spec_, enc_spec_, dec_spec_;
  ParamLayout layout_;
  std::vector<double> params_;
  std::vector<double> trunk_at_grid_;  // n_sensors x latent_dim
};

}  // namespace opdef
