#include "opdef/deeponet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace opdef {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> sensor_grid(int n) {
  std::vector<double> q(static_cast<std::size_t>(n));
  const double h = 2.0 * std::numbers::pi / n;
  for (int j = 0; j < n; ++j) q[static_cast<std::size_t>(j)] = h * j;
  return q;
}

constexpr int kGradChunks = 8;

}  // namespace

void DeepOnetConfig::validate() const {
  if (n_sensors < 1 || branch_hidden < 1 || trunk_hidden < 1 || latent_dim < 1 || depth < 1) {
    throw ConfigError("deeponet dims must be >= 1");
  }
  if (has_denoiser && !(bottleneck_dim >= 1 && bottleneck_dim < n_sensors)) {
    throw ConfigError("denoiser bottleneck must satisfy 1 <= d < n_sensors");
  }
}

NetworkSpec DeepOnetConfig::branch_spec() const {
  std::vector<int> widths(static_cast<std::size_t>(depth - 1), branch_hidden);
  widths.push_back(latent_dim);
  return dense_stack(n_sensors, widths);
}

NetworkSpec DeepOnetConfig::trunk_spec() const {
  std::vector<int> widths(static_cast<std::size_t>(depth - 1), trunk_hidden);
  widths.push_back(latent_dim);
  return dense_stack(1, widths);
}

NetworkSpec DeepOnetConfig::encoder_spec() const {
  return NetworkSpec{{{n_sensors, bottleneck_dim, Activation::kTanh}}};
}

NetworkSpec DeepOnetConfig::decoder_spec() const {
  return NetworkSpec{{{bottleneck_dim, n_sensors, Activation::kIdentity}}};
}

ParamLayout make_layout(const DeepOnetConfig& cfg) {
  cfg.validate();
  ParamLayout lay;
  lay.has_denoiser = cfg.has_denoiser;
  lay.branch = 0;
  lay.trunk = cfg.branch_spec().param_count();
  lay.bias = lay.trunk + cfg.trunk_spec().param_count();
  lay.total = lay.bias + 1;
  if (cfg.has_denoiser) {
    lay.encoder = lay.total;
    lay.decoder = lay.encoder + cfg.encoder_spec().param_count();
    lay.blend = lay.decoder + cfg.decoder_spec().param_count();
    lay.total = lay.blend + 1;
  }
  return lay;
}

struct DeepOnetModel::Scratch {
  // trunk evaluations at the grid queries, shared by each loss call
  std::vector<MlpTape> trunk_tapes;
  std::vector<double> trunk_out;  // n_q x p

  struct Chunk {
    std::vector<double> grad;       // full layout, only non-trunk segments touched
    std::vector<double> trunk_acc;  // n_q x p accumulated output gradients
    double sse = 0.0;
    MlpTape branch_tape, enc_tape, dec_tape;
    std::vector<double> denoised, decoded, branch_out, dpred, dbranch, ddenoised, ddecoded, dcode;
  };
  std::vector<Chunk> chunks;
};

DeepOnetModel::DeepOnetModel(DeepOnetConfig cfg, std::uint64_t seed)
    : cfg_(cfg),
      branch_spec_(cfg.branch_spec()),
      trunk_spec_(cfg.trunk_spec()),
      enc_spec_(cfg.encoder_spec()),
      dec_spec_(cfg.decoder_spec()),
      layout_(make_layout(cfg)),
      params_(layout_.total, 0.0),
      queries_(sensor_grid(cfg.n_sensors)),
      scratch_(std::make_unique<Scratch>()) {
  Rng rng(seed);
  init_glorot(branch_spec_, std::span<double>(params_).subspan(layout_.branch, branch_spec_.param_count()), rng);
  init_glorot(trunk_spec_, std::span<double>(params_).subspan(layout_.trunk, trunk_spec_.param_count()), rng);
  params_[layout_.bias] = 0.0;
  if (cfg_.has_denoiser) {
    init_glorot(enc_spec_, std::span<double>(params_).subspan(layout_.encoder, enc_spec_.param_count()), rng);
    init_glorot(dec_spec_, std::span<double>(params_).subspan(layout_.decoder, dec_spec_.param_count()), rng);
    params_[layout_.blend] = 0.0;  // blend weight starts at 0.5
  }
}

DeepOnetModel::DeepOnetModel(DeepOnetConfig cfg, std::vector<double> params)
    : cfg_(cfg),
      branch_spec_(cfg.branch_spec()),
      trunk_spec_(cfg.trunk_spec()),
      enc_spec_(cfg.encoder_spec()),
      dec_spec_(cfg.decoder_spec()),
      layout_(make_layout(cfg)),
      params_(std::move(params)),
      queries_(sensor_grid(cfg.n_sensors)),
      scratch_(std::make_unique<Scratch>()) {
  if (params_.size() != layout_.total) throw ShapeError("deeponet parameter vector size mismatch");
}

DeepOnetModel::DeepOnetModel(DeepOnetModel&&) noexcept = default;
DeepOnetModel& DeepOnetModel::operator=(DeepOnetModel&&) noexcept = default;
DeepOnetModel::~DeepOnetModel() = default;

double DeepOnetModel::blend_logit() const {
  if (!cfg_.has_denoiser) throw VariantError("standard model has no blend parameter");
  return params_[layout_.blend];
}

double DeepOnetModel::blend_weight() const { return sigmoid(blend_logit()); }

void DeepOnetModel::denoise_into(const Field& u0, std::vector<double>& out, MlpTape* enc_tape,
                                 MlpTape* dec_tape, std::vector<double>* decoded) const {
  if (!cfg_.has_denoiser) throw VariantError("denoise called on the standard variant");
  if (static_cast<int>(u0.size()) != cfg_.n_sensors) throw ShapeError("denoise: input size");

  std::vector<double> code(static_cast<std::size_t>(cfg_.bottleneck_dim));
  mlp_forward(enc_spec_, std::span<const double>(params_).subspan(layout_.encoder, enc_spec_.param_count()),
              u0, code, enc_tape);
  std::vector<double> local_decoded(static_cast<std::size_t>(cfg_.n_sensors));
  std::vector<double>& dec = decoded ? *decoded : local_decoded;
  dec.resize(static_cast<std::size_t>(cfg_.n_sensors));
  mlp_forward(dec_spec_, std::span<const double>(params_).subspan(layout_.decoder, dec_spec_.param_count()),
              code, dec, dec_tape);

  const double w = sigmoid(params_[layout_.blend]);
  out.resize(u0.size());
  for (std::size_t j = 0; j < u0.size(); ++j) out[j] = w * dec[j] + (1.0 - w) * u0[j];
}

Field DeepOnetModel::denoise(const Field& u0) const {
  std::vector<double> out;
  denoise_into(u0, out, nullptr, nullptr, nullptr);
  return out;
}

std::vector<double> DeepOnetModel::branch_embedding(const Field& u0) const {
  if (static_cast<int>(u0.size()) != cfg_.n_sensors) throw ShapeError("branch input size");
  std::vector<double> latent(static_cast<std::size_t>(cfg_.latent_dim));
  if (cfg_.has_denoiser) {
    std::vector<double> blended;
    denoise_into(u0, blended, nullptr, nullptr, nullptr);
    mlp_forward(branch_spec_, std::span<const double>(params_).subspan(layout_.branch, branch_spec_.param_count()),
                blended, latent);
  } else {
    mlp_forward(branch_spec_, std::span<const double>(params_).subspan(layout_.branch, branch_spec_.param_count()),
                u0, latent);
  }
  return latent;
}

std::vector<double> DeepOnetModel::trunk_embedding(double x) const {
  std::vector<double> latent(static_cast<std::size_t>(cfg_.latent_dim));
  const double in[1] = {x};
  mlp_forward(trunk_spec_, std::span<const double>(params_).subspan(layout_.trunk, trunk_spec_.param_count()),
              std::span<const double>(in, 1), latent);
  return latent;
}

std::vector<double> DeepOnetModel::forward(const Field& u0, std::span<const double> queries) const {
  const double two_pi = 2.0 * std::numbers::pi;
  for (double q : queries) {
    if (!(q >= 0.0 && q < two_pi)) throw ConfigError("query coordinate outside [0, 2pi)");
  }
  const auto b = branch_embedding(u0);
  std::vector<double> out(queries.size());
  const double bias = params_[layout_.bias];
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto t = trunk_embedding(queries[i]);
    double acc = bias;
    for (int k = 0; k < cfg_.latent_dim; ++k) acc += b[static_cast<std::size_t>(k)] * t[static_cast<std::size_t>(k)];
    out[i] = acc;
  }
  return out;
}

Field DeepOnetModel::predict(const Field& u0) const { return forward(u0, queries_); }

double DeepOnetModel::loss_and_grad(std::span<const TrainSample> data,
                                    std::span<const std::size_t> batch,
                                    std::span<double> grad) const {
  if (batch.empty()) throw UsageError("loss_and_grad: empty batch");
  if (grad.size() != params_.size()) throw ShapeError("loss_and_grad: grad size");
  const int n_q = cfg_.n_sensors;
  const int p = cfg_.latent_dim;
  const double denom = static_cast<double>(batch.size()) * n_q;

  for (std::size_t bi : batch) {
    if (static_cast<int>(data[bi].input.size()) != cfg_.n_sensors ||
        static_cast<int>(data[bi].target.size()) != n_q) {
      throw ShapeError("training sample size mismatch");
    }
  }

  Scratch& s = *scratch_;

  // Trunk embeddings at the grid queries are shared across the batch.
  const auto trunk_params =
      std::span<const double>(params_).subspan(layout_.trunk, trunk_spec_.param_count());
  s.trunk_tapes.resize(static_cast<std::size_t>(n_q));
  s.trunk_out.resize(static_cast<std::size_t>(n_q) * static_cast<std::size_t>(p));
  for (int j = 0; j < n_q; ++j) {
    const double in[1] = {queries_[static_cast<std::size_t>(j)]};
    mlp_forward(trunk_spec_, trunk_params, std::span<const double>(in, 1),
                std::span<double>(s.trunk_out).subspan(static_cast<std::size_t>(j) * p, static_cast<std::size_t>(p)),
                &s.trunk_tapes[static_cast<std::size_t>(j)]);
  }

  // Per-sample work split into fixed chunks; each chunk owns its accumulators
  // so the reduction below is bit-identical for any worker count.
  if (s.chunks.size() != kGradChunks) s.chunks.resize(kGradChunks);
  const auto branch_params =
      std::span<const double>(params_).subspan(layout_.branch, branch_spec_.param_count());

  parallel_chunks(batch.size(), kGradChunks, [&](int c, std::size_t lo, std::size_t hi) {
    auto& ch = s.chunks[static_cast<std::size_t>(c)];
    ch.grad.assign(params_.size(), 0.0);
    ch.trunk_acc.assign(static_cast<std::size_t>(n_q) * static_cast<std::size_t>(p), 0.0);
    ch.sse = 0.0;
    ch.branch_out.resize(static_cast<std::size_t>(p));
    ch.dpred.resize(static_cast<std::size_t>(n_q));
    ch.dbranch.resize(static_cast<std::size_t>(p));

    for (std::size_t bi = lo; bi < hi; ++bi) {
      const TrainSample& sample = data[batch[bi]];
      const std::vector<double>* branch_in = &sample.input;
      if (cfg_.has_denoiser) {
        denoise_into(sample.input, ch.denoised, &ch.enc_tape, &ch.dec_tape, &ch.decoded);
        branch_in = &ch.denoised;
      }
      mlp_forward(branch_spec_, branch_params, *branch_in, ch.branch_out, &ch.branch_tape);

      const double bias = params_[layout_.bias];
      for (int j = 0; j < n_q; ++j) {
        const double* t = s.trunk_out.data() + static_cast<std::size_t>(j) * p;
        double acc = bias;
        for (int k = 0; k < p; ++k) acc += ch.branch_out[static_cast<std::size_t>(k)] * t[k];
        const double r = acc - sample.target[static_cast<std::size_t>(j)];
        ch.sse += r * r;
        ch.dpred[static_cast<std::size_t>(j)] = 2.0 * r / denom;
      }

      // bias and the two latent pathways
      std::fill(ch.dbranch.begin(), ch.dbranch.end(), 0.0);
      double dbias = 0.0;
      for (int j = 0; j < n_q; ++j) {
        const double g = ch.dpred[static_cast<std::size_t>(j)];
        dbias += g;
        const double* t = s.trunk_out.data() + static_cast<std::size_t>(j) * p;
        double* ta = ch.trunk_acc.data() + static_cast<std::size_t>(j) * p;
        for (int k = 0; k < p; ++k) {
          ch.dbranch[static_cast<std::size_t>(k)] += g * t[k];
          ta[k] += g * ch.branch_out[static_cast<std::size_t>(k)];
        }
      }
      ch.grad[layout_.bias] += dbias;

      if (!cfg_.has_denoiser) {
        mlp_backward(branch_spec_, branch_params, ch.branch_tape, ch.dbranch,
                     std::span<double>(ch.grad).subspan(layout_.branch, branch_spec_.param_count()));
      } else {
        ch.ddenoised.assign(static_cast<std::size_t>(cfg_.n_sensors), 0.0);
        mlp_backward(branch_spec_, branch_params, ch.branch_tape, ch.dbranch,
                     std::span<double>(ch.grad).subspan(layout_.branch, branch_spec_.param_count()),
                     ch.ddenoised);

        const double w = sigmoid(params_[layout_.blend]);
        // d(blend)/d(omega) routed through w (D - u0); decoder sees w * g.
        double dw = 0.0;
        ch.ddecoded.assign(static_cast<std::size_t>(cfg_.n_sensors), 0.0);
        for (int j = 0; j < cfg_.n_sensors; ++j) {
          const double g = ch.ddenoised[static_cast<std::size_t>(j)];
          dw += g * (ch.decoded[static_cast<std::size_t>(j)] - sample.input[static_cast<std::size_t>(j)]);
          ch.ddecoded[static_cast<std::size_t>(j)] = g * w;
        }
        ch.grad[layout_.blend] += dw * w * (1.0 - w);

        ch.dcode.assign(static_cast<std::size_t>(cfg_.bottleneck_dim), 0.0);
        auto& dcode = ch.dcode;
        mlp_backward(dec_spec_,
                     std::span<const double>(params_).subspan(layout_.decoder, dec_spec_.param_count()),
                     ch.dec_tape, ch.ddecoded,
                     std::span<double>(ch.grad).subspan(layout_.decoder, dec_spec_.param_count()), dcode);
        mlp_backward(enc_spec_,
                     std::span<const double>(params_).subspan(layout_.encoder, enc_spec_.param_count()),
                     ch.enc_tape, dcode,
                     std::span<double>(ch.grad).subspan(layout_.encoder, enc_spec_.param_count()));
      }
    }
  });

  // Ordered reduction keeps results independent of scheduling.
  double sse = 0.0;
  std::vector<double> trunk_total(static_cast<std::size_t>(n_q) * static_cast<std::size_t>(p), 0.0);
  for (int c = 0; c < kGradChunks; ++c) {
    const auto& ch = s.chunks[static_cast<std::size_t>(c)];
    if (ch.grad.empty()) continue;
    sse += ch.sse;
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += ch.grad[i];
    for (std::size_t i = 0; i < trunk_total.size(); ++i) trunk_total[i] += ch.trunk_acc[i];
  }

  for (int j = 0; j < n_q; ++j) {
    mlp_backward(trunk_spec_, trunk_params, s.trunk_tapes[static_cast<std::size_t>(j)],
                 std::span<const double>(trunk_total).subspan(static_cast<std::size_t>(j) * p, static_cast<std::size_t>(p)),
                 grad.subspan(layout_.trunk, trunk_spec_.param_count()));
  }

  return sse / denom;
}

DeepOnetModel build_model(const DeepOnetConfig& cfg, std::uint64_t seed) {
  return DeepOnetModel(cfg, seed);
}

FrozenDeepOnet::FrozenDeepOnet(const DeepOnetModel& model)
    : cfg_(model.config()),
      branch_spec_(cfg_.branch_spec()),
      enc_spec_(cfg_.encoder_spec()),
      dec_spec_(cfg_.decoder_spec()),
      layout_(model.layout()),
      params_(model.params().begin(), model.params().end()) {
  const auto& queries = model.grid_queries();
  trunk_at_grid_.resize(queries.size() * static_cast<std::size_t>(cfg_.latent_dim));
  for (std::size_t j = 0; j < queries.size(); ++j) {
    const auto t = model.trunk_embedding(queries[j]);
    std::copy(t.begin(), t.end(), trunk_at_grid_.begin() + static_cast<std::ptrdiff_t>(j * static_cast<std::size_t>(cfg_.latent_dim)));
  }
}

Field FrozenDeepOnet::predict(const Field& u0) const {
  if (static_cast<int>(u0.size()) != cfg_.n_sensors) throw ShapeError("predict: input size");
  const int p = cfg_.latent_dim;

  std::vector<double> latent(static_cast<std::size_t>(p));
  if (cfg_.has_denoiser) {
    std::vector<double> code(static_cast<std::size_t>(cfg_.bottleneck_dim));
    mlp_forward(enc_spec_, std::span<const double>(params_).subspan(layout_.encoder, enc_spec_.param_count()),
                u0, code);
    std::vector<double> decoded(static_cast<std::size_t>(cfg_.n_sensors));
    mlp_forward(dec_spec_, std::span<const double>(params_).subspan(layout_.decoder, dec_spec_.param_count()),
                code, decoded);
    const double w = sigmoid(params_[layout_.blend]);
    std::vector<double> blended(u0.size());
    for (std::size_t j = 0; j < u0.size(); ++j) blended[j] = w * decoded[j] + (1.0 - w) * u0[j];
    mlp_forward(branch_spec_, std::span<const double>(params_).subspan(layout_.branch, branch_spec_.param_count()),
                blended, latent);
  } else {
    mlp_forward(branch_spec_, std::span<const double>(params_).subspan(layout_.branch, branch_spec_.param_count()),
                u0, latent);
  }

  const int n_q = cfg_.n_sensors;
  Field out(static_cast<std::size_t>(n_q));
  const double bias = params_[layout_.bias];
  for (int j = 0; j < n_q; ++j) {
    const double* t = trunk_at_grid_.data() + static_cast<std::size_t>(j) * p;
    double acc = bias;
    for (int k = 0; k < p; ++k) acc += latent[static_cast<std::size_t>(k)] * t[k];
    out[static_cast<std::size_t>(j)] = acc;
  }
  return out;
}

}  // namespace opdef
