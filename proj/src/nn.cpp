#include "opdef/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace opdef {

std::size_t NetworkSpec::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) {
    n += static_cast<std::size_t>(l.in_dim) * static_cast<std::size_t>(l.out_dim) +
         static_cast<std::size_t>(l.out_dim);
  }
  return n;
}

void NetworkSpec::validate() const {
  if (layers.empty()) throw ConfigError("network needs at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].in_dim < 1 || layers[i].out_dim < 1) {
      throw ConfigError("layer dims must be >= 1");
    }
    if (i > 0 && layers[i].in_dim != layers[i - 1].out_dim) {
      throw ConfigError("consecutive layers do not chain");
    }
  }
}

NetworkSpec dense_stack(int in_dim, const std::vector<int>& widths) {
  if (widths.empty()) throw ConfigError("dense_stack needs at least one layer width");
  NetworkSpec spec;
  int prev = in_dim;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const bool last = i + 1 == widths.size();
    spec.layers.push_back({prev, widths[i], last ? Activation::kIdentity : Activation::kTanh});
    prev = widths[i];
  }
  spec.validate();
  return spec;
}

void init_glorot(const NetworkSpec& spec, std::span<double> params, Rng& rng) {
  spec.validate();
  if (params.size() != spec.param_count()) throw ShapeError("init_glorot: parameter span size");
  std::size_t off = 0;
  for (const auto& l : spec.layers) {
    const double bound = std::sqrt(6.0 / (l.in_dim + l.out_dim));
    const std::size_t n_w = static_cast<std::size_t>(l.in_dim) * static_cast<std::size_t>(l.out_dim);
    for (std::size_t i = 0; i < n_w; ++i) params[off + i] = rng.uniform(-bound, bound);
    off += n_w;
    for (int i = 0; i < l.out_dim; ++i) params[off + static_cast<std::size_t>(i)] = 0.0;
    off += static_cast<std::size_t>(l.out_dim);
  }
}

std::vector<double> init_params(const NetworkSpec& spec, std::uint64_t seed) {
  std::vector<double> p(spec.param_count());
  Rng rng(seed);
  init_glorot(spec, p, rng);
  return p;
}

void mlp_forward(const NetworkSpec& spec, std::span<const double> params,
                 std::span<const double> input, std::span<double> output, MlpTape* tape) {
  if (static_cast<int>(input.size()) != spec.input_dim()) throw ShapeError("mlp_forward: input size");
  if (static_cast<int>(output.size()) != spec.output_dim()) throw ShapeError("mlp_forward: output size");
  if (params.size() != spec.param_count()) throw ShapeError("mlp_forward: parameter size");

  const std::size_t n_layers = spec.layers.size();
  if (tape) {
    tape->act.resize(n_layers + 1);
    tape->act[0].assign(input.begin(), input.end());
  }

  std::vector<double> cur(input.begin(), input.end());
  std::vector<double> next;
  std::size_t off = 0;
  for (std::size_t li = 0; li < n_layers; ++li) {
    const auto& l = spec.layers[li];
    next.assign(static_cast<std::size_t>(l.out_dim), 0.0);
    const double* w = params.data() + off;
    const double* b = w + static_cast<std::size_t>(l.in_dim) * static_cast<std::size_t>(l.out_dim);
    for (int o = 0; o < l.out_dim; ++o) {
      const double* row = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(l.in_dim);
      double z = b[o];
      for (int i = 0; i < l.in_dim; ++i) z += row[i] * cur[static_cast<std::size_t>(i)];
      next[static_cast<std::size_t>(o)] = l.activation == Activation::kTanh ? std::tanh(z) : z;
    }
    off += static_cast<std::size_t>(l.in_dim) * static_cast<std::size_t>(l.out_dim) +
           static_cast<std::size_t>(l.out_dim);
    cur.swap(next);
    if (tape) tape->act[li + 1] = cur;
  }
  std::copy(cur.begin(), cur.end(), output.begin());
}

void mlp_backward(const NetworkSpec& spec, std::span<const double> params, const MlpTape& tape,
                  std::span<const double> output_grad, std::span<double> param_grad,
                  std::span<double> input_grad) {
  if (tape.act.size() != spec.layers.size() + 1) throw ShapeError("mlp_backward: tape mismatch");
  if (param_grad.size() != spec.param_count()) throw ShapeError("mlp_backward: grad size");

  std::vector<double> g(output_grad.begin(), output_grad.end());
  std::vector<double> g_prev;

  // Offsets of each layer's parameter block.
  std::vector<std::size_t> offsets(spec.layers.size());
  std::size_t off = 0;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    offsets[li] = off;
    off += static_cast<std::size_t>(spec.layers[li].in_dim) * static_cast<std::size_t>(spec.layers[li].out_dim) +
           static_cast<std::size_t>(spec.layers[li].out_dim);
  }

  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const auto& l = spec.layers[li];
    const auto& a_out = tape.act[li + 1];
    const auto& a_in = tape.act[li];
    const double* w = params.data() + offsets[li];
    double* dw = param_grad.data() + offsets[li];
    double* db = dw + static_cast<std::size_t>(l.in_dim) * static_cast<std::size_t>(l.out_dim);

    g_prev.assign(static_cast<std::size_t>(l.in_dim), 0.0);
    for (int o = 0; o < l.out_dim; ++o) {
      double gz = g[static_cast<std::size_t>(o)];
      if (l.activation == Activation::kTanh) {
        const double a = a_out[static_cast<std::size_t>(o)];
        gz *= 1.0 - a * a;
      }
      const double* row = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(l.in_dim);
      double* drow = dw + static_cast<std::size_t>(o) * static_cast<std::size_t>(l.in_dim);
      for (int i = 0; i < l.in_dim; ++i) {
        drow[i] += gz * a_in[static_cast<std::size_t>(i)];
        g_prev[static_cast<std::size_t>(i)] += gz * row[i];
      }
      db[o] += gz;
    }
    g.swap(g_prev);
  }

  if (!input_grad.empty()) {
    if (input_grad.size() != g.size()) throw ShapeError("mlp_backward: input grad size");
    for (std::size_t i = 0; i < g.size(); ++i) input_grad[i] += g[i];
  }
}

void TrainConfig::validate() const {
  if (!(lr_min > 0.0) || !(lr_min <= lr0)) throw ConfigError("need 0 < lr_min <= lr0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

double cosine_lr(int epoch, const TrainConfig& cfg) {
  return cfg.lr_min +
         0.5 * (cfg.lr0 - cfg.lr_min) *
             (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / cfg.epochs));
}

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state,
               double lr, const TrainConfig& cfg) {
  if (params.size() != grad.size() || params.size() != state.m.size()) {
    throw ShapeError("adam_step: size mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

TrainResult train(DifferentiableModel& model, std::span<const TrainSample> data,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw UsageError("train: empty dataset");

  const std::size_t out_dim = data.front().target.size();
  AdamState adam(model.param_count());
  std::vector<double> grad(model.param_count());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed);

  TrainResult result;
  result.epoch_mse.reserve(static_cast<std::size_t>(cfg.epochs));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, cfg);

    // Fisher-Yates with the seeded generator; the only source of randomness.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = rng.below(i);
      std::swap(order[i - 1], order[j]);
    }

    double sse = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::span<const std::size_t> batch(order.data() + start, stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double mse = model.loss_and_grad(data, batch, grad);
      if (!std::isfinite(mse)) {
        throw TrainingDivergenceError("training loss non-finite at epoch " + std::to_string(epoch), epoch);
      }
      sse += mse * static_cast<double>(batch.size() * out_dim);
      seen += batch.size();
      adam_step(model.params(), grad, adam, lr, cfg);
    }
    result.epoch_mse.push_back(sse / static_cast<double>(seen * out_dim));
  }
  return result;
}

MlpModel::MlpModel(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  params_ = init_params(spec_, seed);
}

std::vector<double> MlpModel::forward(std::span<const double> input) const {
  std::vector<double> out(static_cast<std::size_t>(spec_.output_dim()));
  mlp_forward(spec_, params_, input, out);
  return out;
}

double MlpModel::loss_and_grad(std::span<const TrainSample> data,
                               std::span<const std::size_t> batch,
                               std::span<double> grad) const {
  if (batch.empty()) throw UsageError("loss_and_grad: empty batch");
  const int out_dim = spec_.output_dim();
  const double denom = static_cast<double>(batch.size()) * out_dim;

  MlpTape tape;
  std::vector<double> out(static_cast<std::size_t>(out_dim));
  std::vector<double> dout(static_cast<std::size_t>(out_dim));
  double sse = 0.0;
  for (std::size_t idx : batch) {
    const auto& s = data[idx];
    if (static_cast<int>(s.target.size()) != out_dim) throw ShapeError("target size mismatch");
    mlp_forward(spec_, params_, s.input, out, &tape);
    for (int o = 0; o < out_dim; ++o) {
      const double r = out[static_cast<std::size_t>(o)] - s.target[static_cast<std::size_t>(o)];
      sse += r * r;
      dout[static_cast<std::size_t>(o)] = 2.0 * r / denom;
    }
    mlp_backward(spec_, params_, tape, dout, grad);
  }
  return sse / denom;
}

}  // namespace opdef
