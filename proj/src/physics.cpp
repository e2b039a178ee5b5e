#include "opdef/physics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace opdef {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// RK4 stability interval on the imaginary axis is |lambda dt| <= 2*sqrt(2).
constexpr double kRk4ImaginaryLimit = 2.8284271247461903;

}  // namespace

SpatialGrid make_grid(int n_x) {
  if (n_x < 4 || !is_power_of_two(n_x)) {
    throw ConfigError("grid size must be a power of two >= 4, got " + std::to_string(n_x));
  }
  SpatialGrid g;
  g.n_x = n_x;
  g.domain_length = kTwoPi;
  g.points.resize(static_cast<std::size_t>(n_x));
  const double h = kTwoPi / n_x;
  for (int j = 0; j < n_x; ++j) g.points[static_cast<std::size_t>(j)] = h * j;
  return g;
}

SolverConfig default_solver_config() {
  SolverConfig cfg;
  cfg.grid = make_grid(64);
  return cfg;
}

Field sample_smooth_ic(const SmoothIcSpec& spec, const SpatialGrid& grid) {
  if (spec.n_modes < 1 || spec.n_modes > grid.n_x / 4) {
    throw ConfigError("smooth IC needs 1 <= n_modes <= n_x/4");
  }
  Rng rng(spec.seed);
  std::vector<double> phase(static_cast<std::size_t>(spec.n_modes));
  for (int k = 0; k < spec.n_modes; ++k) phase[static_cast<std::size_t>(k)] = rng.uniform(0.0, kTwoPi);

  Field u(static_cast<std::size_t>(grid.n_x), 0.0);
  for (int k = 1; k <= spec.n_modes; ++k) {
    const double amp = spec.base_amplitude / k;
    const double ph = phase[static_cast<std::size_t>(k - 1)];
    for (int j = 0; j < grid.n_x; ++j) {
      u[static_cast<std::size_t>(j)] += amp * std::sin(k * grid.points[static_cast<std::size_t>(j)] + ph);
    }
  }
  return u;
}

Field gaussian_bump(const Perturbation& p, const SpatialGrid& grid) {
  if (p.center_index < 0 || p.center_index >= grid.n_x) {
    throw ConfigError("bump center index out of range");
  }
  if (p.width <= 0.0) throw ConfigError("bump width must be positive");
  Field delta(static_cast<std::size_t>(grid.n_x));
  const double denom = 2.0 * p.width * p.width;
  for (int j = 0; j < grid.n_x; ++j) {
    const double d = static_cast<double>(j - p.center_index);
    delta[static_cast<std::size_t>(j)] = p.magnitude * std::exp(-(d * d) / denom);
  }
  return delta;
}

Field apply_perturbation(const Field& u0, const Perturbation& p, const SpatialGrid& grid) {
  if (u0.size() != static_cast<std::size_t>(grid.n_x)) {
    throw ShapeError("field length does not match grid");
  }
  Field out = gaussian_bump(p, grid);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += u0[j];
  return out;
}

double l2_norm(const Field& f) {
  double s = 0.0;
  for (double v : f) s += v * v;
  return std::sqrt(s);
}

double field_mean(const Field& f) {
  if (f.empty()) return 0.0;
  double s = 0.0;
  for (double v : f) s += v;
  return s / static_cast<double>(f.size());
}

double relative_l2(const Field& pred, const Field& truth) {
  if (pred.size() != truth.size()) throw ShapeError("relative_l2: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    num += d * d;
    den += truth[i] * truth[i];
  }
  if (den <= 0.0) throw MetricError("relative_l2 undefined for zero-norm reference");
  return std::sqrt(num / den);
}

struct BurgersSolver::Workspace {
  explicit Workspace(int n)
      : state(n / 2 + 1), k1(n / 2 + 1), k2(n / 2 + 1), k3(n / 2 + 1), k4(n / 2 + 1),
        stage(n / 2 + 1), scratch(n / 2), phys(n) {}
  std::vector<std::complex<double>> state, k1, k2, k3, k4, stage, scratch;
  std::vector<double> phys;
};

BurgersSolver::BurgersSolver(SolverConfig cfg) : cfg_(std::move(cfg)), fft_(cfg_.grid.n_x) {
  if (cfg_.viscosity <= 0.0) throw ConfigError("viscosity must be positive");
  if (cfg_.terminal_time <= 0.0) throw ConfigError("terminal time must be positive");
  if (cfg_.n_steps < 1) throw ConfigError("n_steps must be >= 1");
  const int n = cfg_.grid.n_x;
  dt_ = cfg_.terminal_time / cfg_.n_steps;

  // Advective eigenvalues after dealiasing are bounded by max|u| * k_cut.
  const int k_cut = n / 3;
  max_stable_amplitude_ = kRk4ImaginaryLimit / (k_cut * dt_);
  if (max_stable_amplitude_ < 1.5) {
    throw ConfigError("time step too large: advective substep not stable up to |u| = 1.5");
  }

  const int nh = n / 2 + 1;
  deriv_scale_.assign(static_cast<std::size_t>(nh), 0.0);
  decay_half_.resize(static_cast<std::size_t>(nh));
  decay_full_.resize(static_cast<std::size_t>(nh));
  for (int k = 0; k < nh; ++k) {
    // Nyquist derivative convention is irrelevant here: n/2 > n/3 is masked.
    deriv_scale_[static_cast<std::size_t>(k)] = k <= k_cut ? 0.5 * static_cast<double>(k) : 0.0;
    const double decay = std::exp(-cfg_.viscosity * static_cast<double>(k) * k * dt_ * 0.5);
    decay_half_[static_cast<std::size_t>(k)] = decay;
    decay_full_[static_cast<std::size_t>(k)] = decay * decay;
  }
}

void BurgersSolver::nonlinear_term(const std::complex<double>* state, std::complex<double>* out,
                                   Workspace& w, int step, bool check_state) const {
  const int n = cfg_.grid.n_x;
  fft_.inverse(state, w.phys.data(), w.scratch.data());

  if (check_state) {
    double max_abs = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = w.phys[static_cast<std::size_t>(i)];
      if (!std::isfinite(v)) {
        throw SolverDivergenceError("solver state became non-finite at step " + std::to_string(step), step);
      }
      max_abs = std::max(max_abs, std::abs(v));
    }
    if (max_abs > max_stable_amplitude_) {
      throw SolverDivergenceError("solver state left the stable amplitude range at step " + std::to_string(step), step);
    }
  }

  for (int i = 0; i < n; ++i) {
    const double u = w.phys[static_cast<std::size_t>(i)];
    w.phys[static_cast<std::size_t>(i)] = u * u;
  }
  fft_.forward(w.phys.data(), out, w.scratch.data());

  auto* po = reinterpret_cast<double*>(out);
  for (int k = 0; k <= n / 2; ++k) {
    const double c = deriv_scale_[static_cast<std::size_t>(k)];
    // -(i c) * (wr + i wi) = c*wi - i c*wr
    const double wr = po[2 * k];
    const double wi = po[2 * k + 1];
    po[2 * k] = c * wi;
    po[2 * k + 1] = -c * wr;
  }
}

Field BurgersSolver::solve(const Field& u0) const {
  const int n = cfg_.grid.n_x;
  if (u0.size() != static_cast<std::size_t>(n)) {
    throw ShapeError("initial condition length does not match solver grid");
  }

  Workspace w(n);
  fft_.forward(u0.data(), w.state.data(), w.scratch.data());

  const int nh = n / 2 + 1;
  auto* st = reinterpret_cast<double*>(w.state.data());
  auto* sg = reinterpret_cast<double*>(w.stage.data());
  const auto* g1 = reinterpret_cast<const double*>(w.k1.data());
  const auto* g2 = reinterpret_cast<const double*>(w.k2.data());
  const auto* g3 = reinterpret_cast<const double*>(w.k3.data());
  const auto* g4 = reinterpret_cast<const double*>(w.k4.data());

  const double half_dt = 0.5 * dt_;
  const double sixth_dt = dt_ / 6.0;

  for (int step = 0; step < cfg_.n_steps; ++step) {
    nonlinear_term(w.state.data(), w.k1.data(), w, step, true);

    for (int i = 0; i < nh; ++i) {
      const double eh = decay_half_[static_cast<std::size_t>(i)];
      sg[2 * i] = eh * (st[2 * i] + half_dt * g1[2 * i]);
      sg[2 * i + 1] = eh * (st[2 * i + 1] + half_dt * g1[2 * i + 1]);
    }
    nonlinear_term(w.stage.data(), w.k2.data(), w, step, false);

    for (int i = 0; i < nh; ++i) {
      const double eh = decay_half_[static_cast<std::size_t>(i)];
      sg[2 * i] = eh * st[2 * i] + half_dt * g2[2 * i];
      sg[2 * i + 1] = eh * st[2 * i + 1] + half_dt * g2[2 * i + 1];
    }
    nonlinear_term(w.stage.data(), w.k3.data(), w, step, false);

    for (int i = 0; i < nh; ++i) {
      const double eh = decay_half_[static_cast<std::size_t>(i)];
      const double ef = decay_full_[static_cast<std::size_t>(i)];
      sg[2 * i] = ef * st[2 * i] + dt_ * eh * g3[2 * i];
      sg[2 * i + 1] = ef * st[2 * i + 1] + dt_ * eh * g3[2 * i + 1];
    }
    nonlinear_term(w.stage.data(), w.k4.data(), w, step, false);

    for (int i = 0; i < nh; ++i) {
      const double eh = decay_half_[static_cast<std::size_t>(i)];
      const double ef = decay_full_[static_cast<std::size_t>(i)];
      st[2 * i] = ef * st[2 * i] +
                  sixth_dt * (ef * g1[2 * i] + 2.0 * eh * (g2[2 * i] + g3[2 * i]) + g4[2 * i]);
      st[2 * i + 1] =
          ef * st[2 * i + 1] +
          sixth_dt * (ef * g1[2 * i + 1] + 2.0 * eh * (g2[2 * i + 1] + g3[2 * i + 1]) + g4[2 * i + 1]);
    }
  }

  fft_.inverse(w.state.data(), w.phys.data(), w.scratch.data());
  Field out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double v = w.phys[static_cast<std::size_t>(i)];
    if (!std::isfinite(v)) {
      throw SolverDivergenceError("solver output non-finite at step " + std::to_string(cfg_.n_steps),
                                  cfg_.n_steps);
    }
    out[static_cast<std::size_t>(i)] = v;
  }
  return out;
}

Field solve_burgers(const Field& u0, const SolverConfig& cfg) {
  return BurgersSolver(cfg).solve(u0);
}

}  // namespace opdef
