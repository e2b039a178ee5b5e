#pragma once

// Shared plumbing: error taxonomy, deterministic RNG helpers, seed
// derivation, and a fixed-chunk parallel loop whose reduction order does not
// depend on the worker count.

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace opdef {

class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class MetricError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class VariantError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when the PDE integration produces a non-finite state or leaves the
/// regime the time step was validated for. Carries the failing step index.
class SolverDivergenceError : public std::runtime_error {
 public:
  SolverDivergenceError(const std::string& what, int step)
      : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// Thrown when a training loss becomes non-finite. Carries the epoch index.
class TrainingDivergenceError : public std::runtime_error {
 public:
  TrainingDivergenceError(const std::string& what, int epoch)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

/// mt19937_64 wrapped with hand-rolled draw helpers so that every stream is
/// bit-reproducible across standard library implementations (the std
/// distributions are not pinned by the standard).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1), 53 bits of entropy.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Multiply-shift method; bias is O(n / 2^64).
  std::uint64_t below(std::uint64_t n) {
    using u128 = unsigned __int128;
    return static_cast<std::uint64_t>((static_cast<u128>(engine_()) * n) >> 64);
  }

  int index(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Derives an independent child seed from a base seed and a label, so modules
/// can own disjoint deterministic streams without coordinating draw order.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

/// Worker threads used by the chunked loops below. Defaults to the hardware
/// concurrency, overridable via set_worker_count or the OPDEF_THREADS
/// environment variable.
int worker_count();
void set_worker_count(int n);

/// Runs fn(chunk, begin, end) over [0, n) split into n_chunks contiguous
/// ranges. Chunk boundaries depend only on (n, n_chunks), so per-chunk
/// accumulators reduce identically for any worker count, including 1.
void parallel_chunks(std::size_t n, int n_chunks,
                     const std::function<void(int, std::size_t, std::size_t)>& fn);

}  // namespace opdef
