#pragma once

#include <complex>
#include <vector>

namespace opdef {

constexpr bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// Iterative radix-2 complex FFT with precomputed bit-reversal and twiddle
/// tables. Grids in this project are power-of-two by construction, so no
/// general-length fallback exists. Butterflies use explicit component
/// arithmetic; std::complex is storage only.
class Fft {
 public:
  explicit Fft(int n);

  int size() const { return n_; }

  /// In-place forward transform, unnormalized: X_k = sum_j x_j e^{-2пi jk/n}.
  void forward(std::complex<double>* data) const { transform(data, false); }

  /// In-place inverse transform, scaled by 1/n.
  void inverse(std::complex<double>* data) const { transform(data, true); }

 private:
  void transform(std::complex<double>* data, bool invert) const;

  int n_;
  std::vector<int> reversed_;
  std::vector<double> tw_re_, tw_im_;     // flattened per-stage twiddles
  std::vector<std::size_t> stage_offset_;  // offset into tw_* per stage
};

/// Real-input transform of length n backed by a complex FFT of length n/2
/// (even/odd packing plus a twist pass). Spectra are stored as the Hermitian
/// half [0 .. n/2]; entries 0 and n/2 are purely real.
class RealFft {
 public:
  explicit RealFft(int n);

  int size() const { return n_; }
  int spectrum_size() const { return m_ + 1; }

  /// X[0..n/2] = unnormalized DFT of x[0..n-1]. scratch must hold n/2 entries.
  void forward(const double* x, std::complex<double>* spectrum,
               std::complex<double>* scratch) const;

  /// x = inverse of a Hermitian half-spectrum, scaled by 1/n.
  void inverse(const std::complex<double>* spectrum, double* x,
               std::complex<double>* scratch) const;

 private:
  int n_, m_;
  Fft half_;
  std::vector<double> twist_re_, twist_im_;  // e^{-2pi i k / n}, k = 0..n/2-1
};

}  // namespace opdef
