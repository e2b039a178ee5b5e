#include "opdef/fft.hpp"

#include <cmath>
#include <numbers>

#include "opdef/common.hpp"

namespace opdef {

Fft::Fft(int n) : n_(n) {
  if (!is_power_of_two(n) || n < 2) {
    throw ConfigError("fft size must be a power of two >= 2, got " + std::to_string(n));
  }

  int log2n = 0;
  while ((1 << log2n) < n) ++log2n;

  reversed_.resize(n);
  for (int i = 0; i < n; ++i) {
    int r = 0;
    for (int b = 0; b < log2n; ++b) {
      r = (r << 1) | ((i >> b) & 1);
    }
    reversed_[i] = r;
  }

  // Stage with butterfly span `len` needs len/2 twiddles w_j = e^{-2pi i j/len}.
  stage_offset_.resize(static_cast<std::size_t>(log2n));
  std::size_t total = 0;
  for (int s = 0; s < log2n; ++s) {
    stage_offset_[static_cast<std::size_t>(s)] = total;
    total += static_cast<std::size_t>(1) << s;
  }
  tw_re_.resize(total);
  tw_im_.resize(total);
  for (int s = 0; s < log2n; ++s) {
    const int half = 1 << s;
    const double step = -2.0 * std::numbers::pi / static_cast<double>(2 * half);
    for (int j = 0; j < half; ++j) {
      tw_re_[stage_offset_[static_cast<std::size_t>(s)] + static_cast<std::size_t>(j)] =
          std::cos(step * j);
      tw_im_[stage_offset_[static_cast<std::size_t>(s)] + static_cast<std::size_t>(j)] =
          std::sin(step * j);
    }
  }
}

void Fft::transform(std::complex<double>* data, bool invert) const {
  auto* d = reinterpret_cast<double*>(data);  // interleaved re/im pairs

  for (int i = 0; i < n_; ++i) {
    const int j = reversed_[i];
    if (i < j) {
      std::swap(d[2 * i], d[2 * j]);
      std::swap(d[2 * i + 1], d[2 * j + 1]);
    }
  }

  const double sign = invert ? -1.0 : 1.0;
  int stage = 0;
  for (int len = 2; len <= n_; len <<= 1, ++stage) {
    const int half = len >> 1;
    const double* wr = &tw_re_[stage_offset_[static_cast<std::size_t>(stage)]];
    const double* wi = &tw_im_[stage_offset_[static_cast<std::size_t>(stage)]];
    for (int block = 0; block < n_; block += len) {
      for (int j = 0; j < half; ++j) {
        const int a = 2 * (block + j);
        const int b = 2 * (block + j + half);
        const double wre = wr[j];
        const double wim = sign * wi[j];
        const double xr = d[b];
        const double xi = d[b + 1];
        const double vr = xr * wre - xi * wim;
        const double vi = xr * wim + xi * wre;
        const double ur = d[a];
        const double ui = d[a + 1];
        d[a] = ur + vr;
        d[a + 1] = ui + vi;
        d[b] = ur - vr;
        d[b + 1] = ui - vi;
      }
    }
  }

  if (invert) {
    const double inv_n = 1.0 / static_cast<double>(n_);
    for (int i = 0; i < 2 * n_; ++i) d[i] *= inv_n;
  }
}

RealFft::RealFft(int n) : n_(n), m_(n / 2), half_(n / 2) {
  if (!is_power_of_two(n) || n < 4) {
    throw ConfigError("real fft size must be a power of two >= 4, got " + std::to_string(n));
  }
  twist_re_.resize(static_cast<std::size_t>(m_));
  twist_im_.resize(static_cast<std::size_t>(m_));
  for (int k = 0; k < m_; ++k) {
    const double ang = -2.0 * std::numbers::pi * k / n;
    twist_re_[static_cast<std::size_t>(k)] = std::cos(ang);
    twist_im_[static_cast<std::size_t>(k)] = std::sin(ang);
  }
}

void RealFft::forward(const double* x, std::complex<double>* spectrum,
                      std::complex<double>* scratch) const {
  auto* z = reinterpret_cast<double*>(scratch);
  for (int j = 0; j < m_; ++j) {
    z[2 * j] = x[2 * j];
    z[2 * j + 1] = x[2 * j + 1];
  }
  half_.forward(scratch);

  const double z0r = scratch[0].real();
  const double z0i = scratch[0].imag();
  spectrum[0] = {z0r + z0i, 0.0};
  spectrum[m_] = {z0r - z0i, 0.0};
  for (int k = 1; k < m_; ++k) {
    const double ar = scratch[k].real();
    const double ai = scratch[k].imag();
    const double br = scratch[m_ - k].real();
    const double bi = -scratch[m_ - k].imag();
    // even/odd sub-spectra: Fe = (a+b)/2, Fo = -(i/2)(a-b)
    const double fer = 0.5 * (ar + br);
    const double fei = 0.5 * (ai + bi);
    const double For = 0.5 * (ai - bi);
    const double Foi = -0.5 * (ar - br);
    const double tr = twist_re_[static_cast<std::size_t>(k)];
    const double ti = twist_im_[static_cast<std::size_t>(k)];
    spectrum[k] = {fer + For * tr - Foi * ti, fei + For * ti + Foi * tr};
  }
}

void RealFft::inverse(const std::complex<double>* spectrum, double* x,
                      std::complex<double>* scratch) const {
  scratch[0] = {0.5 * (spectrum[0].real() + spectrum[m_].real()),
                0.5 * (spectrum[0].real() - spectrum[m_].real())};
  for (int k = 1; k < m_; ++k) {
    const double ar = spectrum[k].real();
    const double ai = spectrum[k].imag();
    const double br = spectrum[m_ - k].real();
    const double bi = -spectrum[m_ - k].imag();
    const double fer = 0.5 * (ar + br);
    const double fei = 0.5 * (ai + bi);
    // Fo = (a-b)/2 * conj(t); then z = Fe + i Fo
    const double dr = 0.5 * (ar - br);
    const double di = 0.5 * (ai - bi);
    const double tr = twist_re_[static_cast<std::size_t>(k)];
    const double ti = -twist_im_[static_cast<std::size_t>(k)];
    const double For = dr * tr - di * ti;
    const double Foi = dr * ti + di * tr;
    scratch[k] = {fer - Foi, fei + For};
  }
  half_.inverse(scratch);
  for (int j = 0; j < m_; ++j) {
    x[2 * j] = scratch[j].real();
    x[2 * j + 1] = scratch[j].imag();
  }
}

}  // namespace opdef
