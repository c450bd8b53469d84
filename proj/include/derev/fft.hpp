// derev/fft.hpp
//
// Radix-2 complex FFT with per-size twiddle caching. Sizes are powers of
// two throughout this codebase (512, 1024, and overlap-add convolution
// blocks), so a plain iterative Cooley-Tukey is all we need.

// Copyright 2026

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef DEREV_FFT_HPP
#define DEREV_FFT_HPP

#include <cmath>
#include <complex>
#include <map>
#include <vector>

#include "derev/errors.hpp"
#include "derev/signal.hpp"

namespace derev {

class Fft {
 public:
  explicit Fft(int n) : n_(n) {
    if (!is_power_of_two(n)) throw ConfigError("FFT size must be a power of two");
    bitrev_.resize(n);
    int log2n = 0;
    while ((1 << log2n) < n) ++log2n;
    for (int i = 0; i < n; ++i) {
      int r = 0;
      for (int b = 0; b < log2n; ++b)
        if (i & (1 << b)) r |= 1 << (log2n - 1 - b);
      bitrev_[i] = r;
    }
    tw_.resize(n / 2);
    for (int i = 0; i < n / 2; ++i)
      tw_[i] = std::polar(1.0, -2.0 * M_PI * i / n);
  }

  int size() const { return n_; }

  void forward(std::vector<cplx>& x) const { transform(x, false); }
  void inverse(std::vector<cplx>& x) const {
    transform(x, true);
    const double s = 1.0 / n_;
    for (cplx& v : x) v *= s;
  }

  // Shared per-thread plan cache.
  static const Fft& plan(int n) {
    thread_local std::map<int, Fft> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, Fft(n)).first;
    return it->second;
  }

 private:
  void transform(std::vector<cplx>& x, bool inv) const {
    if (static_cast<int>(x.size()) != n_)
      throw ConfigError("FFT input size mismatch");
    for (int i = 0; i < n_; ++i) {
      const int j = bitrev_[i];
      if (j > i) std::swap(x[i], x[j]);
    }
    for (int len = 2; len <= n_; len <<= 1) {
      const int half = len >> 1;
      const int step = n_ / len;
      for (int base = 0; base < n_; base += len) {
        for (int k = 0; k < half; ++k) {
          cplx w = tw_[k * step];
          if (inv) w = std::conj(w);
          const cplx u = x[base + k];
          const cplx t = x[base + k + half] * w;
          x[base + k] = u + t;
          x[base + k + half] = u - t;
        }
      }
    }
  }

  int n_;
  std::vector<int> bitrev_;
  std::vector<cplx> tw_;
};

// One-sided real FFT: returns n/2+1 bins.
inline std::vector<cplx> rfft(const std::vector<double>& x, int n) {
  std::vector<cplx> buf(n, cplx{0.0, 0.0});
  const std::size_t m = std::min<std::size_t>(x.size(), n);
  for (std::size_t i = 0; i < m; ++i) buf[i] = cplx{x[i], 0.0};
  Fft::plan(n).forward(buf);
  buf.resize(n / 2 + 1);
  return buf;
}

// Inverse of rfft: takes n/2+1 bins, returns n real samples.
inline std::vector<double> irfft(const std::vector<cplx>& bins, int n) {
  if (static_cast<int>(bins.size()) != n / 2 + 1)
    throw ConfigError("irfft: bin count must be n/2+1");
  std::vector<cplx> buf(n);
  for (int k = 0; k <= n / 2; ++k) buf[k] = bins[k];
  for (int k = n / 2 + 1; k < n; ++k) buf[k] = std::conj(bins[n - k]);
  Fft::plan(n).inverse(buf);
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = buf[i].real();
  return out;
}

}  // namespace derev

#endif  // DEREV_FFT_HPP
