// derev/stft.hpp
//
// Invertible STFT analysis/synthesis. Analysis windows a symmetric
// sqrt-Hann frame (zero-padded to fft_len); synthesis overlap-adds the
// same window and divides by the accumulated window-product, so
// istft(stft(x)) is an identity on the interior for every hop that keeps
// the overlap denominator bounded away from zero.

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

#ifndef DEREV_STFT_HPP
#define DEREV_STFT_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "derev/errors.hpp"
#include "derev/fft.hpp"
#include "derev/signal.hpp"

namespace derev {

// Steady-state overlap denominator sum(w_a * w_s) over one hop period.
// Returns {min, max} over the interior of a multi-frame probe.
inline std::pair<double, double> overlap_denominator_range(const StftConfig& c) {
  const std::vector<double> w = make_window(c.window, c.frame_len);
  const int nframes = 8 + c.frame_len / c.hop_len;
  const int len = (nframes - 1) * c.hop_len + c.frame_len;
  std::vector<double> den(len, 0.0);
  for (int t = 0; t < nframes; ++t)
    for (int i = 0; i < c.frame_len; ++i) den[t * c.hop_len + i] += w[i] * w[i];
  double lo = 1e300, hi = 0.0;
  for (int i = c.frame_len; i < len - c.frame_len; ++i) {
    lo = std::min(lo, den[i]);
    hi = std::max(hi, den[i]);
  }
  return {lo, hi};
}

inline void StftConfig::validate() const {
  if (frame_len <= 0 || hop_len <= 0) throw ConfigError("frame/hop must be positive");
  if (hop_len > frame_len) throw ConfigError("hop_len must be <= frame_len");
  if (fft_len < frame_len) throw ConfigError("fft_len must be >= frame_len");
  if (!is_power_of_two(fft_len)) throw ConfigError("fft_len must be a power of two");
  // Normalized overlap-add: the per-sample denominator must stay bounded
  // away from zero or synthesis cannot reach the 1e-6 reconstruction bound.
  const auto [lo, hi] = overlap_denominator_range(*this);
  if (!(lo > 1e-6 * hi) || hi <= 0.0)
    throw ConfigError("window/hop pair violates the overlap-add condition");
}

namespace detail {

// Reflection padding index (edge sample not repeated).
inline std::size_t reflect_index(long long q, std::size_t len) {
  if (len == 1) return 0;
  const long long period = 2 * (static_cast<long long>(len) - 1);
  q = ((q % period) + period) % period;
  if (q >= static_cast<long long>(len)) q = period - q;
  return static_cast<std::size_t>(q);
}

}  // namespace detail

inline Spectrogram stft(const TimeSignal& signal, const StftConfig& config) {
  signal.validate();
  config.validate();
  if (signal.length() < 1) throw PreconditionError("stft: empty signal");

  const int L = static_cast<int>(signal.length());
  const int pad = config.center_pad ? config.frame_len / 2 : 0;
  const int padded = L + 2 * pad;
  const int frames =
      padded >= config.frame_len ? (padded - config.frame_len) / config.hop_len + 1 : 1;
  const std::vector<double> win = make_window(config.window, config.frame_len);

  Spectrogram out(signal.channels(), frames, config.bins(), config,
                  signal.sample_rate, L);
  std::vector<double> frame(config.frame_len);
  for (int c = 0; c < signal.channels(); ++c) {
    const std::vector<double>& x = signal.samples[c];
    for (int t = 0; t < frames; ++t) {
      const long long start = static_cast<long long>(t) * config.hop_len - pad;
      for (int i = 0; i < config.frame_len; ++i) {
        const long long q = start + i;
        double v;
        if (config.center_pad) {
          v = x[detail::reflect_index(q, x.size())];
        } else {
          v = (q >= 0 && q < L) ? x[static_cast<std::size_t>(q)] : 0.0;
        }
        frame[i] = v * win[i];
      }
      const std::vector<cplx> bins = rfft(frame, config.fft_len);
      for (int k = 0; k < config.bins(); ++k) out.at(c, t, k) = bins[k];
    }
  }
  return out;
}

inline TimeSignal istft(const Spectrogram& spec) {
  const StftConfig& c = spec.config;
  c.validate();
  if (spec.channels <= 0 || spec.frames <= 0 || spec.bins != c.bins())
    throw PreconditionError("istft: inconsistent spectrogram");

  const int pad = c.center_pad ? c.frame_len / 2 : 0;
  const int L = spec.source_length > 0
                    ? spec.source_length
                    : (spec.frames - 1) * c.hop_len + c.frame_len - 2 * pad;
  const int total = (spec.frames - 1) * c.hop_len + c.frame_len;
  const std::vector<double> win = make_window(c.window, c.frame_len);

  TimeSignal out;
  out.sample_rate = spec.sample_rate;
  std::vector<cplx> bins(c.bins());
  for (int ch = 0; ch < spec.channels; ++ch) {
    std::vector<double> acc(total, 0.0), den(total, 0.0);
    for (int t = 0; t < spec.frames; ++t) {
      for (int k = 0; k < c.bins(); ++k) bins[k] = spec.at(ch, t, k);
      const std::vector<double> frame = irfft(bins, c.fft_len);
      const int base = t * c.hop_len;
      for (int i = 0; i < c.frame_len; ++i) {
        acc[base + i] += frame[i] * win[i];
        den[base + i] += win[i] * win[i];
      }
    }
    std::vector<double> x(L, 0.0);
    for (int i = 0; i < L; ++i) {
      const int j = i + pad;
      if (j < total && den[j] > 1e-12) x[i] = acc[j] / den[j];
    }
    out.samples.push_back(std::move(x));
  }
  return out;
}

}  // namespace derev

#endif  // DEREV_STFT_HPP
