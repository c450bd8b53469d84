// derev/signal.hpp
//
// Time-domain signal container, STFT configuration, and the complex
// spectrogram tensor shared by every other module.

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

#ifndef DEREV_SIGNAL_HPP
#define DEREV_SIGNAL_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "derev/errors.hpp"

namespace derev {

using cplx = std::complex<double>;

struct TimeSignal {
  // samples[channel][sample], nominal amplitude range [-1, 1].
  std::vector<std::vector<double>> samples;
  int sample_rate = 16000;

  int channels() const { return static_cast<int>(samples.size()); }
  std::size_t length() const { return samples.empty() ? 0 : samples[0].size(); }

  static TimeSignal mono(std::vector<double> data, int rate) {
    TimeSignal s;
    s.samples.push_back(std::move(data));
    s.sample_rate = rate;
    return s;
  }

  const std::vector<double>& chan(int c) const { return samples.at(c); }
  std::vector<double>& chan(int c) { return samples.at(c); }

  TimeSignal channel_view(int c) const {
    return TimeSignal::mono(samples.at(c), sample_rate);
  }

  void validate() const {
    if (sample_rate <= 0) throw PreconditionError("sample_rate must be > 0");
    if (samples.empty()) throw PreconditionError("signal has no channels");
    for (const auto& ch : samples)
      if (ch.size() != samples[0].size())
        throw PreconditionError("channels have unequal lengths");
  }
};

inline double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

inline double energy(const TimeSignal& s) {
  double e = 0.0;
  for (const auto& ch : s.samples) e += energy(ch);
  return e;
}

inline double max_abs(const TimeSignal& s) {
  double m = 0.0;
  for (const auto& ch : s.samples)
    for (double v : ch) m = std::max(m, std::fabs(v));
  return m;
}

// Relative L2 distance ||a-b|| / ||a||, over all channels.
inline double rel_l2(const TimeSignal& a, const TimeSignal& b) {
  if (a.channels() != b.channels() || a.length() != b.length())
    throw AlignmentError("rel_l2: shape mismatch");
  double num = 0.0, den = 0.0;
  for (int c = 0; c < a.channels(); ++c)
    for (std::size_t i = 0; i < a.length(); ++i) {
      const double d = a.samples[c][i] - b.samples[c][i];
      num += d * d;
      den += a.samples[c][i] * a.samples[c][i];
    }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

enum class Window { kSqrtHann, kHann, kRect };

struct StftConfig {
  int frame_len = 1024;
  int hop_len = 256;
  int fft_len = 1024;
  Window window = Window::kSqrtHann;
  bool center_pad = true;

  int bins() const { return fft_len / 2 + 1; }

  void validate() const;  // defined in stft.hpp (needs the COLA probe)

  // 64 ms / 16 ms / 1024 at 16 kHz -- the dereverberation-side analysis.
  static StftConfig wpe_16k() { return StftConfig{1024, 256, 1024, Window::kSqrtHann, true}; }
  // 25 ms / 10 ms / 512 at 16 kHz -- the feature-side analysis.
  static StftConfig feature_16k() { return StftConfig{400, 160, 512, Window::kSqrtHann, true}; }
};

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Symmetric window of length n; sqrt-Hann keeps analysis == synthesis.
inline std::vector<double> make_window(Window w, int n) {
  std::vector<double> win(n, 1.0);
  if (w == Window::kRect || n == 1) return win;
  for (int i = 0; i < n; ++i) {
    const double h = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / (n - 1)));
    win[i] = (w == Window::kHann) ? h : std::sqrt(h);
  }
  return win;
}

struct Spectrogram {
  // coefficients in (channel, frame, bin) order.
  std::vector<cplx> data;
  int channels = 0;
  int frames = 0;
  int bins = 0;
  StftConfig config;
  int sample_rate = 16000;
  // Number of time-domain samples this spectrogram represents; lets
  // istft reproduce the exact source length.
  int source_length = 0;

  Spectrogram() = default;
  Spectrogram(int c, int t, int k, StftConfig cfg, int rate, int src_len)
      : data(static_cast<std::size_t>(c) * t * k, cplx{0.0, 0.0}),
        channels(c), frames(t), bins(k), config(cfg),
        sample_rate(rate), source_length(src_len) {}

  cplx& at(int c, int t, int k) {
    return data[(static_cast<std::size_t>(c) * frames + t) * bins + k];
  }
  const cplx& at(int c, int t, int k) const {
    return data[(static_cast<std::size_t>(c) * frames + t) * bins + k];
  }

  bool same_shape(const Spectrogram& o) const {
    return channels == o.channels && frames == o.frames && bins == o.bins;
  }

  Spectrogram channel_view(int c) const {
    Spectrogram out(1, frames, bins, config, sample_rate, source_length);
    for (int t = 0; t < frames; ++t)
      for (int k = 0; k < bins; ++k) out.at(0, t, k) = at(c, t, k);
    return out;
  }
};

inline double energy(const Spectrogram& s) {
  double e = 0.0;
  for (const cplx& v : s.data) e += std::norm(v);
  return e;
}

inline double rel_l2(const Spectrogram& a, const Spectrogram& b) {
  if (!a.same_shape(b)) throw AlignmentError("rel_l2: spectrogram shape mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    num += std::norm(a.data[i] - b.data[i]);
    den += std::norm(a.data[i]);
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace derev

#endif  // DEREV_SIGNAL_HPP
