// derev/room.hpp
//
// Signal-model simulator: RIR early/late split, synthetic exponential-decay
// RIRs, convolution, and noise mixing at a target SNR. Produces aligned
// ground-truth components (observed = early + late + noise).

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

#ifndef DEREV_ROOM_HPP
#define DEREV_ROOM_HPP

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "derev/errors.hpp"
#include "derev/fft.hpp"
#include "derev/signal.hpp"

namespace derev {

struct RirBundle {
  TimeSignal impulse_response;
  std::size_t main_peak_index = 0;   // argmax |h| on channel 0
  std::size_t early_boundary = 0;    // samples after the main peak
  TimeSignal early_rir;
  TimeSignal late_rir;
};

struct ObservationSet {
  TimeSignal observed;     // y
  TimeSignal early_clean;  // x^(early)
  TimeSignal late;         // x^(late)
  TimeSignal early_noisy;  // y^(early) = x^(early) + n
  TimeSignal noise;        // n (scaled)
  double snr_db = 0.0;     // realized SNR
};

// Splits the RIR at main_peak + boundary; early + late == rir sample-exact.
// The split index comes from channel 0 and is shared by all channels.
inline RirBundle split_rir(const TimeSignal& rir, double boundary_ms) {
  rir.validate();
  if (rir.length() == 0) throw PreconditionError("split_rir: empty RIR");
  if (boundary_ms <= 0) throw PreconditionError("split_rir: boundary must be > 0");

  const std::vector<double>& h0 = rir.samples[0];
  std::size_t peak = 0;
  for (std::size_t i = 1; i < h0.size(); ++i)
    if (std::fabs(h0[i]) > std::fabs(h0[peak])) peak = i;

  const std::size_t boundary = static_cast<std::size_t>(
      std::llround(boundary_ms * rir.sample_rate / 1000.0));
  const std::size_t split = std::min(peak + boundary, rir.length());

  RirBundle b;
  b.impulse_response = rir;
  b.main_peak_index = peak;
  b.early_boundary = boundary;
  b.early_rir = rir;
  b.late_rir = rir;
  for (int c = 0; c < rir.channels(); ++c) {
    for (std::size_t i = split; i < rir.length(); ++i) b.early_rir.samples[c][i] = 0.0;
    for (std::size_t i = 0; i < split; ++i) b.late_rir.samples[c][i] = 0.0;
  }
  return b;
}

// Synthetic RIR: dominant direct-path tap followed by a white-noise tail
// shaped by exp(-6.9077 t / T60), peak normalized to 1. Deterministic in
// the seed.
inline TimeSignal synth_rir(double t60_ms, double direct_delay_ms, double length_ms,
                            uint64_t seed, int sample_rate = 16000) {
  if (t60_ms <= 0) throw PreconditionError("synth_rir: t60 must be > 0");
  const std::size_t len = static_cast<std::size_t>(
      std::llround(length_ms * sample_rate / 1000.0));
  const std::size_t d = std::min<std::size_t>(
      static_cast<std::size_t>(std::llround(direct_delay_ms * sample_rate / 1000.0)),
      len > 0 ? len - 1 : 0);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> h(len, 0.0);
  const double decay = 6.9077552789821368;  // ln(10^3): -60 dB at T60
  double tail_max = 0.0;
  for (std::size_t i = d + 1; i < len; ++i) {
    const double t_ms = (i - d) * 1000.0 / sample_rate;
    h[i] = gauss(rng) * std::exp(-decay * t_ms / t60_ms);
    tail_max = std::max(tail_max, std::fabs(h[i]));
  }
  // Keep the direct tap dominant, then scale the tail to a plausible
  // direct-to-reverberant level.
  if (tail_max > 0.0) {
    const double s = 0.6 / tail_max;
    for (std::size_t i = d + 1; i < len; ++i) h[i] *= s;
  }
  if (!h.empty()) h[d] = 1.0;
  return TimeSignal::mono(std::move(h), sample_rate);
}

namespace detail {

inline std::vector<double> convolve_direct(const std::vector<double>& x,
                                           const std::vector<double>& h,
                                           std::size_t out_len) {
  std::vector<double> y(out_len, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const std::size_t jmax = std::min(h.size(), out_len - std::min(out_len, i));
    for (std::size_t j = 0; j < jmax && i + j < out_len; ++j) y[i + j] += xi * h[j];
  }
  return y;
}

inline std::vector<double> convolve_fft(const std::vector<double>& x,
                                        const std::vector<double>& h,
                                        std::size_t out_len) {
  std::size_t n = 1;
  while (n < x.size() + h.size()) n <<= 1;
  std::vector<cplx> X(n, cplx{0, 0}), H(n, cplx{0, 0});
  for (std::size_t i = 0; i < x.size(); ++i) X[i] = cplx{x[i], 0.0};
  for (std::size_t i = 0; i < h.size(); ++i) H[i] = cplx{h[i], 0.0};
  const Fft& plan = Fft::plan(static_cast<int>(n));
  plan.forward(X);
  plan.forward(H);
  for (std::size_t i = 0; i < n; ++i) X[i] *= H[i];
  plan.inverse(X);
  std::vector<double> y(out_len, 0.0);
  for (std::size_t i = 0; i < out_len && i < n; ++i) y[i] = X[i].real();
  return y;
}

}  // namespace detail

// Full linear convolution truncated to the source length. A mono source
// against a multichannel RIR yields one output channel per RIR channel.
inline TimeSignal convolve(const TimeSignal& source, const TimeSignal& rir) {
  source.validate();
  rir.validate();
  if (source.channels() != 1 && rir.channels() != 1)
    throw PreconditionError("convolve: source must be mono for a multichannel RIR");
  if (source.sample_rate != rir.sample_rate)
    throw PreconditionError("convolve: sample rates differ");

  const std::size_t out_len = source.length();
  const bool use_fft = source.length() > 4096 || rir.length() > 4096;

  TimeSignal out;
  out.sample_rate = source.sample_rate;
  const int nch = std::max(source.channels(), rir.channels());
  for (int c = 0; c < nch; ++c) {
    const std::vector<double>& x = source.samples[source.channels() == 1 ? 0 : c];
    const std::vector<double>& h = rir.samples[rir.channels() == 1 ? 0 : c];
    out.samples.push_back(use_fft ? detail::convolve_fft(x, h, out_len)
                                  : detail::convolve_direct(x, h, out_len));
  }
  return out;
}

// Scales the noise so that 10*log10(E_speech / E_noise) == snr_db, then
// mixes. Noise shorter than the speech is tiled with a seeded circular
// offset; longer noise is cropped at a seeded offset.
inline std::pair<TimeSignal, TimeSignal> mix_at_snr(const TimeSignal& speech,
                                                    const TimeSignal& noise,
                                                    double snr_db,
                                                    uint64_t seed = 0) {
  speech.validate();
  noise.validate();
  const double e_speech = energy(speech);
  if (e_speech <= 0.0) throw DegenerateInputError("mix_at_snr: silent speech");
  if (energy(noise) <= 0.0) throw DegenerateInputError("mix_at_snr: silent noise");

  std::mt19937_64 rng(seed);
  const std::size_t L = speech.length();
  TimeSignal n;
  n.sample_rate = speech.sample_rate;
  for (int c = 0; c < speech.channels(); ++c) {
    const std::vector<double>& src = noise.samples[noise.channels() == 1 ? 0 : c % noise.channels()];
    std::vector<double> ch(L);
    if (src.size() >= L) {
      std::uniform_int_distribution<std::size_t> crop(0, src.size() - L);
      const std::size_t off = crop(rng);
      for (std::size_t i = 0; i < L; ++i) ch[i] = src[off + i];
    } else {
      std::uniform_int_distribution<std::size_t> rot(0, src.size() - 1);
      const std::size_t off = rot(rng);
      for (std::size_t i = 0; i < L; ++i) ch[i] = src[(off + i) % src.size()];
    }
    n.samples.push_back(std::move(ch));
  }
  const double e_noise = energy(n);
  if (e_noise <= 0.0) throw DegenerateInputError("mix_at_snr: silent noise segment");

  const double scale = std::sqrt(e_speech / (e_noise * std::pow(10.0, snr_db / 10.0)));
  for (auto& ch : n.samples)
    for (double& v : ch) v *= scale;

  TimeSignal noisy = speech;
  for (int c = 0; c < speech.channels(); ++c)
    for (std::size_t i = 0; i < L; ++i) noisy.samples[c][i] += n.samples[c][i];
  return {std::move(noisy), std::move(n)};
}

// Runs the full signal model. SNR is defined against the reverberant
// speech (early + late), not the dry source.
inline ObservationSet simulate(const TimeSignal& source, const RirBundle& rir,
                               const TimeSignal& noise, double snr_db,
                               uint64_t seed = 0) {
  ObservationSet obs;
  obs.early_clean = convolve(source, rir.early_rir);
  obs.late = convolve(source, rir.late_rir);

  TimeSignal reverberant = obs.early_clean;
  for (int c = 0; c < reverberant.channels(); ++c)
    for (std::size_t i = 0; i < reverberant.length(); ++i)
      reverberant.samples[c][i] += obs.late.samples[c][i];

  auto [noisy, scaled_noise] = mix_at_snr(reverberant, noise, snr_db, seed);
  obs.noise = std::move(scaled_noise);

  obs.observed = obs.early_clean;
  obs.early_noisy = obs.early_clean;
  for (int c = 0; c < obs.observed.channels(); ++c)
    for (std::size_t i = 0; i < obs.observed.length(); ++i) {
      obs.observed.samples[c][i] =
          obs.early_clean.samples[c][i] + obs.late.samples[c][i] + obs.noise.samples[c][i];
      obs.early_noisy.samples[c][i] =
          obs.early_clean.samples[c][i] + obs.noise.samples[c][i];
    }

  const double e_n = energy(obs.noise);
  obs.snr_db = e_n > 0.0 ? 10.0 * std::log10(energy(reverberant) / e_n) : 120.0;
  return obs;
}

}  // namespace derev

#endif  // DEREV_ROOM_HPP
