// derev/wpe.hpp
//
// Weighted prediction error dereverberation in the STFT domain: delayed
// linear prediction stacks, PSD estimation variants, per-frequency
// weighted normal equations with trace-relative diagonal loading, the
// classic iterative scheme, and the dual-channel virtual-channel variant
// (actual-channel-only PSD, actual output channel kept).

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

#ifndef DEREV_WPE_HPP
#define DEREV_WPE_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "derev/errors.hpp"
#include "derev/signal.hpp"
#include "derev/spg.hpp"
#include "derev/stft.hpp"

namespace derev {

using MatrixXc = Eigen::MatrixXcd;
using VectorXc = Eigen::VectorXcd;

enum class PsdMode { kObserved, kIterative, kOracle, kExternal };

struct WpeConfig {
  int delay = 3;          // LP delay in frames
  int taps = 30;          // K; 0 means passthrough
  int iterations = 3;     // classic iterative mode
  PsdMode psd_mode = PsdMode::kObserved;
  double diag_load = 1e-6;   // relative (trace-scaled) regularization
  double psd_floor = 1e-10;  // relative to per-utterance max PSD

  void validate() const {
    if (delay < 1) throw ConfigError("WpeConfig: delay must be >= 1");
    if (taps < 0) throw ConfigError("WpeConfig: taps must be >= 0");
    if (iterations < 1) throw ConfigError("WpeConfig: iterations must be >= 1");
    if (diag_load < 0) throw ConfigError("WpeConfig: diag_load must be >= 0");
    if (psd_floor <= 0) throw ConfigError("WpeConfig: psd_floor must be > 0");
  }
};

// Per-bin prediction matrices G_f of shape (D*K) x D.
struct LpFilterSet {
  std::vector<MatrixXc> filters;  // one per frequency bin
  int delay = 0;
  int taps = 0;
  int channels = 0;

  bool empty() const { return filters.empty() || taps == 0; }
};

struct PsdEstimate {
  // values[t * bins + k], floored to > 0.
  std::vector<double> values;
  int frames = 0;
  int bins = 0;
  PsdMode mode = PsdMode::kObserved;

  double at(int t, int k) const { return values[static_cast<std::size_t>(t) * bins + k]; }
  double& at(int t, int k) { return values[static_cast<std::size_t>(t) * bins + k]; }
};

// The delayed multichannel stack: entry (t, f, k*D + d) = Y(d, t-delay-k, f),
// zero for out-of-range history.
struct DelayedStack {
  std::vector<cplx> data;
  int frames = 0, bins = 0, channels = 0, taps = 0, delay = 0;

  int dim() const { return channels * taps; }
  cplx at(int t, int f, int i) const {
    return data[(static_cast<std::size_t>(t) * bins + f) * dim() + i];
  }
};

inline DelayedStack build_delayed_stack(const Spectrogram& spec, int delay, int taps) {
  if (taps < 1) throw PreconditionError("build_delayed_stack: taps must be >= 1");
  if (delay < 1) throw PreconditionError("build_delayed_stack: delay must be >= 1");
  DelayedStack s;
  s.frames = spec.frames;
  s.bins = spec.bins;
  s.channels = spec.channels;
  s.taps = taps;
  s.delay = delay;
  s.data.assign(static_cast<std::size_t>(spec.frames) * spec.bins * s.dim(), cplx{0, 0});
  for (int t = 0; t < spec.frames; ++t)
    for (int f = 0; f < spec.bins; ++f)
      for (int k = 0; k < taps; ++k) {
        const int src = t - delay - k;
        if (src < 0) continue;
        for (int d = 0; d < spec.channels; ++d)
          s.data[(static_cast<std::size_t>(t) * spec.bins + f) * s.dim() + k * spec.channels + d] =
              spec.at(d, src, f);
      }
  return s;
}

namespace detail {

inline void floor_psd(PsdEstimate& psd, double floor_rel) {
  double max_v = 0.0;
  for (double v : psd.values) max_v = std::max(max_v, v);
  const double floor = max_v > 0.0 ? floor_rel * max_v : floor_rel;
  for (double& v : psd.values) v = std::max(v, floor);
}

}  // namespace detail

// Channel-averaged |S|^2 of the given spectrogram, floored. Used for the
// observed, iterative (previous output), and oracle (reference) modes;
// the VACE variant passes the actual channel only.
inline PsdEstimate psd_from_spectrogram(const Spectrogram& spec, double floor_rel,
                                        PsdMode tag) {
  PsdEstimate psd;
  psd.frames = spec.frames;
  psd.bins = spec.bins;
  psd.mode = tag;
  psd.values.assign(static_cast<std::size_t>(spec.frames) * spec.bins, 0.0);
  for (int t = 0; t < spec.frames; ++t)
    for (int k = 0; k < spec.bins; ++k) {
      double acc = 0.0;
      for (int d = 0; d < spec.channels; ++d) acc += std::norm(spec.at(d, t, k));
      psd.at(t, k) = acc / spec.channels;
    }
  detail::floor_psd(psd, floor_rel);
  return psd;
}

// External PSD from a log-power-spectra dump (single channel, real part).
inline PsdEstimate load_lps_psd(const std::string& path, double floor_rel) {
  const Spectrogram raw = load_spg(path);
  if (raw.channels != 1)
    throw FormatError(path + ": external PSD dump must be single-channel");
  PsdEstimate psd;
  psd.frames = raw.frames;
  psd.bins = raw.bins;
  psd.mode = PsdMode::kExternal;
  psd.values.resize(raw.data.size());
  for (std::size_t i = 0; i < raw.data.size(); ++i)
    psd.values[i] = std::exp(raw.data[i].real());
  detail::floor_psd(psd, floor_rel);
  return psd;
}

// Dispatcher matching the operation contract. `inputs` is the observed
// spectrogram (observed mode), the previous iteration's output
// (iterative), or the clean/noisy early reference (oracle).
inline PsdEstimate estimate_psd(const Spectrogram& inputs, PsdMode mode,
                                double floor_rel = 1e-10,
                                const PsdEstimate* external = nullptr) {
  if (mode == PsdMode::kExternal) {
    if (external == nullptr)
      throw ConfigError("estimate_psd: external mode requires a provided estimate");
    if (external->frames != inputs.frames || external->bins != inputs.bins)
      throw ConfigError("estimate_psd: external PSD shape mismatch");
    PsdEstimate psd = *external;
    psd.mode = PsdMode::kExternal;
    detail::floor_psd(psd, floor_rel);
    return psd;
  }
  if (external != nullptr)
    throw ConfigError("estimate_psd: external estimate given for a non-external mode");
  return psd_from_spectrogram(inputs, floor_rel, mode);
}

// Solves the per-bin weighted normal equations
//   R_f = sum_t y~ y~^H / lambda,  P_f = sum_t y~ y^H / lambda,
//   (R_f + eps * tr(R_f)/(DK) * I) G_f = P_f
// via a Hermitian positive-definite factorization, falling back to a
// least-squares solve before raising a numerical error.
inline LpFilterSet wpe_filter_estimate(const Spectrogram& spec, const PsdEstimate& psd,
                                       const WpeConfig& config) {
  config.validate();
  LpFilterSet set;
  set.delay = config.delay;
  set.taps = config.taps;
  set.channels = spec.channels;
  if (config.taps == 0) return set;
  if (psd.frames != spec.frames || psd.bins != spec.bins)
    throw ConfigError("wpe_filter_estimate: PSD shape mismatch");

  const int D = spec.channels;
  const int K = config.taps;
  const int DK = D * K;
  const int T = spec.frames;
  set.filters.resize(spec.bins);

  MatrixXc stacks(DK, T);   // weighted delayed stacks, one column per frame
  MatrixXc current(D, T);   // weighted current frames
  for (int f = 0; f < spec.bins; ++f) {
    for (int t = 0; t < T; ++t) {
      const double w = 1.0 / std::sqrt(psd.at(t, f));
      for (int k = 0; k < K; ++k) {
        const int src = t - config.delay - k;
        for (int d = 0; d < D; ++d)
          stacks(k * D + d, t) = src >= 0 ? spec.at(d, src, f) * w : cplx{0, 0};
      }
      for (int d = 0; d < D; ++d) current(d, t) = spec.at(d, t, f) * w;
    }
    MatrixXc R = stacks * stacks.adjoint();
    const MatrixXc P = stacks * current.adjoint();
    const double load = config.diag_load * R.trace().real() / DK;
    R.diagonal().array() += load;

    Eigen::LLT<MatrixXc> llt(R);
    MatrixXc G;
    if (llt.info() == Eigen::Success) {
      G = llt.solve(P);
    } else {
      G = R.completeOrthogonalDecomposition().solve(P);
    }
    if (!G.allFinite())
      throw NumericalError("wpe_filter_estimate: solve failed at bin " + std::to_string(f), f);
    set.filters[f] = std::move(G);
  }
  return set;
}

// Z_{t,f} = Y_{t,f} - G_f^H Y~_{t-delay,f}; empty filters pass through.
inline Spectrogram wpe_apply(const Spectrogram& spec, const LpFilterSet& filters) {
  if (filters.empty()) return spec;
  if (static_cast<int>(filters.filters.size()) != spec.bins ||
      filters.channels != spec.channels)
    throw ConfigError("wpe_apply: filter dimensions disagree with input");

  const int D = spec.channels;
  const int K = filters.taps;
  Spectrogram out = spec;
  VectorXc stack(D * K), y(D);
  for (int f = 0; f < spec.bins; ++f) {
    const MatrixXc& G = filters.filters[f];
    for (int t = 0; t < spec.frames; ++t) {
      for (int k = 0; k < K; ++k) {
        const int src = t - filters.delay - k;
        for (int d = 0; d < D; ++d)
          stack(k * D + d) = src >= 0 ? spec.at(d, src, f) : cplx{0, 0};
      }
      for (int d = 0; d < D; ++d) y(d) = spec.at(d, t, f);
      const VectorXc z = y - G.adjoint() * stack;
      for (int d = 0; d < D; ++d) out.at(d, t, f) = z(d);
    }
  }
  return out;
}

// Single pass: estimate filters from the given PSD and apply.
inline Spectrogram wpe_single_pass(const Spectrogram& spec, const PsdEstimate& psd,
                                   const WpeConfig& config) {
  return wpe_apply(spec, wpe_filter_estimate(spec, psd, config));
}

// Classic iterative WPE: PSD initialized from the observed signal, then
// re-estimated from the previous iteration's output.
inline Spectrogram iterative_wpe(const Spectrogram& spec, const WpeConfig& config) {
  config.validate();
  PsdEstimate psd = psd_from_spectrogram(spec, config.psd_floor, PsdMode::kObserved);
  Spectrogram z = spec;
  for (int it = 0; it < config.iterations; ++it) {
    z = wpe_single_pass(spec, psd, config);
    if (it + 1 < config.iterations)
      psd = psd_from_spectrogram(z, config.psd_floor, PsdMode::kIterative);
  }
  return z;
}

// Dual-channel pass over [actual; virtual] with the simplified PSD
// (actual channel only); returns the actual output channel.
inline Spectrogram vace_wpe(const Spectrogram& actual, const Spectrogram& virt,
                            const WpeConfig& config, const PsdEstimate& psd) {
  config.validate();
  if (!actual.same_shape(virt))
    throw ConfigError("vace_wpe: actual/virtual shape mismatch");
  if (actual.channels != 1)
    throw ConfigError("vace_wpe: actual signal must be single-channel");
  if (config.taps == 0) return actual;

  Spectrogram stacked(2, actual.frames, actual.bins, actual.config,
                      actual.sample_rate, actual.source_length);
  for (int t = 0; t < actual.frames; ++t)
    for (int k = 0; k < actual.bins; ++k) {
      stacked.at(0, t, k) = actual.at(0, t, k);
      stacked.at(1, t, k) = virt.at(0, t, k);
    }
  const Spectrogram z = wpe_single_pass(stacked, psd, config);
  return z.channel_view(0);
}

// Convenience: the default VACE PSD per the simplified routine.
inline PsdEstimate vace_default_psd(const Spectrogram& actual, const WpeConfig& config) {
  return psd_from_spectrogram(actual, config.psd_floor, PsdMode::kObserved);
}

// ---- virtual-channel sources ----

enum class VirtualKind { kFile, kDelayedCopy, kFilteredCopy };

// Frame-delayed copy of the actual channel (zero-filled history).
inline Spectrogram virtual_delayed_copy(const Spectrogram& actual, int delay_frames) {
  Spectrogram out = actual;
  for (int t = 0; t < actual.frames; ++t)
    for (int k = 0; k < actual.bins; ++k) {
      const int src = t - delay_frames;
      out.at(0, t, k) = (src >= 0 && src < actual.frames) ? actual.at(0, src, k) : cplx{0, 0};
    }
  return out;
}

// FIR along the frame axis: out_t = sum_k taps[k] * Y_{t-k}.
inline Spectrogram virtual_filtered_copy(const Spectrogram& actual,
                                         const std::vector<cplx>& taps) {
  Spectrogram out = actual;
  for (int t = 0; t < actual.frames; ++t)
    for (int k = 0; k < actual.bins; ++k) {
      cplx acc{0, 0};
      for (std::size_t j = 0; j < taps.size(); ++j) {
        const int src = t - static_cast<int>(j);
        if (src >= 0) acc += taps[j] * actual.at(0, src, k);
      }
      out.at(0, t, k) = acc;
    }
  return out;
}

// Spectrogram dump or WAV file; shape must match the actual channel.
inline Spectrogram virtual_from_file(const std::string& path, const Spectrogram& actual) {
  Spectrogram v;
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".spg") {
    v = load_spg(path);
    v.config = actual.config;
    v.sample_rate = actual.sample_rate;
    v.source_length = actual.source_length;
  } else {
    v = stft(load_wav(path), actual.config);
  }
  if (!v.same_shape(actual))
    throw FormatError(path + ": virtual channel shape does not match the actual channel");
  return v;
}

}  // namespace derev

#endif  // DEREV_WPE_HPP
