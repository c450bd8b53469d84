// derev/losses.hpp
//
// Loss functionals over spectrogram/waveform pairs (L1: RI-MSE +
// log-magnitude MSE + waveform MAE; L2: L1 + MFCC MAE), negative cosine
// similarity over embeddings, their composites (pretrain, fine-tune, TSO,
// distortion-regularized), and oracle quality metrics (log-spectral
// distance, component SNR).

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

#ifndef DEREV_LOSSES_HPP
#define DEREV_LOSSES_HPP

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "derev/errors.hpp"
#include "derev/features.hpp"
#include "derev/signal.hpp"

namespace derev {

struct LossWeights {
  double alpha = 1.0;
  double beta = 0.04;
  double gamma = 5.0;
  double eta = 0.0;

  static LossWeights pretrain() { return {1.0, 0.04, 5.0, 0.0}; }
  static LossWeights finetune() { return {1.0, 0.1, 5.0, 0.2}; }

  void validate() const {
    if (alpha < 0 || beta < 0 || gamma < 0 || eta < 0 ||
        !std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(gamma) ||
        !std::isfinite(eta))
      throw ConfigError("LossWeights must be finite and nonnegative");
  }
};

namespace detail {

inline double log_magnitude(const cplx& v) {
  return 0.5 * std::log(std::max(std::norm(v), kLogPowerFloor));
}

}  // namespace detail

inline double l1_loss(const Spectrogram& a_spec, const Spectrogram& b_spec,
                      const TimeSignal& a_time, const TimeSignal& b_time,
                      const LossWeights& w) {
  w.validate();
  if (!a_spec.same_shape(b_spec)) throw ConfigError("l1_loss: spectrogram shape mismatch");
  if (a_time.channels() != b_time.channels() || a_time.length() != b_time.length())
    throw ConfigError("l1_loss: waveform shape mismatch");

  double mse_ri = 0.0, mse_logmag = 0.0;
  for (std::size_t i = 0; i < a_spec.data.size(); ++i) {
    const cplx& a = a_spec.data[i];
    const cplx& b = b_spec.data[i];
    const double dr = a.real() - b.real();
    const double di = a.imag() - b.imag();
    mse_ri += dr * dr + di * di;  // MSE(A^r,B^r) + MSE(A^i,B^i), shared denominator
    const double dl = detail::log_magnitude(a) - detail::log_magnitude(b);
    mse_logmag += dl * dl;
  }
  const double n_spec = static_cast<double>(a_spec.data.size());
  mse_ri /= n_spec;
  mse_logmag /= n_spec;

  double mae_time = 0.0;
  std::size_t n_time = 0;
  for (int c = 0; c < a_time.channels(); ++c)
    for (std::size_t i = 0; i < a_time.length(); ++i) {
      mae_time += std::fabs(a_time.samples[c][i] - b_time.samples[c][i]);
      ++n_time;
    }
  mae_time /= static_cast<double>(n_time);

  return w.alpha * mse_ri + w.beta * mse_logmag + w.gamma * mae_time;
}

inline double mfcc_mae(const Spectrogram& a_spec, const Spectrogram& b_spec,
                       int bands = 64, int coeffs = 20) {
  const FeatureMatrix ma = mfcc(log_mfbe(a_spec, bands), coeffs);
  const FeatureMatrix mb = mfcc(log_mfbe(b_spec, bands), coeffs);
  double acc = 0.0;
  for (std::size_t i = 0; i < ma.values.size(); ++i)
    acc += std::fabs(ma.values[i] - mb.values[i]);
  return acc / static_cast<double>(ma.values.size());
}

inline double l2_loss(const Spectrogram& a_spec, const Spectrogram& b_spec,
                      const TimeSignal& a_time, const TimeSignal& b_time,
                      const LossWeights& w) {
  double loss = l1_loss(a_spec, b_spec, a_time, b_time, w);
  if (w.eta > 0.0) loss += w.eta * mfcc_mae(a_spec, b_spec);
  return loss;
}

inline double ncs_loss(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size())
    throw ConfigError("ncs_loss: dimension mismatch");
  if (a.norm <= 0.0 || b.norm <= 0.0)
    throw DegenerateInputError("ncs_loss: zero-norm embedding");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
  return -dot / (a.norm * b.norm);
}

// ---- composite losses ----
// The engine is run externally; these aggregate already-processed signals.

struct SignalPair {
  Spectrogram spec;
  TimeSignal time;
};

using EmbeddingProvider = std::function<EmbeddingVector(const TimeSignal&)>;

struct CompositeInputs {
  // pretrain: raw virtual-channel-generator outputs vs the late target
  std::optional<SignalPair> gen_from_clean;   // G(X_1)
  std::optional<SignalPair> gen_from_noisy;   // G(Y_1)
  std::optional<SignalPair> late_target;      // X_1^(late)

  // fine-tune / TSO: full front-end outputs
  std::optional<SignalPair> proc_clean;        // V(X_1)
  std::optional<SignalPair> proc_noisy;        // V(Y_1)
  std::optional<SignalPair> early_clean;       // X_1^(early)
  std::optional<SignalPair> early_noisy;       // Y_1^(early)

  // distortion regularization: front-end outputs on early-only inputs
  std::optional<SignalPair> proc_early_clean;  // V(X_1^(early))
  std::optional<SignalPair> proc_early_noisy;  // V(Y_1^(early))
};

struct CompositeLosses {
  std::optional<double> l_pt;
  std::optional<double> l_ft;
  std::optional<double> l_tso;
  std::optional<double> l_dr;
  std::optional<double> l_dr_tso;
};

inline CompositeLosses composite_losses(const CompositeInputs& in,
                                        const EmbeddingProvider& embed,
                                        const LossWeights& pretrain_w = LossWeights::pretrain(),
                                        const LossWeights& finetune_w = LossWeights::finetune()) {
  CompositeLosses out;
  if (in.gen_from_clean && in.gen_from_noisy && in.late_target) {
    out.l_pt = l1_loss(in.gen_from_clean->spec, in.late_target->spec,
                       in.gen_from_clean->time, in.late_target->time, pretrain_w) +
               l1_loss(in.gen_from_noisy->spec, in.late_target->spec,
                       in.gen_from_noisy->time, in.late_target->time, pretrain_w);
  }
  if (in.proc_clean && in.proc_noisy && in.early_clean && in.early_noisy) {
    out.l_ft = l2_loss(in.proc_clean->spec, in.early_clean->spec,
                       in.proc_clean->time, in.early_clean->time, finetune_w) +
               l2_loss(in.proc_noisy->spec, in.early_noisy->spec,
                       in.proc_noisy->time, in.early_noisy->time, finetune_w);
  }
  if (in.proc_clean && in.proc_noisy && in.early_clean) {
    if (!embed) throw ConfigError("composite_losses: embedding provider required");
    const EmbeddingVector target = embed(in.early_clean->time);
    out.l_tso = ncs_loss(embed(in.proc_clean->time), target) +
                ncs_loss(embed(in.proc_noisy->time), target);
  }
  if (in.proc_early_clean && in.proc_early_noisy && in.early_clean && in.early_noisy) {
    if (!embed) throw ConfigError("composite_losses: embedding provider required");
    out.l_dr = ncs_loss(embed(in.proc_early_clean->time), embed(in.early_clean->time)) +
               ncs_loss(embed(in.proc_early_noisy->time), embed(in.early_noisy->time));
  }
  if (out.l_tso && out.l_dr) out.l_dr_tso = *out.l_tso + *out.l_dr;
  return out;
}

// ---- oracle quality metrics ----

// RMS over frames of the per-frame RMS difference of 10*log10 power
// spectra, in dB (floored).
inline double log_spectral_distance(const Spectrogram& a, const Spectrogram& b) {
  if (!a.same_shape(b)) throw ConfigError("log_spectral_distance: shape mismatch");
  double acc_frames = 0.0;
  for (int c = 0; c < a.channels; ++c)
    for (int t = 0; t < a.frames; ++t) {
      double acc_bins = 0.0;
      for (int k = 0; k < a.bins; ++k) {
        const double pa = 10.0 * std::log10(std::max(std::norm(a.at(c, t, k)), kLogPowerFloor));
        const double pb = 10.0 * std::log10(std::max(std::norm(b.at(c, t, k)), kLogPowerFloor));
        acc_bins += (pa - pb) * (pa - pb);
      }
      acc_frames += acc_bins / a.bins;
    }
  return std::sqrt(acc_frames / (static_cast<double>(a.channels) * a.frames));
}

constexpr double kSnrCapDb = 120.0;

// Ground-truth component SNR, capped at +120 dB for vanishing residuals.
inline double oracle_snr(const TimeSignal& component_speech,
                         const TimeSignal& component_residual) {
  const double e_s = energy(component_speech);
  if (e_s <= 0.0) throw DegenerateInputError("oracle_snr: silent speech component");
  const double e_r = energy(component_residual);
  if (e_r <= 0.0) return kSnrCapDb;
  return std::min(kSnrCapDb, 10.0 * std::log10(e_s / e_r));
}

}  // namespace derev

#endif  // DEREV_LOSSES_HPP
