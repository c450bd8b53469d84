// derev/features.hpp
//
// Acoustic features: HTK-mel log filterbank energies, orthonormal DCT-II
// MFCCs, sliding-window mean subtraction, and the deterministic toy
// embedding (mean/std of SWMS-normalized 64D log-MFBE) standing in for a
// trained speaker-embedding network. Embedding tables are plain text.

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

#ifndef DEREV_FEATURES_HPP
#define DEREV_FEATURES_HPP

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "derev/errors.hpp"
#include "derev/signal.hpp"
#include "derev/stft.hpp"

namespace derev {

constexpr double kLogPowerFloor = 1e-10;  // absolute floor on power before log

enum class FeatureKind { kLogMfbe, kMfcc, kLps };

struct FeatureMatrix {
  // values[frame * dim + coefficient]
  std::vector<double> values;
  int frames = 0;
  int dim = 0;
  FeatureKind kind = FeatureKind::kLogMfbe;
  // provenance
  int bands = 0;
  int fft_len = 0;
  int sample_rate = 16000;
  int hop_len = 160;

  double at(int t, int c) const { return values[static_cast<std::size_t>(t) * dim + c]; }
  double& at(int t, int c) { return values[static_cast<std::size_t>(t) * dim + c]; }
};

struct EmbeddingVector {
  std::vector<double> values;
  double norm = 0.0;

  static EmbeddingVector from(std::vector<double> v) {
    EmbeddingVector e;
    e.values = std::move(v);
    double acc = 0.0;
    for (double x : e.values) acc += x * x;
    e.norm = std::sqrt(acc);
    return e;
  }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular HTK-mel filterbank over one-sided FFT bins, rows = bands.
inline std::vector<std::vector<double>> mel_filterbank(int bands, int fft_len,
                                                       int sample_rate) {
  if (bands < 2) throw ConfigError("mel_filterbank: need at least 2 bands");
  const int nbins = fft_len / 2 + 1;
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(bands + 2);
  for (int i = 0; i < bands + 2; ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (bands + 1));

  std::vector<std::vector<double>> fb(bands, std::vector<double>(nbins, 0.0));
  for (int b = 0; b < bands; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    for (int k = 0; k < nbins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / fft_len;
      if (f > lo && f < mid)
        fb[b][k] = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        fb[b][k] = (hi - f) / (hi - mid);
    }
  }
  return fb;
}

inline FeatureMatrix log_mfbe(const Spectrogram& spec, int bands = 64) {
  if (spec.channels != 1) throw PreconditionError("log_mfbe: mono spectrogram required");
  if (bands < 2) throw ConfigError("log_mfbe: bands must be >= 2");
  const auto fb = mel_filterbank(bands, spec.config.fft_len, spec.sample_rate);

  FeatureMatrix out;
  out.frames = spec.frames;
  out.dim = bands;
  out.kind = FeatureKind::kLogMfbe;
  out.bands = bands;
  out.fft_len = spec.config.fft_len;
  out.sample_rate = spec.sample_rate;
  out.hop_len = spec.config.hop_len;
  out.values.resize(static_cast<std::size_t>(spec.frames) * bands);
  for (int t = 0; t < spec.frames; ++t)
    for (int b = 0; b < bands; ++b) {
      double acc = 0.0;
      for (int k = 0; k < spec.bins; ++k) acc += fb[b][k] * std::norm(spec.at(0, t, k));
      out.at(t, b) = std::log(std::max(acc, kLogPowerFloor));
    }
  return out;
}

// Orthonormal DCT-II over the band axis, first `coeffs` coefficients.
inline FeatureMatrix mfcc(const FeatureMatrix& features, int coeffs = 20) {
  if (features.kind != FeatureKind::kLogMfbe)
    throw PreconditionError("mfcc: input must be log-MFBE");
  if (coeffs > features.dim) throw ConfigError("mfcc: coeffs exceeds band count");
  const int B = features.dim;

  FeatureMatrix out = features;
  out.kind = FeatureKind::kMfcc;
  out.dim = coeffs;
  out.values.assign(static_cast<std::size_t>(features.frames) * coeffs, 0.0);
  for (int t = 0; t < features.frames; ++t)
    for (int j = 0; j < coeffs; ++j) {
      double acc = 0.0;
      for (int b = 0; b < B; ++b)
        acc += features.at(t, b) * std::cos(M_PI * j * (b + 0.5) / B);
      const double scale = (j == 0 ? std::sqrt(1.0 / B) : std::sqrt(2.0 / B));
      out.at(t, j) = scale * acc;
    }
  return out;
}

// Sliding-window mean subtraction over a centered window (edge-truncated).
inline FeatureMatrix swms(const FeatureMatrix& features, double window_s = 3.0) {
  if (window_s <= 0) throw PreconditionError("swms: window must be > 0");
  const double frame_rate = static_cast<double>(features.sample_rate) / features.hop_len;
  const int half = static_cast<int>(std::lround(0.5 * window_s * frame_rate));
  const int T = features.frames;

  FeatureMatrix out = features;
  for (int c = 0; c < features.dim; ++c) {
    // prefix sums per coefficient
    std::vector<double> prefix(T + 1, 0.0);
    for (int t = 0; t < T; ++t) prefix[t + 1] = prefix[t] + features.at(t, c);
    for (int t = 0; t < T; ++t) {
      const int lo = std::max(0, t - half);
      const int hi = std::min(T - 1, t + half);
      const double mean = (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1);
      out.at(t, c) = features.at(t, c) - mean;
    }
  }
  return out;
}

// Deterministic embedding: concat of per-coefficient mean and population
// std of SWMS-normalized 64D log-MFBE over the feature-side analysis.
inline EmbeddingVector toy_embedding(const TimeSignal& signal) {
  signal.validate();
  if (max_abs(signal) <= 0.0) throw DegenerateInputError("toy_embedding: silent input");
  const TimeSignal mono = signal.channels() == 1 ? signal : signal.channel_view(0);
  const FeatureMatrix feat =
      swms(log_mfbe(stft(mono, StftConfig::feature_16k()), 64), 3.0);

  std::vector<double> emb(2 * feat.dim, 0.0);
  for (int c = 0; c < feat.dim; ++c) {
    double mean = 0.0;
    for (int t = 0; t < feat.frames; ++t) mean += feat.at(t, c);
    mean /= feat.frames;
    double var = 0.0;
    for (int t = 0; t < feat.frames; ++t) {
      const double d = feat.at(t, c) - mean;
      var += d * d;
    }
    emb[c] = mean;
    emb[feat.dim + c] = std::sqrt(var / feat.frames);
  }
  return EmbeddingVector::from(std::move(emb));
}

// ---- embedding table: "dim=<N>" header, "<id> <floats...>" per line ----

inline std::map<std::string, EmbeddingVector> load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) return {};
  int dim = 0;
  if (std::sscanf(line.c_str(), "dim=%d", &dim) != 1 || dim <= 0)
    throw FormatError(path + ": missing dim= header");

  std::map<std::string, EmbeddingVector> table;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id;
    ss >> id;
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (static_cast<int>(vals.size()) != dim)
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(dim) + " values, got " + std::to_string(vals.size()));
    table[id] = EmbeddingVector::from(std::move(vals));
  }
  return table;
}

inline void save_embeddings(const std::map<std::string, EmbeddingVector>& table,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  int dim = 0;
  for (const auto& [id, emb] : table) {
    if (dim == 0) dim = static_cast<int>(emb.values.size());
    if (dim != static_cast<int>(emb.values.size()))
      throw PreconditionError("save_embeddings: mixed dimensions");
  }
  out << "dim=" << dim << "\n";
  out.precision(17);
  for (const auto& [id, emb] : table) {
    out << id;
    for (double v : emb.values) out << " " << v;
    out << "\n";
  }
}

}  // namespace derev

#endif  // DEREV_FEATURES_HPP
