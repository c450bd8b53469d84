// derev/spg.hpp
//
// Flat binary spectrogram dump ("SPG1"): 16-byte header of magic plus
// channel/frame/bin counts (LE u32), then interleaved real/imag float32
// in (channel, frame, bin) order. Also used to carry external log-power
// PSD estimates (single channel, real part only).

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

#ifndef DEREV_SPG_HPP
#define DEREV_SPG_HPP

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "derev/errors.hpp"
#include "derev/signal.hpp"
#include "derev/wav.hpp"

namespace derev {

inline void save_spg(const Spectrogram& spec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write("SPG1", 4);
  detail::write_u32(out, static_cast<uint32_t>(spec.channels));
  detail::write_u32(out, static_cast<uint32_t>(spec.frames));
  detail::write_u32(out, static_cast<uint32_t>(spec.bins));
  for (const cplx& v : spec.data) {
    const float re = static_cast<float>(v.real());
    const float im = static_cast<float>(v.imag());
    uint32_t u;
    std::memcpy(&u, &re, 4);
    detail::write_u32(out, u);
    std::memcpy(&u, &im, 4);
    detail::write_u32(out, u);
  }
  if (!out) throw IoError("write failure on " + path);
}

// Reads the raw tensor. Analysis config/sample rate are not part of the
// dump; the caller patches them from the companion spectrogram.
inline Spectrogram load_spg(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SPG1", 4) != 0)
    throw FormatError(path + ": bad SPG1 magic");
  const uint32_t channels = detail::read_u32(in);
  const uint32_t frames = detail::read_u32(in);
  const uint32_t bins = detail::read_u32(in);

  Spectrogram spec(static_cast<int>(channels), static_cast<int>(frames),
                   static_cast<int>(bins), StftConfig{}, 16000, 0);
  for (cplx& v : spec.data) {
    uint32_t ur = detail::read_u32(in);
    uint32_t ui = detail::read_u32(in);
    float re, im;
    std::memcpy(&re, &ur, 4);
    std::memcpy(&im, &ui, 4);
    v = cplx{re, im};
  }
  return spec;
}

}  // namespace derev

#endif  // DEREV_SPG_HPP
