// derev/wav.hpp
//
// Minimal RIFF/WAVE reader and writer: PCM 16-bit and IEEE float 32-bit.

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

#ifndef DEREV_WAV_HPP
#define DEREV_WAV_HPP

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "derev/errors.hpp"
#include "derev/signal.hpp"

namespace derev {

enum class WavBitDepth { kPcm16, kFloat32 };

namespace detail {

inline uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("truncated WAV file");
  return b[0] | (b[1] << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

inline uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  if (!in) throw IoError("truncated WAV file");
  return b[0] | (b[1] << 8);
}

inline void write_u32(std::ostream& out, uint32_t v) {
  const char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                     char((v >> 24) & 0xff)};
  out.write(b, 4);
}

inline void write_u16(std::ostream& out, uint16_t v) {
  const char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
  out.write(b, 2);
}

}  // namespace detail

inline TimeSignal load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0) throw FormatError(path + ": not a RIFF file");
  detail::read_u32(in);  // riff size
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0) throw FormatError(path + ": not a WAVE file");

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  std::vector<char> payload;

  while (in.read(tag, 4)) {
    const uint32_t size = detail::read_u32(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = detail::read_u16(in);
      channels = detail::read_u16(in);
      rate = detail::read_u32(in);
      detail::read_u32(in);  // byte rate
      detail::read_u16(in);  // block align
      bits = detail::read_u16(in);
      uint32_t consumed = 16;
      if (format == 0xFFFE && size >= 26) {
        detail::read_u16(in);  // cbSize
        detail::read_u16(in);  // valid bits
        detail::read_u32(in);  // channel mask
        format = detail::read_u16(in);  // first 2 bytes of SubFormat GUID
        consumed = 26;
      }
      if (size > consumed) in.seekg(size - consumed, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      payload.resize(size);
      in.read(payload.data(), size);
      if (!in) throw IoError(path + ": truncated data chunk");
      break;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (!have_fmt || payload.empty()) throw FormatError(path + ": missing fmt or data chunk");
  if (channels == 0 || rate == 0) throw FormatError(path + ": malformed fmt chunk");

  const bool pcm16 = (format == 1 && bits == 16);
  const bool f32 = (format == 3 && bits == 32);
  if (!pcm16 && !f32)
    throw FormatError(path + ": unsupported codec (format " + std::to_string(format) +
                      ", " + std::to_string(bits) + "-bit)");

  const std::size_t bytes_per = pcm16 ? 2 : 4;
  const std::size_t nsamp = payload.size() / (bytes_per * channels);

  TimeSignal sig;
  sig.sample_rate = static_cast<int>(rate);
  sig.samples.assign(channels, std::vector<double>(nsamp));
  const unsigned char* p = reinterpret_cast<const unsigned char*>(payload.data());
  for (std::size_t i = 0; i < nsamp; ++i) {
    for (int c = 0; c < channels; ++c) {
      if (pcm16) {
        const int16_t v = static_cast<int16_t>(p[0] | (p[1] << 8));
        sig.samples[c][i] = v / 32768.0;
        p += 2;
      } else {
        uint32_t u = p[0] | (p[1] << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
        float f;
        std::memcpy(&f, &u, 4);
        sig.samples[c][i] = f;
        p += 4;
      }
    }
  }
  return sig;
}

inline void save_wav(const TimeSignal& signal, const std::string& path,
                     WavBitDepth depth = WavBitDepth::kFloat32) {
  signal.validate();
  if (signal.length() == 0) throw PreconditionError("save_wav: empty signal");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);

  const int channels = signal.channels();
  const std::size_t nsamp = signal.length();
  const bool pcm16 = depth == WavBitDepth::kPcm16;
  const uint16_t bits = pcm16 ? 16 : 32;
  const uint32_t data_size = static_cast<uint32_t>(nsamp * channels * bits / 8);

  out.write("RIFF", 4);
  detail::write_u32(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  detail::write_u32(out, 16);
  detail::write_u16(out, pcm16 ? 1 : 3);
  detail::write_u16(out, static_cast<uint16_t>(channels));
  detail::write_u32(out, static_cast<uint32_t>(signal.sample_rate));
  detail::write_u32(out, static_cast<uint32_t>(signal.sample_rate) * channels * bits / 8);
  detail::write_u16(out, static_cast<uint16_t>(channels * bits / 8));
  detail::write_u16(out, bits);
  out.write("data", 4);
  detail::write_u32(out, data_size);

  for (std::size_t i = 0; i < nsamp; ++i) {
    for (int c = 0; c < channels; ++c) {
      const double v = signal.samples[c][i];
      if (pcm16) {
        const double scaled = v * 32768.0;
        const int32_t q = static_cast<int32_t>(std::lround(
            std::clamp(scaled, -32768.0, 32767.0)));
        detail::write_u16(out, static_cast<uint16_t>(static_cast<int16_t>(q)));
      } else {
        const float f = static_cast<float>(v);
        uint32_t u;
        std::memcpy(&u, &f, 4);
        detail::write_u32(out, u);
      }
    }
  }
  if (!out) throw IoError("write failure on " + path);
}

}  // namespace derev

#endif  // DEREV_WAV_HPP
