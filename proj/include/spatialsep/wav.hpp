// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Minimal RIFF/WAVE reader and writer. Reads 16/24/32-bit PCM and 32/64-bit
// IEEE float, plain or WAVE_FORMAT_EXTENSIBLE. Always writes 32-bit float.

#pragma once

#include <array>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "spatialsep/common.hpp"

namespace spatialsep::wav {

namespace detail {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

inline std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}
inline std::uint16_t read_u16(const unsigned char* p) {
  return std::uint16_t(p[0] | (p[1] << 8));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}
inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(char(v & 0xFF));
  out.push_back(char((v >> 8) & 0xFF));
}

}  // namespace detail

inline MultichannelAudio read(const std::filesystem::path& path) {
  using namespace detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open WAV file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw DataError("not a RIFF/WAVE file: " + path.string());

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(len, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw DataError("truncated fmt chunk: " + path.string());
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == kFormatExtensible) {
        if (avail < 40) throw DataError("truncated extensible fmt: " + path.string());
        format = read_u16(chunk + 8 + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = avail;
    }
    pos = body + len + (len & 1U);
  }
  if (channels == 0 || rate == 0 || data == nullptr)
    throw DataError("missing fmt or data chunk: " + path.string());

  const std::size_t bytes_per_sample = bits / 8;
  const bool supported =
      (format == kFormatPcm && (bits == 16 || bits == 24 || bits == 32)) ||
      (format == kFormatFloat && (bits == 32 || bits == 64));
  if (!supported)
    throw DataError("unsupported WAV encoding (format " + std::to_string(format) +
                    ", " + std::to_string(bits) + " bits): " + path.string());

  const std::size_t frames = data_len / (bytes_per_sample * channels);
  MultichannelAudio audio(channels, static_cast<Eigen::Index>(frames), rate);
  const unsigned char* p = data;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t c = 0; c < channels; ++c, p += bytes_per_sample) {
      double v = 0.0;
      if (format == kFormatFloat && bits == 32) {
        float f;
        std::uint32_t u = read_u32(p);
        std::memcpy(&f, &u, 4);
        v = f;
      } else if (format == kFormatFloat) {
        std::uint64_t u = std::uint64_t(read_u32(p)) |
                          (std::uint64_t(read_u32(p + 4)) << 32);
        std::memcpy(&v, &u, 8);
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t s = (std::int32_t(p[0]) << 8) | (std::int32_t(p[1]) << 16) |
                         (std::int32_t(p[2]) << 24);
        v = (s >> 8) / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(read_u32(p)) / 2147483648.0;
      }
      audio.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = v;
    }
  }
  return audio;
}

// Writes 32-bit float samples. Uses WAVE_FORMAT_EXTENSIBLE for more than
// two channels so that multichannel files open in common tools.
inline void write(const std::filesystem::path& path, const MultichannelAudio& audio) {
  using namespace detail;
  const auto channels = static_cast<std::uint16_t>(audio.channels());
  if (channels == 0) throw DataError("cannot write WAV with zero channels");
  const auto rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));
  const std::uint32_t frames = static_cast<std::uint32_t>(audio.frames());
  const std::uint32_t data_len = frames * channels * 4U;
  const bool extensible = channels > 2;

  std::string out;
  out.reserve(68 + data_len);
  out += "RIFF";
  put_u32(out, (extensible ? 60U : 36U) + data_len);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, extensible ? 40U : 16U);
  put_u16(out, extensible ? kFormatExtensible : kFormatFloat);
  put_u16(out, channels);
  put_u32(out, rate);
  put_u32(out, rate * channels * 4U);
  put_u16(out, static_cast<std::uint16_t>(channels * 4U));
  put_u16(out, 32);
  if (extensible) {
    put_u16(out, 22);
    put_u16(out, 32);
    put_u32(out, 0);  // no speaker mapping
    put_u16(out, kFormatFloat);
    static constexpr std::array<unsigned char, 14> kGuidTail = {
        0x00, 0x00, 0x00, 0x00, 0x10, 0x00, 0x80,
        0x00, 0x00, 0xAA, 0x00, 0x38, 0x9B, 0x71};
    out.append(reinterpret_cast<const char*>(kGuidTail.data()), kGuidTail.size());
  }
  out += "data";
  put_u32(out, data_len);
  for (Eigen::Index t = 0; t < audio.frames(); ++t) {
    for (Eigen::Index c = 0; c < audio.channels(); ++c) {
      const float f = static_cast<float>(audio.samples(c, t));
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      put_u32(out, u);
    }
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write WAV file: " + path.string());
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace spatialsep::wav
