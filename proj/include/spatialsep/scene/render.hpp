// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "spatialsep/common.hpp"
#include "spatialsep/scene/geometry.hpp"
#include "spatialsep/scene/rir.hpp"
#include "spatialsep/scene/trajectory.hpp"

namespace spatialsep::scene {

struct SourceSpec {
  std::string id;
  Trajectory trajectory;
  std::vector<double> audio;  // mono, at the scene sample rate
};

struct SceneSpec {
  Room room;
  ArrayGeometry geometry = default_geometry();
  ArrayPose array_pose;
  std::vector<SourceSpec> sources;
  double block_seconds = 0.032;

  double sample_rate() const { return room.sample_rate; }

  std::vector<Vec3> mic_world_positions() const {
    std::vector<Vec3> out;
    out.reserve(geometry.size());
    for (const auto& m : geometry.mic_positions) out.push_back(array_pose.to_world(m));
    return out;
  }

  void validate() const {
    room.validate();
    geometry.validate();
    for (const auto& m : mic_world_positions())
      if (!room.contains(m)) throw ConfigError("microphone outside the room");
    for (const auto& s : sources) {
      s.trajectory.validate();
      for (const auto& p : s.trajectory.positions)
        if (!room.contains(p)) throw ConfigError("source '" + s.id + "' leaves the room");
    }
  }
};

namespace detail {

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace detail

// Time-varying rendering of one source. The input is cut into blocks of
// block_seconds with 50% overlap and triangular (linear ramp) weights that
// sum to one; each block is convolved with the RIR for the source position
// at the block centre, and the results are overlap-added. Output has the
// input length, reverb tails past the end are dropped.
inline MultichannelAudio render_moving_source(const SceneSpec& scene, std::size_t source_index) {
  if (source_index >= scene.sources.size()) throw ConfigError("source index out of range");
  scene.validate();
  const SourceSpec& src = scene.sources[source_index];
  const double fs = scene.sample_rate();
  const auto T = src.audio.size();
  if (src.trajectory.duration() + 1e-9 < double(T) / fs)
    throw DataError("trajectory of source '" + src.id + "' is shorter than its audio");

  const auto mics = scene.mic_world_positions();
  MultichannelAudio out(static_cast<Eigen::Index>(mics.size()), static_cast<Eigen::Index>(T), fs);
  if (T == 0) return out;

  const auto block_len = static_cast<std::size_t>(std::llround(scene.block_seconds * fs));
  const std::size_t hop = std::max<std::size_t>(1, block_len / 2);
  const std::size_t n_blocks = (T + hop - 1) / hop + 1;

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> seg, rir_buf, y;
  std::vector<std::complex<double>> seg_f, rir_f;

  for (std::size_t b = 0; b < n_blocks; ++b) {
    // block b spans [(b - 1) * hop, (b + 1) * hop) and peaks at b * hop
    const std::ptrdiff_t begin = (std::ptrdiff_t(b) - 1) * std::ptrdiff_t(hop);
    bool any = false;
    std::vector<double> block(2 * hop, 0.0);
    for (std::size_t n = 0; n < 2 * hop; ++n) {
      const std::ptrdiff_t t = begin + std::ptrdiff_t(n);
      if (t < 0 || t >= std::ptrdiff_t(T)) continue;
      const double w = 1.0 - std::abs(double(n) - double(hop)) / double(hop);
      block[n] = w * src.audio[std::size_t(t)];
      any = any || block[n] != 0.0;
    }
    if (!any) continue;

    const Vec3 pos = src.trajectory.position_at(double(b * hop) / fs);
    std::vector<std::vector<double>> rirs;
    std::size_t max_len = 0;
    for (const auto& m : mics) {
      rirs.push_back(image_source_rir(scene.room, pos, m, scene.room.max_image_order));
      max_len = std::max(max_len, rirs.back().size());
    }

    const std::size_t nfft = detail::next_pow2(2 * hop + max_len - 1);
    seg.assign(nfft, 0.0);
    std::copy(block.begin(), block.end(), seg.begin());
    fft.fwd(seg_f, seg);
    for (std::size_t c = 0; c < mics.size(); ++c) {
      rir_buf.assign(nfft, 0.0);
      std::copy(rirs[c].begin(), rirs[c].end(), rir_buf.begin());
      fft.fwd(rir_f, rir_buf);
      for (std::size_t k = 0; k < rir_f.size(); ++k) rir_f[k] *= seg_f[k];
      fft.inv(y, rir_f, nfft);
      auto dst = out.channel(static_cast<Eigen::Index>(c));
      const std::size_t valid = 2 * hop + rirs[c].size() - 1;
      for (std::size_t n = 0; n < valid; ++n) {
        const std::ptrdiff_t t = begin + std::ptrdiff_t(n);
        if (t < 0) continue;
        if (t >= std::ptrdiff_t(T)) break;
        dst[std::size_t(t)] += y[n];
      }
    }
  }
  return out;
}

// Per-source microphone images plus their sum, rendered independently.
struct RenderedScene {
  std::vector<MultichannelAudio> images;
  MultichannelAudio mixture;
};

inline RenderedScene render_scene(const SceneSpec& scene) {
  RenderedScene r;
  for (std::size_t i = 0; i < scene.sources.size(); ++i) {
    r.images.push_back(render_moving_source(scene, i));
    if (i == 0) {
      r.mixture = r.images.back();
    } else {
      if (r.images.back().frames() != r.mixture.frames())
        throw DataError("scene sources have different lengths");
      r.mixture.samples += r.images.back().samples;
    }
  }
  return r;
}

}  // namespace spatialsep::scene
