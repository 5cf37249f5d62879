// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <vector>

#include "spatialsep/common.hpp"
#include "spatialsep/dsp/fractional_delay.hpp"

namespace spatialsep::scene {

inline constexpr double kMinDistance = 0.1;

// Shoebox room with one corner at the origin. Absorption order is
// {x=0, x=Lx, y=0, y=Ly, z=0, z=Lz}.
struct Room {
  Vec3 dims{6.0, 5.0, 3.0};
  std::array<double, 6> absorption{0.7, 0.7, 0.7, 0.7, 0.7, 0.7};
  int max_image_order = 2;
  double speed_of_sound = 343.0;
  double sample_rate = 48000.0;

  bool contains(const Vec3& p) const {
    return (p.array() >= 0.0).all() && (p.array() <= dims.array()).all();
  }

  void validate() const {
    if (!(dims.array() > 0.0).all()) throw ConfigError("room dimensions must be positive");
    for (double a : absorption)
      if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("absorption must lie in [0, 1]");
    if (max_image_order < 0) throw ConfigError("max_image_order must be >= 0");
    if (!(speed_of_sound > 0.0) || !(sample_rate > 0.0))
      throw ConfigError("speed_of_sound and sample_rate must be positive");
  }
};

struct ImageArrival {
  double delay = 0.0;  // samples
  double gain = 0.0;
  int order = 0;
};

// Every image source of reflection order <= max_order, as (delay, gain)
// pairs for the given source and microphone.
inline std::vector<ImageArrival> image_arrivals(const Room& room, const Vec3& src,
                                                const Vec3& mic, int max_order) {
  room.validate();
  if (max_order < 0) throw ConfigError("max_order must be >= 0");
  if (!room.contains(src)) throw DataError("source position outside room");
  if (!room.contains(mic)) throw DataError("microphone position outside room");

  std::array<double, 6> beta{};
  for (int i = 0; i < 6; ++i) beta[std::size_t(i)] = std::sqrt(1.0 - room.absorption[std::size_t(i)]);

  std::vector<ImageArrival> out;
  const int n_max = (max_order + 1) / 2 + 1;
  for (int nx = -n_max; nx <= n_max; ++nx)
    for (int ny = -n_max; ny <= n_max; ++ny)
      for (int nz = -n_max; nz <= n_max; ++nz)
        for (int q = 0; q <= 1; ++q)
          for (int j = 0; j <= 1; ++j)
            for (int k = 0; k <= 1; ++k) {
              const std::array<int, 3> n{nx, ny, nz};
              const std::array<int, 3> mirror{q, j, k};
              int order = 0;
              double gain = 1.0;
              Vec3 image;
              for (int a = 0; a < 3; ++a) {
                const int na = n[std::size_t(a)], ma = mirror[std::size_t(a)];
                image[a] = (1 - 2 * ma) * src[a] + 2.0 * na * room.dims[a];
                // reflections off the wall at 0 and the wall at L along axis a
                const int hits_lo = std::abs(na - ma);
                const int hits_hi = std::abs(na);
                order += hits_lo + hits_hi;
                gain *= std::pow(beta[std::size_t(2 * a)], hits_lo) *
                        std::pow(beta[std::size_t(2 * a + 1)], hits_hi);
              }
              if (order > max_order) continue;
              const double dist = (image - mic).norm();
              out.push_back({dist / room.speed_of_sound * room.sample_rate,
                             gain / std::max(dist, kMinDistance), order});
            }
  return out;
}

// Impulse response long enough to hold every arrival plus the
// interpolation filter tail.
inline std::vector<double> image_source_rir(const Room& room, const Vec3& src, const Vec3& mic,
                                            int max_order,
                                            std::size_t half_len = dsp::kDefaultDelayHalfLen) {
  const auto arrivals = image_arrivals(room, src, mic, max_order);
  double max_delay = 0.0;
  for (const auto& a : arrivals) max_delay = std::max(max_delay, a.delay);
  std::vector<double> h(static_cast<std::size_t>(std::ceil(max_delay)) + half_len + 1, 0.0);
  for (const auto& a : arrivals)
    if (a.gain != 0.0) dsp::add_fractional_impulse(h, a.delay, a.gain, half_len);
  return h;
}

}  // namespace spatialsep::scene
