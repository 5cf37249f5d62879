// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "spatialsep/common.hpp"
#include "spatialsep/scene/geometry.hpp"

namespace spatialsep::scene {

inline constexpr double kTrackingRate = 240.0;

// Uniformly sampled source path. Sample i is at time start + i / rate.
struct Trajectory {
  double rate = kTrackingRate;
  double start = 0.0;
  std::vector<Vec3> positions;

  std::size_t size() const { return positions.size(); }
  double timestamp(std::size_t i) const { return start + double(i) / rate; }
  // Time span the samples stand for: each sample covers 1/rate seconds.
  double duration() const { return double(positions.size()) / rate; }

  // Linear interpolation, clamped to the first and last sample.
  Vec3 position_at(double t) const {
    if (positions.empty()) throw DataError("empty trajectory");
    const double u = (t - start) * rate;
    if (u <= 0.0) return positions.front();
    const auto i = static_cast<std::size_t>(std::floor(u));
    if (i + 1 >= positions.size()) return positions.back();
    const double f = u - double(i);
    return (1.0 - f) * positions[i] + f * positions[i + 1];
  }

  // Samples whose timestamps fall in [t0, t1).
  Trajectory slice(double t0, double t1) const {
    Trajectory out;
    out.rate = rate;
    bool first = true;
    for (std::size_t i = 0; i < positions.size(); ++i) {
      const double t = timestamp(i);
      if (t + 1e-9 < t0 || t >= t1 - 1e-9) continue;
      if (first) {
        out.start = t;
        first = false;
      }
      out.positions.push_back(positions[i]);
    }
    if (first) out.start = t0;
    return out;
  }

  Trajectory to_local(const ArrayPose& pose) const {
    Trajectory out = *this;
    for (auto& p : out.positions) p = pose.to_local(p);
    return out;
  }

  void validate() const {
    if (!(rate > 0.0)) throw ConfigError("trajectory rate must be > 0");
    if (positions.empty()) throw ConfigError("trajectory has no samples");
    for (const auto& p : positions)
      if (!p.allFinite()) throw ConfigError("trajectory has a non-finite position");
  }
};

struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  bool contains(const Vec3& p, double tol = 1e-12) const {
    return (p.array() >= lo.array() - tol).all() && (p.array() <= hi.array() + tol).all();
  }
};

// Smooth random walk inside `bounds`. Random waypoints (about one per
// second) are joined by a clamped Catmull-Rom spline, and the path follows
// that curve with its per-sample step clipped to max_speed / rate.
inline Trajectory sample_trajectory(std::uint64_t seed, const Box& bounds, double duration,
                                    double max_speed, double rate = kTrackingRate) {
  if (!(duration > 0.0)) throw ConfigError("trajectory duration must be > 0");
  if (!(max_speed >= 0.0)) throw ConfigError("max_speed must be >= 0");
  if (!bounds.lo.allFinite() || !bounds.hi.allFinite() ||
      (bounds.hi.array() < bounds.lo.array()).any())
    throw ConfigError("degenerate trajectory bounds");

  Rng rng(seed);
  auto draw = [&] {
    Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = rng.uniform(bounds.lo[k], bounds.hi[k]);
    return p;
  };

  const auto n = static_cast<std::size_t>(std::llround(duration * rate));
  const std::size_t n_way = static_cast<std::size_t>(std::ceil(duration)) + 2;
  std::vector<Vec3> way(n_way + 2);
  for (auto& w : way) w = draw();
  const double seg_len = duration / double(n_way - 1);

  auto spline = [&](double t) -> Vec3 {
    const double u = std::clamp(t / seg_len, 0.0, double(n_way - 1));
    auto i = static_cast<std::size_t>(std::floor(u));
    if (i >= n_way - 1) i = n_way - 2;
    const double f = u - double(i);
    // way[i + 1] .. way[i + 2] is the active segment; way[0] and way[n+1] are guards.
    const Vec3& p0 = way[i];
    const Vec3& p1 = way[i + 1];
    const Vec3& p2 = way[i + 2];
    const Vec3& p3 = way[i + 3];
    const double f2 = f * f, f3 = f2 * f;
    Vec3 p = 0.5 * ((2.0 * p1) + (-p0 + p2) * f + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * f2 +
                    (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * f3);
    return p.cwiseMax(bounds.lo).cwiseMin(bounds.hi);
  };

  Trajectory traj;
  traj.rate = rate;
  traj.positions.reserve(n);
  const double max_step = max_speed / rate;
  Vec3 cur = spline(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      Vec3 step = spline(double(i) / rate) - cur;
      const double len = step.norm();
      if (len > max_step) step *= (len > 0.0 ? max_step / len : 0.0);
      cur += step;
    }
    traj.positions.push_back(cur);
  }
  return traj;
}

inline Trajectory static_trajectory(const Vec3& p, double duration, double rate = kTrackingRate) {
  Trajectory t;
  t.rate = rate;
  t.positions.assign(static_cast<std::size_t>(std::llround(duration * rate)), p);
  return t;
}

}  // namespace spatialsep::scene
