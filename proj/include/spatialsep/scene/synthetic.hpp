// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Random scenes whose sources stay inside a requested region for the whole
// clip. Boxes are drawn in the array frame; the array is upright
// (identity rotation) so they translate directly into room coordinates.

#pragma once

#include <string>
#include <vector>

#include "spatialsep/scene/render.hpp"
#include "spatialsep/scene/source_material.hpp"

namespace spatialsep::scene {

struct SyntheticSceneOptions {
  Room room;
  ArrayGeometry geometry = default_geometry();
  RegionSplit split;
  double duration = 3.0;
  std::size_t n_targets = 1;
  std::size_t n_interferers = 1;
  double max_speed_far = 1.0;   // m/s, also used for both left/right regions
  double max_speed_near = 0.3;  // m/s
  bool moving = true;
  double margin = 0.25;         // keep sources this far from the walls
};

namespace detail {

inline Box clip_to_room(Box b, const Room& room, double margin) {
  b.lo = b.lo.cwiseMax(Vec3::Constant(margin));
  b.hi = b.hi.cwiseMin(room.dims - Vec3::Constant(margin));
  return b;
}

// Region box in array-frame coordinates (x forward, y left, z up).
inline Box region_box(Rng& rng, const RegionSplit& split, Region region, double boundary) {
  Box b;
  if (split.kind == SplitKind::kLeftRight) {
    const double sign = region == Region::kTarget ? -1.0 : 1.0;  // right is -y
    b.lo = Vec3(-1.8, sign > 0 ? 0.3 : -2.0, -0.4);
    b.hi = Vec3(1.8, sign > 0 ? 2.0 : -0.3, 0.4);
    return b;
  }
  // choose one of four horizontal directions for the box
  const double a = double(rng.index(4)) * kPi / 2.0;
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix();
  Box local;
  if (region == Region::kTarget) {
    local.lo = Vec3(boundary + 0.4, -1.2, -0.4);
    local.hi = Vec3(boundary + 1.6, 1.2, 0.4);
  } else {
    local.lo = Vec3(0.2, -0.25, -0.2);
    local.hi = Vec3(std::min(0.5, boundary - 0.15), 0.25, 0.2);
  }
  const Vec3 c1 = rot * local.lo, c2 = rot * local.hi;
  b.lo = c1.cwiseMin(c2);
  b.hi = c1.cwiseMax(c2);
  return b;
}

}  // namespace detail

struct SyntheticScene {
  SceneSpec spec;
  std::vector<Region> regions;  // per source
};

// Sources 0..n_targets-1 are targets, the rest interferers. Trajectories are
// re-drawn until classify_positions agrees with the intended region.
inline SyntheticScene make_region_scene(std::uint64_t seed, const SyntheticSceneOptions& opt) {
  opt.room.validate();
  opt.split.validate();
  Rng rng(seed);
  SyntheticScene out;
  SceneSpec& s = out.spec;
  s.room = opt.room;
  s.geometry = opt.geometry;
  const Vec3 centre = 0.5 * opt.room.dims;
  s.array_pose.position = centre + Vec3(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4),
                                        rng.uniform(-0.2, 0.1));
  const auto length = static_cast<std::size_t>(std::llround(opt.duration * opt.room.sample_rate));

  const std::size_t n = opt.n_targets + opt.n_interferers;
  for (std::size_t k = 0; k < n; ++k) {
    const Region want = k < opt.n_targets ? Region::kTarget : Region::kInterference;
    const bool near = opt.split.kind == SplitKind::kNearFar && want == Region::kInterference;
    const double speed = opt.moving ? (near ? opt.max_speed_near : opt.max_speed_far) : 0.0;
    Trajectory traj;
    bool ok = false;
    for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
      Box box = detail::region_box(rng, opt.split, want, opt.split.near_far_boundary);
      box.lo += s.array_pose.position;
      box.hi += s.array_pose.position;
      box = detail::clip_to_room(box, opt.room, opt.margin);
      if ((box.hi.array() < box.lo.array()).any()) continue;
      traj = sample_trajectory(rng.next(), box, opt.duration, speed);
      ok = classify_positions(traj.positions, s.array_pose, s.geometry, opt.split) == want;
    }
    if (!ok) throw ConfigError("could not place a source in the requested region");
    SourceSpec src;
    src.id = std::string(want == Region::kTarget ? "target" : "interf") + std::to_string(want == Region::kTarget ? k : k - opt.n_targets);
    src.trajectory = std::move(traj);
    src.audio = synth_speech_like(rng.next(), length, opt.room.sample_rate);
    s.sources.push_back(std::move(src));
    out.regions.push_back(want);
  }
  return out;
}

}  // namespace spatialsep::scene
