// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <vector>

#include "spatialsep/common.hpp"

namespace spatialsep::scene {

// Microphone layout in the array's own frame. Microphone 0 is the
// reference channel. `lateral_axis` points to the listener's right.
struct ArrayGeometry {
  std::vector<Vec3> mic_positions;
  Vec3 forward_axis = Vec3::UnitX();
  Vec3 lateral_axis = -Vec3::UnitY();

  std::size_t size() const { return mic_positions.size(); }

  void validate() const {
    if (mic_positions.empty()) throw ConfigError("array geometry needs at least one microphone");
    for (const auto& p : mic_positions)
      if (!p.allFinite()) throw ConfigError("array geometry has a non-finite microphone position");
    if (std::abs(forward_axis.norm() - 1.0) > 1e-6 || std::abs(lateral_axis.norm() - 1.0) > 1e-6)
      throw ConfigError("array axes must be unit vectors");
  }

  ArrayGeometry subset(std::span<const std::size_t> indices) const {
    ArrayGeometry g = *this;
    g.mic_positions.clear();
    for (auto i : indices) {
      if (i >= mic_positions.size()) throw ConfigError("mic index out of range");
      g.mic_positions.push_back(mic_positions[i]);
    }
    return g;
  }
};

// Four binaural pairs on a horizontal circle of radius 9 cm facing
// 0/180/90/270 degrees, 1.5 cm between the two capsules of a pair. Pair
// order puts front and back first so the 2/4/8 presets are prefixes.
inline ArrayGeometry default_geometry() {
  constexpr double kRadius = 0.09;
  constexpr double kPairSpacing = 0.015;
  ArrayGeometry g;
  for (double deg : {0.0, 180.0, 90.0, 270.0}) {
    const double a = deg * kPi / 180.0;
    const Vec3 centre(kRadius * std::cos(a), kRadius * std::sin(a), 0.0);
    const Vec3 tangent(-std::sin(a), std::cos(a), 0.0);
    g.mic_positions.push_back(centre + 0.5 * kPairSpacing * tangent);
    g.mic_positions.push_back(centre - 0.5 * kPairSpacing * tangent);
  }
  return g;
}

// 2 = front pair, 4 = front and back pairs, 8 = all. Channel 0 is always kept.
inline std::vector<std::size_t> mic_preset(std::size_t count, std::size_t array_size = 8) {
  if (count == 0 || count > array_size)
    throw ConfigError("mic preset " + std::to_string(count) + " invalid for a " +
                      std::to_string(array_size) + "-mic array");
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  return idx;
}

inline Eigen::Matrix3d rotation_from_euler_deg(double yaw, double pitch, double roll) {
  const double d = kPi / 180.0;
  return (Eigen::AngleAxisd(yaw * d, Vec3::UnitZ()) *
          Eigen::AngleAxisd(pitch * d, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll * d, Vec3::UnitX()))
      .toRotationMatrix();
}

// Array placement: world = position + rotation * local.
struct ArrayPose {
  Vec3 position = Vec3::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();

  Vec3 to_world(const Vec3& local) const { return position + rotation * local; }
  Vec3 to_local(const Vec3& world) const { return rotation.transpose() * (world - position); }
};

enum class SplitKind { kLeftRight, kNearFar };
enum class Region { kTarget, kInterference, kAmbiguous };

struct RegionSplit {
  SplitKind kind = SplitKind::kLeftRight;
  double near_far_boundary = 0.7;

  void validate() const {
    if (kind == SplitKind::kNearFar && !(near_far_boundary > 0.0))
      throw ConfigError("near/far boundary must be > 0");
  }
};

inline const char* to_string(SplitKind k) {
  return k == SplitKind::kLeftRight ? "left_right" : "near_far";
}
inline const char* to_string(Region r) {
  switch (r) {
    case Region::kTarget: return "target";
    case Region::kInterference: return "interference";
    default: return "ambiguous";
  }
}
inline SplitKind split_kind_from_string(const std::string& s) {
  if (s == "left_right" || s == "leftright" || s == "lr") return SplitKind::kLeftRight;
  if (s == "near_far" || s == "nearfar" || s == "nf") return SplitKind::kNearFar;
  throw ConfigError("unknown split kind: " + s);
}
inline Region region_from_string(const std::string& s) {
  if (s == "target") return Region::kTarget;
  if (s == "interference") return Region::kInterference;
  if (s == "ambiguous") return Region::kAmbiguous;
  throw DataError("unknown region label: " + s);
}

// Label of a single world position. Right of the array (positive lateral
// coordinate) and beyond the near/far boundary are the target regions.
// Points exactly on a boundary are ambiguous.
inline Region classify_point(const Vec3& world, const ArrayPose& pose,
                             const ArrayGeometry& geometry, const RegionSplit& split) {
  const Vec3 local = pose.to_local(world);
  if (split.kind == SplitKind::kLeftRight) {
    const double lateral = local.dot(geometry.lateral_axis);
    if (lateral > 0.0) return Region::kTarget;
    if (lateral < 0.0) return Region::kInterference;
    return Region::kAmbiguous;
  }
  const double dist = local.norm();
  if (dist > split.near_far_boundary) return Region::kTarget;
  if (dist < split.near_far_boundary) return Region::kInterference;
  return Region::kAmbiguous;
}

// A window is labelled only if every sample falls in the same region.
inline Region classify_positions(std::span<const Vec3> positions, const ArrayPose& pose,
                                 const ArrayGeometry& geometry, const RegionSplit& split) {
  if (positions.empty()) return Region::kAmbiguous;
  const Region first = classify_point(positions.front(), pose, geometry, split);
  if (first == Region::kAmbiguous) return first;
  for (const auto& p : positions.subspan(1))
    if (classify_point(p, pose, geometry, split) != first) return Region::kAmbiguous;
  return first;
}

}  // namespace spatialsep::scene
