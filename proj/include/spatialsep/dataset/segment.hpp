// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spatialsep/common.hpp"
#include "spatialsep/scene/geometry.hpp"
#include "spatialsep/scene/trajectory.hpp"

namespace spatialsep::dataset {

inline constexpr double kSegmentSeconds = 3.0;

// One labelled clip. The trajectory slice is stored in the array frame, so
// angles and distances relative to the array can be read off directly.
struct SegmentRecord {
  std::string segment_id;
  std::string audio_path;  // relative to the manifest directory
  scene::Region region = scene::Region::kAmbiguous;
  scene::RegionSplit split;
  scene::Trajectory trajectory_slice;
  std::string source_id;
  double rms_dbfs = -120.0;
  double duration = kSegmentSeconds;
  double start_time = 0.0;
  double sample_rate = 48000.0;
  std::size_t channels = 0;
};

struct Segment {
  SegmentRecord record;
  MultichannelAudio audio;
};

inline double rms_dbfs(const MultichannelAudio& a) {
  if (a.samples.size() == 0) return -120.0;
  const double ms = a.samples.squaredNorm() / double(a.samples.size());
  return ms > 0.0 ? std::max(-120.0, 10.0 * std::log10(ms)) : -120.0;
}

// Consecutive non-overlapping windows of segment_seconds. Windows whose
// trajectory samples do not all fall in one region are dropped. Recordings
// shorter than one window give an empty list.
inline std::vector<Segment> segment_and_label(const MultichannelAudio& recording,
                                              const scene::Trajectory& world_trajectory,
                                              const scene::ArrayPose& pose,
                                              const scene::ArrayGeometry& geometry,
                                              const scene::RegionSplit& split,
                                              const std::string& source_id,
                                              double segment_seconds = kSegmentSeconds) {
  split.validate();
  const auto seg_len = static_cast<Eigen::Index>(std::llround(segment_seconds * recording.sample_rate));
  std::vector<Segment> out;
  if (seg_len <= 0) throw ConfigError("segment length must be positive");
  const Eigen::Index count = recording.frames() / seg_len;
  for (Eigen::Index k = 0; k < count; ++k) {
    const double t0 = double(k * seg_len) / recording.sample_rate;
    const double t1 = double((k + 1) * seg_len) / recording.sample_rate;
    const scene::Trajectory slice = world_trajectory.slice(t0, t1);
    const scene::Region region = scene::classify_positions(slice.positions, pose, geometry, split);
    if (region == scene::Region::kAmbiguous) continue;

    Segment s;
    s.audio = MultichannelAudio(recording.samples.middleCols(k * seg_len, seg_len),
                                recording.sample_rate);
    auto& r = s.record;
    r.segment_id = source_id + "_" + std::to_string(k);
    r.audio_path = r.segment_id + ".wav";
    r.region = region;
    r.split = split;
    r.trajectory_slice = slice.to_local(pose);
    r.source_id = source_id;
    r.rms_dbfs = rms_dbfs(s.audio);
    r.duration = segment_seconds;
    r.start_time = t0;
    r.sample_rate = recording.sample_rate;
    r.channels = static_cast<std::size_t>(recording.channels());
    out.push_back(std::move(s));
  }
  return out;
}

// ---- JSON-lines manifest -------------------------------------------------

inline nlohmann::json to_json(const scene::Trajectory& t) {
  nlohmann::json pos = nlohmann::json::array();
  for (const auto& p : t.positions) pos.push_back({p.x(), p.y(), p.z()});
  return {{"rate", t.rate}, {"start", t.start}, {"positions", pos}};
}

inline scene::Trajectory trajectory_from_json(const nlohmann::json& j) {
  scene::Trajectory t;
  t.rate = j.value("rate", scene::kTrackingRate);
  t.start = j.value("start", 0.0);
  for (const auto& p : j.at("positions")) {
    if (!p.is_array() || p.size() != 3) throw DataError("trajectory position must be [x, y, z]");
    t.positions.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
  }
  return t;
}

inline nlohmann::json to_json(const SegmentRecord& r) {
  return {{"segment_id", r.segment_id},
          {"audio_path", r.audio_path},
          {"region", scene::to_string(r.region)},
          {"split_kind", scene::to_string(r.split.kind)},
          {"near_far_boundary", r.split.near_far_boundary},
          {"trajectory_frame", "array"},
          {"trajectory_slice", to_json(r.trajectory_slice)},
          {"source_id", r.source_id},
          {"rms_dbfs", r.rms_dbfs},
          {"duration", r.duration},
          {"start_time", r.start_time},
          {"sample_rate", r.sample_rate},
          {"channels", r.channels}};
}

inline SegmentRecord segment_record_from_json(const nlohmann::json& j) {
  try {
    SegmentRecord r;
    r.segment_id = j.at("segment_id").get<std::string>();
    r.audio_path = j.at("audio_path").get<std::string>();
    r.region = scene::region_from_string(j.at("region").get<std::string>());
    if (r.region == scene::Region::kAmbiguous)
      throw DataError("manifest contains an ambiguous segment: " + r.segment_id);
    r.split.kind = scene::split_kind_from_string(j.value("split_kind", std::string("left_right")));
    r.split.near_far_boundary = j.value("near_far_boundary", 0.7);
    r.trajectory_slice = trajectory_from_json(j.at("trajectory_slice"));
    r.source_id = j.value("source_id", std::string());
    r.rms_dbfs = j.value("rms_dbfs", -120.0);
    r.duration = j.value("duration", kSegmentSeconds);
    r.start_time = j.value("start_time", 0.0);
    r.sample_rate = j.value("sample_rate", 48000.0);
    r.channels = j.value("channels", std::size_t{0});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest record: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
}

inline void write_manifest(const std::filesystem::path& path,
                           const std::vector<SegmentRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw DataError("cannot write manifest: " + path.string());
  for (const auto& r : records) os << to_json(r).dump() << '\n';
}

inline std::vector<SegmentRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  std::vector<SegmentRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(segment_record_from_json(j));
  }
  return out;
}

}  // namespace spatialsep::dataset
