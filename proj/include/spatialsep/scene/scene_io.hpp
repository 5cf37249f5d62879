// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Scene files (schema_version 1):
//
// {
//   "schema_version": 1,
//   "sample_rate": 48000,
//   "duration": 9.0,                      // seconds, for synthetic sources
//   "room": {"dims": [6, 5, 3], "absorption": 0.7 | [6 values],
//            "max_image_order": 2, "speed_of_sound": 343},
//   "array": {"position": [3, 2.5, 1.4], "yaw_deg": 0, "pitch_deg": 0, "roll_deg": 0,
//             "mic_positions": [[x, y, z], ...],            // optional
//             "forward_axis": [1, 0, 0], "lateral_axis": [0, -1, 0]},
//   "sources": [
//     {"id": "talker1",
//      "audio": "speech.wav" | {"synthetic_seed": 7},
//      "trajectory": {"rate": 240, "positions": [[x, y, z], ...]}
//                  | {"random": {"seed": 3, "bounds": [[x0, y0, z0], [x1, y1, z1]],
//                                "max_speed": 1.0}}
//                  | {"static": [x, y, z]}}
//   ]
// }
//
// Relative audio paths resolve against the scene file's directory.

#pragma once

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "spatialsep/dataset/segment.hpp"
#include "spatialsep/scene/render.hpp"
#include "spatialsep/scene/source_material.hpp"
#include "spatialsep/wav.hpp"

namespace spatialsep::scene {

inline constexpr int kSceneSchemaVersion = 1;

namespace detail {

inline Vec3 vec3(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(std::string(what) + " must be [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline nlohmann::json to_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

}  // namespace detail

inline SceneSpec scene_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kSceneSchemaVersion)
      throw ConfigError("unsupported scene schema_version " + std::to_string(version));
    SceneSpec s;
    s.room.sample_rate = j.value("sample_rate", 48000.0);
    const double duration = j.value("duration", 3.0);
    if (j.contains("room")) {
      const auto& r = j.at("room");
      if (r.contains("dims")) s.room.dims = detail::vec3(r.at("dims"), "room.dims");
      if (r.contains("absorption")) {
        const auto& a = r.at("absorption");
        if (a.is_number()) {
          s.room.absorption.fill(a.get<double>());
        } else {
          if (!a.is_array() || a.size() != 6) throw ConfigError("room.absorption needs 1 or 6 values");
          for (std::size_t i = 0; i < 6; ++i) s.room.absorption[i] = a[i].get<double>();
        }
      }
      s.room.max_image_order = r.value("max_image_order", s.room.max_image_order);
      s.room.speed_of_sound = r.value("speed_of_sound", s.room.speed_of_sound);
    }
    s.block_seconds = j.value("block_seconds", s.block_seconds);
    const auto& a = j.at("array");
    s.array_pose.position = detail::vec3(a.at("position"), "array.position");
    s.array_pose.rotation = rotation_from_euler_deg(a.value("yaw_deg", 0.0), a.value("pitch_deg", 0.0),
                                                    a.value("roll_deg", 0.0));
    if (a.contains("mic_positions")) {
      s.geometry.mic_positions.clear();
      for (const auto& m : a.at("mic_positions"))
        s.geometry.mic_positions.push_back(detail::vec3(m, "mic position"));
    }
    if (a.contains("forward_axis")) s.geometry.forward_axis = detail::vec3(a.at("forward_axis"), "forward_axis");
    if (a.contains("lateral_axis")) s.geometry.lateral_axis = detail::vec3(a.at("lateral_axis"), "lateral_axis");

    const auto length = static_cast<std::size_t>(std::llround(duration * s.room.sample_rate));
    std::size_t k = 0;
    for (const auto& src : j.at("sources")) {
      SourceSpec ss;
      ss.id = src.value("id", "source" + std::to_string(k));
      const auto& audio = src.at("audio");
      if (audio.is_string()) {
        auto path = std::filesystem::path(audio.get<std::string>());
        if (path.is_relative()) path = base_dir / path;
        const auto wav = wav::read(path);
        if (wav.sample_rate != s.room.sample_rate)
          throw DataError("source audio " + path.string() + " is not at the scene sample rate");
        ss.audio.assign(wav.channel(0).begin(), wav.channel(0).end());
      } else {
        ss.audio = synth_speech_like(audio.at("synthetic_seed").get<std::uint64_t>(), length,
                                     s.room.sample_rate);
      }
      const auto& t = src.at("trajectory");
      const double dur = double(ss.audio.size()) / s.room.sample_rate;
      if (t.contains("random")) {
        const auto& r = t.at("random");
        Box box{detail::vec3(r.at("bounds").at(0), "bounds"), detail::vec3(r.at("bounds").at(1), "bounds")};
        ss.trajectory = sample_trajectory(r.at("seed").get<std::uint64_t>(), box, dur,
                                          r.value("max_speed", 1.0), t.value("rate", kTrackingRate));
      } else if (t.contains("static")) {
        ss.trajectory = static_trajectory(detail::vec3(t.at("static"), "static position"), dur,
                                          t.value("rate", kTrackingRate));
      } else {
        ss.trajectory = dataset::trajectory_from_json(t);
      }
      s.sources.push_back(std::move(ss));
      ++k;
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed scene: ") + e.what());
  }
}

inline SceneSpec load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scene file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("scene file " + path.string() + " is not valid JSON: " + e.what());
  }
  return scene_from_json(j, path.parent_path());
}

// Trajectory sidecar written next to each rendered source: world-frame
// path plus the array pose needed to label it.
inline nlohmann::json trajectory_sidecar(const SceneSpec& s, std::size_t index) {
  const auto& R = s.array_pose.rotation;
  nlohmann::json rot = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rot.push_back({R(r, 0), R(r, 1), R(r, 2)});
  nlohmann::json mics = nlohmann::json::array();
  for (const auto& m : s.geometry.mic_positions) mics.push_back(detail::to_json(m));
  return {{"source_id", s.sources[index].id},
          {"trajectory", dataset::to_json(s.sources[index].trajectory)},
          {"array",
           {{"position", detail::to_json(s.array_pose.position)},
            {"rotation", rot},
            {"mic_positions", mics},
            {"forward_axis", detail::to_json(s.geometry.forward_axis)},
            {"lateral_axis", detail::to_json(s.geometry.lateral_axis)}}}};
}

struct TrajectorySidecar {
  std::string source_id;
  Trajectory trajectory;
  ArrayPose pose;
  ArrayGeometry geometry;
};

inline TrajectorySidecar parse_trajectory_sidecar(const nlohmann::json& j) {
  try {
    TrajectorySidecar t;
    t.source_id = j.value("source_id", std::string("source"));
    t.trajectory = dataset::trajectory_from_json(j.at("trajectory"));
    const auto& a = j.at("array");
    t.pose.position = detail::vec3(a.at("position"), "array.position");
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t.pose.rotation(r, c) = a.at("rotation").at(r).at(c).get<double>();
    t.geometry.mic_positions.clear();
    for (const auto& m : a.at("mic_positions")) t.geometry.mic_positions.push_back(detail::vec3(m, "mic"));
    t.geometry.forward_axis = detail::vec3(a.at("forward_axis"), "forward_axis");
    t.geometry.lateral_axis = detail::vec3(a.at("lateral_axis"), "lateral_axis");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed trajectory file: ") + e.what());
  }
}

}  // namespace spatialsep::scene
