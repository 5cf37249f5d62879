// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <filesystem>
#include <mutex>
#include <vector>

#include "spatialsep/dataset/segment.hpp"
#include "spatialsep/eval/parallel.hpp"
#include "spatialsep/scene/synthetic.hpp"
#include "spatialsep/wav.hpp"

namespace spatialsep::dataset {

// Writes each segment's audio to dir/<audio_path> and returns the records.
inline std::vector<SegmentRecord> write_segments(const std::vector<Segment>& segments,
                                                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<SegmentRecord> out;
  for (const auto& s : segments) {
    const auto path = dir / s.record.audio_path;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    wav::write(path, s.audio);
    out.push_back(s.record);
  }
  return out;
}

struct SyntheticDatasetOptions {
  scene::SyntheticSceneOptions scene;
  std::size_t n_scenes = 4;
  std::uint64_t seed = 0;
};

// Renders n_scenes random region scenes, segments every source image and
// writes dir/audio/*.wav plus dir/manifest.jsonl. Scene k uses seed + k.
inline std::vector<SegmentRecord> build_synthetic_dataset(const SyntheticDatasetOptions& opt,
                                                          const std::filesystem::path& dir,
                                                          std::size_t jobs = 1) {
  std::vector<std::vector<SegmentRecord>> per_scene(opt.n_scenes);
  eval::parallel_for(opt.n_scenes, jobs, [&](std::size_t k) {
    const auto sc = scene::make_region_scene(opt.seed + k, opt.scene);
    for (std::size_t i = 0; i < sc.spec.sources.size(); ++i) {
      const auto image = scene::render_moving_source(sc.spec, i);
      const std::string id = "scene" + std::to_string(opt.seed + k) + "_" + sc.spec.sources[i].id;
      auto segs = segment_and_label(image, sc.spec.sources[i].trajectory, sc.spec.array_pose,
                                    sc.spec.geometry, opt.scene.split, id);
      for (auto& s : segs) s.record.audio_path = "audio/" + s.record.audio_path;
      auto recs = write_segments(segs, dir);
      per_scene[k].insert(per_scene[k].end(), recs.begin(), recs.end());
    }
  });
  std::vector<SegmentRecord> all;
  for (auto& v : per_scene) all.insert(all.end(), v.begin(), v.end());
  write_manifest(dir / "manifest.jsonl", all);
  return all;
}

}  // namespace spatialsep::dataset
