// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spatialsep/beamform/mvdr.hpp"
#include "spatialsep/dataset/mixture.hpp"
#include "spatialsep/dataset/segment.hpp"
#include "spatialsep/demucs/model.hpp"
#include "spatialsep/eval/parallel.hpp"
#include "spatialsep/metrics/mel.hpp"
#include "spatialsep/metrics/si_sdr.hpp"
#include "spatialsep/wav.hpp"

namespace spatialsep::eval {

enum class Method { kPassthrough, kMvdrOracle, kMvdrOraclePlus1chModel, kSpatialModel };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::kPassthrough: return "passthrough";
    case Method::kMvdrOracle: return "mvdr_oracle";
    case Method::kMvdrOraclePlus1chModel: return "mvdr_oracle_plus_1ch_model";
    case Method::kSpatialModel: return "spatial_model";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  for (Method m : {Method::kPassthrough, Method::kMvdrOracle, Method::kMvdrOraclePlus1chModel,
                   Method::kSpatialModel})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown method '" + s + "'");
}

struct ExperimentConfig {
  scene::RegionSplit split;
  std::vector<std::size_t> mic_subset = scene::mic_preset(8);
  Method method = Method::kMvdrOracle;
  std::filesystem::path spatial_weights;         // spatial_model
  std::filesystem::path single_channel_weights;  // mvdr_oracle_plus_1ch_model
  std::vector<std::filesystem::path> manifests;
  std::uint64_t seed = 0;
  std::size_t n_targets = 1;
  std::size_t n_interferers = 1;
  std::size_t n_mixtures = 50;
  beamform::OracleOptions beamformer;
  metrics::MelConfig mel;

  void validate() const {
    split.validate();
    if (mic_subset.empty()) throw ConfigError("mic_subset must not be empty");
    if (mic_subset.front() != 0) throw ConfigError("mic_subset must start with the reference channel 0");
    for (std::size_t i = 1; i < mic_subset.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (mic_subset[i] == mic_subset[j]) throw ConfigError("mic_subset has duplicate indices");
    if (n_targets == 0 || n_interferers == 0)
      throw ConfigError("sources_per_region needs at least one target and one interferer");
    if (method == Method::kSpatialModel && spatial_weights.empty())
      throw ConfigError("spatial_model needs a weights path");
    if (method == Method::kMvdrOraclePlus1chModel && single_channel_weights.empty())
      throw ConfigError("mvdr_oracle_plus_1ch_model needs a single-channel weights path");
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json manifests = nlohmann::json::array();
  for (const auto& m : c.manifests) manifests.push_back(m.string());
  return {{"split", scene::to_string(c.split.kind)},
          {"near_far_boundary", c.split.near_far_boundary},
          {"mic_subset", c.mic_subset},
          {"method", to_string(c.method)},
          {"spatial_weights", c.spatial_weights.string()},
          {"single_channel_weights", c.single_channel_weights.string()},
          {"manifests", manifests},
          {"seed", c.seed},
          {"sources_per_region", {c.n_targets, c.n_interferers}},
          {"n_mixtures", c.n_mixtures},
          {"block_adaptive", c.beamformer.block_adaptive}};
}

// Missing keys keep their defaults. "mic_count" picks a preset.
inline ExperimentConfig experiment_from_json(const nlohmann::json& j, ExperimentConfig c = {}) {
  try {
    if (j.contains("split")) c.split.kind = scene::split_kind_from_string(j.at("split").get<std::string>());
    c.split.near_far_boundary = j.value("near_far_boundary", c.split.near_far_boundary);
    if (j.contains("mic_count")) c.mic_subset = scene::mic_preset(j.at("mic_count").get<std::size_t>());
    if (j.contains("mic_subset")) c.mic_subset = j.at("mic_subset").get<std::vector<std::size_t>>();
    if (j.contains("method")) c.method = method_from_string(j.at("method").get<std::string>());
    if (j.contains("spatial_weights")) c.spatial_weights = j.at("spatial_weights").get<std::string>();
    if (j.contains("single_channel_weights"))
      c.single_channel_weights = j.at("single_channel_weights").get<std::string>();
    if (j.contains("manifests")) {
      c.manifests.clear();
      for (const auto& m : j.at("manifests")) c.manifests.emplace_back(m.get<std::string>());
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("sources_per_region")) {
      const auto& s = j.at("sources_per_region");
      c.n_targets = s.at(0).get<std::size_t>();
      c.n_interferers = s.at(1).get<std::size_t>();
    }
    c.n_mixtures = j.value("n_mixtures", c.n_mixtures);
    c.beamformer.block_adaptive = j.value("block_adaptive", c.beamformer.block_adaptive);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  }
  return c;
}

struct EvalRecord {
  std::string segment_id;
  std::string method;
  std::string split;
  double si_sdr_in = 0.0;
  double si_sdr_out = 0.0;
  double si_sdri = 0.0;
  double mel_l2 = 0.0;
  double mean_angular_distance = 0.0;    // degrees
  double mean_cartesian_distance = 0.0;  // metres
  std::size_t n_targets = 0;
  std::size_t n_interferers = 0;
  std::size_t mic_count = 0;

  bool operator==(const EvalRecord&) const = default;
};

inline nlohmann::json to_json(const EvalRecord& r) {
  return {{"segment_id", r.segment_id},
          {"method", r.method},
          {"split", r.split},
          {"si_sdr_in", r.si_sdr_in},
          {"si_sdr_out", r.si_sdr_out},
          {"si_sdri", r.si_sdri},
          {"mel_l2", r.mel_l2},
          {"mean_angular_distance", r.mean_angular_distance},
          {"mean_cartesian_distance", r.mean_cartesian_distance},
          {"n_targets", r.n_targets},
          {"n_interferers", r.n_interferers},
          {"mic_count", r.mic_count}};
}

inline EvalRecord eval_record_from_json(const nlohmann::json& j) {
  try {
    EvalRecord r;
    r.segment_id = j.at("segment_id").get<std::string>();
    r.method = j.value("method", std::string());
    r.split = j.value("split", std::string());
    r.si_sdr_in = j.at("si_sdr_in").get<double>();
    r.si_sdr_out = j.at("si_sdr_out").get<double>();
    r.si_sdri = j.at("si_sdri").get<double>();
    r.mel_l2 = j.at("mel_l2").get<double>();
    r.mean_angular_distance = j.at("mean_angular_distance").get<double>();
    r.mean_cartesian_distance = j.at("mean_cartesian_distance").get<double>();
    r.n_targets = j.at("n_targets").get<std::size_t>();
    r.n_interferers = j.at("n_interferers").get<std::size_t>();
    r.mic_count = j.at("mic_count").get<std::size_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed eval record: ") + e.what());
  }
}

inline void write_records(const std::filesystem::path& path, const std::vector<EvalRecord>& records) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  for (const auto& r : records) os << to_json(r).dump() << '\n';
}

inline std::vector<EvalRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<EvalRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(eval_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// Time-averaged angle (degrees, seen from the array origin) and Euclidean
// distance between two array-frame trajectories, over their common samples.
struct SpatialDescriptors {
  double angle_deg = 0.0;
  double distance = 0.0;
};

inline SpatialDescriptors spatial_descriptors(const scene::Trajectory& a, const scene::Trajectory& b) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n == 0) throw DataError("spatial descriptors need non-empty trajectories");
  double angle = 0.0, dist = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& p = a.positions[i];
    const Vec3& q = b.positions[i];
    const double denom = p.norm() * q.norm();
    if (denom > 0.0) angle += std::atan2(p.cross(q).norm(), p.dot(q));
    dist += (p - q).norm();
  }
  return {angle / double(n) * 180.0 / kPi, dist / double(n)};
}

struct Aggregate {
  std::size_t count = 0;
  double si_sdr_in = 0.0;
  double si_sdr_out = 0.0;
  double si_sdri = 0.0;
  double mel_l2 = 0.0;
  double mean_angular_distance = 0.0;
  double mean_cartesian_distance = 0.0;
};

inline Aggregate aggregate(const std::vector<EvalRecord>& records) {
  Aggregate a;
  a.count = records.size();
  if (records.empty()) return a;
  for (const auto& r : records) {
    a.si_sdr_in += r.si_sdr_in;
    a.si_sdr_out += r.si_sdr_out;
    a.si_sdri += r.si_sdri;
    a.mel_l2 += r.mel_l2;
    a.mean_angular_distance += r.mean_angular_distance;
    a.mean_cartesian_distance += r.mean_cartesian_distance;
  }
  const double n = double(records.size());
  a.si_sdr_in /= n;
  a.si_sdr_out /= n;
  a.si_sdri /= n;
  a.mel_l2 /= n;
  a.mean_angular_distance /= n;
  a.mean_cartesian_distance /= n;
  return a;
}

inline nlohmann::json to_json(const Aggregate& a) {
  return {{"count", a.count},
          {"si_sdr_in", a.si_sdr_in},
          {"si_sdr_out", a.si_sdr_out},
          {"si_sdri", a.si_sdri},
          {"mel_l2", a.mel_l2},
          {"mean_angular_distance", a.mean_angular_distance},
          {"mean_cartesian_distance", a.mean_cartesian_distance}};
}

// Loaded models for the model-based methods, shared read-only by workers.
struct Models {
  std::shared_ptr<const demucs::Model> spatial;
  std::shared_ptr<const demucs::Model> single_channel;
};

// Loads and checks every weight file the method needs. Runs before any audio
// is touched so a bad path fails fast.
inline Models load_models(const ExperimentConfig& cfg) {
  Models m;
  auto load = [](const std::filesystem::path& p) {
    if (!std::filesystem::exists(p)) throw DataError("weights file not found: " + p.string());
    return std::make_shared<const demucs::Model>(demucs::load_weights(p));
  };
  if (cfg.method == Method::kSpatialModel) {
    m.spatial = load(cfg.spatial_weights);
    if (std::size_t(m.spatial->config().channels) != cfg.mic_subset.size())
      throw ConfigError("spatial model expects " + std::to_string(m.spatial->config().channels) +
                        " channels but mic_subset has " + std::to_string(cfg.mic_subset.size()));
  }
  if (cfg.method == Method::kMvdrOraclePlus1chModel) {
    m.single_channel = load(cfg.single_channel_weights);
    if (m.single_channel->config().channels != 1)
      throw ConfigError("mvdr_oracle_plus_1ch_model needs a single-channel weight file");
  }
  return m;
}

inline MultichannelAudio select_channels(const MultichannelAudio& a, const std::vector<std::size_t>& idx) {
  MultichannelAudio out(Eigen::Index(idx.size()), a.frames(), a.sample_rate);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= std::size_t(a.channels()))
      throw ConfigError("mic index " + std::to_string(idx[k]) + " out of range for " +
                        std::to_string(a.channels()) + "-channel audio");
    out.samples.row(Eigen::Index(k)) = a.samples.row(Eigen::Index(idx[k]));
  }
  return out;
}

// Runs one method on one mixture (already restricted to the mic subset) and
// returns the single-channel estimate.
inline MultichannelAudio run_method(Method method, const dataset::Mixture& mix, const Models& models,
                                    const ExperimentConfig& cfg) {
  switch (method) {
    case Method::kPassthrough:
      return MultichannelAudio(mix.mixture.samples.topRows(1), mix.mixture.sample_rate);
    case Method::kMvdrOracle:
      return beamform::oracle_mvdr(mix.mixture, mix.target_reference, mix.interference, cfg.beamformer);
    case Method::kMvdrOraclePlus1chModel: {
      const auto bf =
          beamform::oracle_mvdr(mix.mixture, mix.target_reference, mix.interference, cfg.beamformer);
      return demucs::forward(bf, *models.single_channel);
    }
    case Method::kSpatialModel: {
      const auto y = demucs::forward(mix.mixture, *models.spatial);
      return MultichannelAudio(y.samples.topRows(1), y.sample_rate);
    }
  }
  throw ConfigError("unknown method");
}

struct MixtureInput {
  std::string id;
  dataset::Mixture mixture;  // full-array stems
  scene::Trajectory first_target;
  scene::Trajectory first_interferer;
  std::size_t n_targets = 1;
  std::size_t n_interferers = 1;
};

inline EvalRecord evaluate_mixture(const MixtureInput& in, const ExperimentConfig& cfg,
                                   const Models& models) {
  dataset::Mixture mix;
  mix.mixture = select_channels(in.mixture.mixture, cfg.mic_subset);
  mix.target_reference = select_channels(in.mixture.target_reference, cfg.mic_subset);
  mix.interference = select_channels(in.mixture.interference, cfg.mic_subset);

  const MultichannelAudio est = run_method(cfg.method, mix, models, cfg);
  const MultichannelAudio ref(mix.target_reference.samples.topRows(1), mix.mixture.sample_rate);
  const MultichannelAudio input(mix.mixture.samples.topRows(1), mix.mixture.sample_rate);

  EvalRecord r;
  r.segment_id = in.id;
  r.method = to_string(cfg.method);
  r.split = scene::to_string(cfg.split.kind);
  r.si_sdr_in = metrics::si_sdr(input, ref);
  r.si_sdr_out = metrics::si_sdr(est, ref);
  r.si_sdri = r.si_sdr_out - r.si_sdr_in;
  r.mel_l2 = metrics::mel_l2(est, ref, cfg.mel);
  const auto d = spatial_descriptors(in.first_target, in.first_interferer);
  r.mean_angular_distance = d.angle_deg;
  r.mean_cartesian_distance = d.distance;
  r.n_targets = in.n_targets;
  r.n_interferers = in.n_interferers;
  r.mic_count = cfg.mic_subset.size();
  return r;
}

struct EvalResult {
  std::vector<EvalRecord> records;
  Aggregate aggregate;
};

// Segment pool read from the manifests, split by region.
struct SegmentPool {
  std::vector<dataset::SegmentRecord> targets;
  std::vector<dataset::SegmentRecord> interferers;
  std::vector<std::filesystem::path> target_dirs, interferer_dirs;
};

inline SegmentPool load_pool(const ExperimentConfig& cfg) {
  SegmentPool p;
  for (const auto& m : cfg.manifests) {
    if (!std::filesystem::exists(m)) throw DataError("manifest not found: " + m.string());
    const auto dir = m.parent_path();
    for (auto& r : dataset::read_manifest(m)) {
      if (r.split.kind != cfg.split.kind) continue;
      if (r.region == scene::Region::kTarget) {
        p.targets.push_back(std::move(r));
        p.target_dirs.push_back(dir);
      } else if (r.region == scene::Region::kInterference) {
        p.interferers.push_back(std::move(r));
        p.interferer_dirs.push_back(dir);
      }
    }
  }
  if (p.targets.size() < cfg.n_targets)
    throw DataError("manifests hold " + std::to_string(p.targets.size()) + " target segments, need " +
                    std::to_string(cfg.n_targets));
  if (p.interferers.size() < cfg.n_interferers)
    throw DataError("manifests hold " + std::to_string(p.interferers.size()) +
                    " interference segments, need " + std::to_string(cfg.n_interferers));
  return p;
}

// k distinct indices out of n, drawn by a partial Fisher-Yates shuffle.
inline std::vector<std::size_t> draw_distinct(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
  idx.resize(k);
  return idx;
}

inline std::uint64_t mixture_seed(std::uint64_t seed, std::size_t k) {
  return seed ^ (0x9e3779b97f4a7c15ULL * (std::uint64_t(k) + 1));
}

inline MixtureInput build_mixture_input(const SegmentPool& pool, const ExperimentConfig& cfg,
                                        std::size_t k) {
  Rng rng(mixture_seed(cfg.seed, k));
  const auto ti = draw_distinct(rng, pool.targets.size(), cfg.n_targets);
  const auto ii = draw_distinct(rng, pool.interferers.size(), cfg.n_interferers);
  dataset::MixtureSpec spec;
  for (auto i : ti) spec.target_segments.push_back(pool.targets[i]);
  for (auto i : ii) spec.interference_segments.push_back(pool.interferers[i]);
  spec.seed = rng.next();
  std::map<std::string, std::filesystem::path> dirs;
  for (auto i : ti) dirs[pool.targets[i].segment_id] = pool.target_dirs[i];
  for (auto i : ii) dirs[pool.interferers[i].segment_id] = pool.interferer_dirs[i];
  auto loader = [&](const dataset::SegmentRecord& r) {
    auto audio = wav::read(dirs.at(r.segment_id) / r.audio_path);
    if (audio.sample_rate != r.sample_rate)
      throw DataError("segment " + r.segment_id + " sample rate differs from its manifest entry");
    return audio;
  };
  MixtureInput in;
  in.mixture = dataset::make_mixture(spec, loader);
  char id[32];
  std::snprintf(id, sizeof id, "mix_%05zu", k);
  in.id = id;
  in.first_target = spec.target_segments.front().trajectory_slice;
  in.first_interferer = spec.interference_segments.front().trajectory_slice;
  in.n_targets = cfg.n_targets;
  in.n_interferers = cfg.n_interferers;
  return in;
}

// Builds cfg.n_mixtures mixtures from the manifests and evaluates them on
// `jobs` workers. Mixture k depends only on (seed, k), so results do not
// depend on the job count.
inline EvalResult evaluate_system(const ExperimentConfig& cfg, std::size_t jobs = 1) {
  cfg.validate();
  const Models models = load_models(cfg);
  const SegmentPool pool = load_pool(cfg);
  EvalResult res;
  res.records.resize(cfg.n_mixtures);
  parallel_for(cfg.n_mixtures, jobs, [&](std::size_t k) {
    res.records[k] = evaluate_mixture(build_mixture_input(pool, cfg, k), cfg, models);
  });
  res.aggregate = aggregate(res.records);
  return res;
}

}  // namespace spatialsep::eval
