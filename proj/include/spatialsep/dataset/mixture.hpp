// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "spatialsep/common.hpp"
#include "spatialsep/dataset/segment.hpp"

namespace spatialsep::dataset {

inline constexpr double kGainRangeDb = 5.0;

struct MixtureSpec {
  std::vector<SegmentRecord> target_segments;
  std::vector<SegmentRecord> interference_segments;
  // One dB offset per segment, targets first. Empty means draw each gain
  // uniformly from [-5, +5] dB using `seed`.
  std::vector<double> gains_db;
  std::uint64_t seed = 0;
};

struct Mixture {
  MultichannelAudio mixture;
  MultichannelAudio target_reference;
  MultichannelAudio interference;  // the complementary stem, for oracle masks
  std::vector<double> gains_db;
  double normalization = 1.0;      // joint scale applied to all three
};

inline std::vector<double> draw_gains_db(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> g(n);
  for (auto& v : g) v = rng.uniform(-kGainRangeDb, kGainRangeDb);
  return g;
}

// mixture = sum of gained targets + sum of gained interferers; the target
// reference keeps all C channels. When the mixture peak would exceed 1.0,
// mixture and stems are scaled by the same factor.
inline Mixture make_mixture(std::span<const MultichannelAudio> targets,
                            std::span<const MultichannelAudio> interferers,
                            std::vector<double> gains_db, std::uint64_t seed) {
  if (targets.empty()) throw ConfigError("mixture needs at least one target segment");
  if (interferers.empty()) throw ConfigError("mixture needs at least one interference segment");
  const std::size_t n = targets.size() + interferers.size();
  if (gains_db.empty()) gains_db = draw_gains_db(n, seed);
  if (gains_db.size() != n)
    throw ConfigError("gains_db must have one entry per segment");

  const auto& first = targets.front();
  auto check = [&](const MultichannelAudio& a) {
    if (a.channels() != first.channels() || a.frames() != first.frames())
      throw DataError("mixture segments differ in channel count or length");
    if (a.sample_rate != first.sample_rate)
      throw DataError("mixture segments differ in sample rate");
  };

  Mixture m;
  m.gains_db = gains_db;
  m.target_reference = MultichannelAudio(first.channels(), first.frames(), first.sample_rate);
  m.interference = m.target_reference;
  std::size_t gi = 0;
  for (const auto& t : targets) {
    check(t);
    m.target_reference.samples += db_to_gain(gains_db[gi++]) * t.samples;
  }
  for (const auto& t : interferers) {
    check(t);
    m.interference.samples += db_to_gain(gains_db[gi++]) * t.samples;
  }
  m.mixture = MultichannelAudio(m.target_reference.samples + m.interference.samples,
                                first.sample_rate);

  const double peak = m.mixture.samples.cwiseAbs().maxCoeff();
  if (peak > 1.0) {
    m.normalization = 1.0 / peak;
    m.mixture.samples *= m.normalization;
    m.target_reference.samples *= m.normalization;
    m.interference.samples *= m.normalization;
  }
  return m;
}

using SegmentLoader = std::function<MultichannelAudio(const SegmentRecord&)>;

inline Mixture make_mixture(const MixtureSpec& spec, const SegmentLoader& load) {
  if (spec.target_segments.empty()) throw ConfigError("mixture needs at least one target segment");
  if (spec.interference_segments.empty())
    throw ConfigError("mixture needs at least one interference segment");
  for (const auto& r : spec.target_segments)
    if (r.region != scene::Region::kTarget)
      throw ConfigError("segment " + r.segment_id + " is not in the target region");
  for (const auto& r : spec.interference_segments)
    if (r.region != scene::Region::kInterference)
      throw ConfigError("segment " + r.segment_id + " is not in the interference region");

  std::vector<MultichannelAudio> t, i;
  for (const auto& r : spec.target_segments) t.push_back(load(r));
  for (const auto& r : spec.interference_segments) i.push_back(load(r));
  return make_mixture(t, i, spec.gains_db, spec.seed);
}

}  // namespace spatialsep::dataset
