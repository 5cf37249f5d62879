// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "spatialsep/eval/experiment.hpp"

namespace spatialsep::eval {

// Mean output SI-SDR over (angle, distance) cells. Bin k covers
// [k * width, (k + 1) * width); the grid extends to the largest descriptor.
struct SpatialGrid {
  double angle_bin_deg = 20.0;
  double distance_bin_m = 0.5;
  std::size_t angle_bins = 0;
  std::size_t distance_bins = 0;
  std::vector<std::optional<double>> mean;  // [angle][distance], row-major
  std::vector<std::size_t> count;

  std::optional<double> at(std::size_t a, std::size_t d) const { return mean[a * distance_bins + d]; }
  std::size_t count_at(std::size_t a, std::size_t d) const { return count[a * distance_bins + d]; }
};

inline SpatialGrid spatial_analysis(const std::vector<EvalRecord>& records, double angle_bin_deg = 20.0,
                                    double distance_bin_m = 0.5) {
  if (!(angle_bin_deg > 0.0) || !(distance_bin_m > 0.0))
    throw ConfigError("spatial_analysis: bin widths must be positive");
  SpatialGrid g;
  g.angle_bin_deg = angle_bin_deg;
  g.distance_bin_m = distance_bin_m;
  auto abin = [&](double a) { return std::size_t(std::max(0.0, std::floor(a / angle_bin_deg))); };
  auto dbin = [&](double d) { return std::size_t(std::max(0.0, std::floor(d / distance_bin_m))); };
  for (const auto& r : records) {
    if (!std::isfinite(r.mean_angular_distance) || !std::isfinite(r.mean_cartesian_distance))
      throw DataError("record " + r.segment_id + " lacks spatial descriptors");
    g.angle_bins = std::max(g.angle_bins, abin(r.mean_angular_distance) + 1);
    g.distance_bins = std::max(g.distance_bins, dbin(r.mean_cartesian_distance) + 1);
  }
  std::vector<double> sum(g.angle_bins * g.distance_bins, 0.0);
  g.count.assign(sum.size(), 0);
  for (const auto& r : records) {
    const std::size_t i = abin(r.mean_angular_distance) * g.distance_bins + dbin(r.mean_cartesian_distance);
    sum[i] += r.si_sdr_out;
    ++g.count[i];
  }
  g.mean.resize(sum.size());
  for (std::size_t i = 0; i < sum.size(); ++i)
    if (g.count[i] > 0) g.mean[i] = sum[i] / double(g.count[i]);
  return g;
}

inline void write_grid_csv(std::ostream& os, const SpatialGrid& g) {
  os << "angle_lo_deg,angle_hi_deg,distance_lo_m,distance_hi_m,count,mean_si_sdr\n";
  char buf[160];
  for (std::size_t a = 0; a < g.angle_bins; ++a)
    for (std::size_t d = 0; d < g.distance_bins; ++d) {
      const auto m = g.at(a, d);
      std::snprintf(buf, sizeof buf, "%g,%g,%g,%g,%zu,", a * g.angle_bin_deg, (a + 1) * g.angle_bin_deg,
                    d * g.distance_bin_m, (d + 1) * g.distance_bin_m, g.count_at(a, d));
      os << buf;
      if (m) {
        std::snprintf(buf, sizeof buf, "%.3f", *m);
        os << buf;
      }
      os << '\n';
    }
}

// One row per (split, mic_count, method), in order of first appearance.
struct TableRow {
  std::string split;
  std::size_t mic_count = 0;
  std::string method;
  Aggregate stats;
};

inline std::vector<TableRow> summary_table(const std::vector<EvalRecord>& records) {
  std::vector<TableRow> rows;
  std::vector<std::vector<EvalRecord>> groups;
  for (const auto& r : records) {
    std::size_t i = 0;
    for (; i < rows.size(); ++i)
      if (rows[i].split == r.split && rows[i].mic_count == r.mic_count && rows[i].method == r.method) break;
    if (i == rows.size()) {
      rows.push_back({r.split, r.mic_count, r.method, {}});
      groups.emplace_back();
    }
    groups[i].push_back(r);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].stats = aggregate(groups[i]);
  return rows;
}

inline void write_table_csv(std::ostream& os, const std::vector<TableRow>& rows) {
  os << "split,mic_count,method,out_db,out_minus_in_db,mel_l2,count\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%s,%.1f,%.1f,%.3f,%zu\n", r.split.c_str(), r.mic_count,
                  r.method.c_str(), r.stats.si_sdr_out, r.stats.si_sdri, r.stats.mel_l2, r.stats.count);
    os << buf;
  }
}

inline void write_table_text(std::ostream& os, const std::vector<TableRow>& rows) {
  std::size_t mw = 6;
  for (const auto& r : rows) mw = std::max(mw, r.method.size());
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %4s  %-*s %8s %8s %8s\n", "split", "mics", int(mw), "method", "out",
                "out-in", "mel");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-10s %4zu  %-*s %8.1f %8.1f %8.3f\n", r.split.c_str(), r.mic_count,
                  int(mw), r.method.c_str(), r.stats.si_sdr_out, r.stats.si_sdri, r.stats.mel_l2);
    os << buf;
  }
}

}  // namespace spatialsep::eval
