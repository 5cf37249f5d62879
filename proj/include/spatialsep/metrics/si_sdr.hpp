// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "spatialsep/common.hpp"

namespace spatialsep::metrics {

inline constexpr double kSiSdrCapDb = 100.0;
inline constexpr double kSiSdrEps = 1e-12;

// Scale-invariant SDR in dB, after removing the mean of both signals,
// clamped to [-100, 100].
template <typename T>
double si_sdr(std::span<const T> estimate, std::span<const T> reference) {
  if (estimate.size() != reference.size()) throw DataError("si_sdr: length mismatch");
  if (estimate.empty()) throw DataError("si_sdr: empty signals");
  const double n = static_cast<double>(reference.size());
  double me = 0.0, mr = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    me += static_cast<double>(estimate[i]);
    mr += static_cast<double>(reference[i]);
  }
  me /= n;
  mr /= n;

  double dot = 0.0, ref_energy = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double r = static_cast<double>(reference[i]) - mr;
    dot += (static_cast<double>(estimate[i]) - me) * r;
    ref_energy += r * r;
  }
  if (ref_energy <= 0.0) throw DataError("si_sdr: reference is all zero");
  const double alpha = dot / ref_energy;

  double target = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double s = alpha * (static_cast<double>(reference[i]) - mr);
    const double e = s - (static_cast<double>(estimate[i]) - me);
    target += s * s;
    noise += e * e;
  }
  if (target == 0.0) return -kSiSdrCapDb;
  const double db = 10.0 * std::log10(target / (noise + kSiSdrEps));
  return std::clamp(db, -kSiSdrCapDb, kSiSdrCapDb);
}

inline double si_sdr(const std::vector<double>& estimate, const std::vector<double>& reference) {
  return si_sdr<double>(std::span<const double>(estimate), std::span<const double>(reference));
}

// Evaluated on channel 0 of each signal.
inline double si_sdr(const MultichannelAudio& estimate, const MultichannelAudio& reference) {
  if (estimate.channels() == 0 || reference.channels() == 0) throw DataError("si_sdr: no channels");
  return si_sdr<double>(estimate.channel(0), reference.channel(0));
}

inline double si_sdr_improvement(const MultichannelAudio& mixture,
                                 const MultichannelAudio& estimate,
                                 const MultichannelAudio& reference) {
  return si_sdr(estimate, reference) - si_sdr(mixture, reference);
}

}  // namespace spatialsep::metrics
