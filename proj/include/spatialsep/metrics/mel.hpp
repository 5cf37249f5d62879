// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "spatialsep/common.hpp"
#include "spatialsep/dsp/stft.hpp"

namespace spatialsep::metrics {

struct MelConfig {
  std::size_t bands = 80;
  double f_min = 20.0;
  double f_max = 24000.0;
  double log_floor = 1e-5;
  dsp::StftConfig stft;
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular filters equally spaced on the mel scale, each normalized to
// unit area (weights sum to one). A filter too narrow to cover any FFT bin
// falls back to the nearest bin.
inline Eigen::MatrixXd mel_filterbank(const MelConfig& cfg, double sample_rate) {
  const std::size_t n_bins = cfg.stft.bins();
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(Eigen::Index(cfg.bands), Eigen::Index(n_bins));
  const double m_lo = hz_to_mel(cfg.f_min), m_hi = hz_to_mel(cfg.f_max);
  std::vector<double> edges(cfg.bands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(m_lo + (m_hi - m_lo) * double(i) / double(cfg.bands + 1));
  const double bin_hz = sample_rate / double(cfg.stft.fft_len);

  for (std::size_t b = 0; b < cfg.bands; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = double(k) * bin_hz;
      double w = 0.0;
      if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
      fb(Eigen::Index(b), Eigen::Index(k)) = w;
    }
    double area = fb.row(Eigen::Index(b)).sum();
    if (area <= 0.0) {
      const auto k = std::min<std::size_t>(n_bins - 1, std::size_t(std::lround(mid / bin_hz)));
      fb(Eigen::Index(b), Eigen::Index(k)) = 1.0;
      area = 1.0;
    }
    fb.row(Eigen::Index(b)) /= area;
  }
  return fb;
}

// log10 mel power spectrogram of channel 0: [frames x bands].
inline Eigen::MatrixXd log_mel(const MultichannelAudio& audio, const MelConfig& cfg = {}) {
  MultichannelAudio mono(audio.samples.topRows(1), audio.sample_rate);
  const auto spec = dsp::stft(mono, cfg.stft);
  const Eigen::MatrixXd fb = mel_filterbank(cfg, audio.sample_rate);
  Eigen::MatrixXd power(Eigen::Index(spec.frames), Eigen::Index(spec.bins));
  for (std::size_t t = 0; t < spec.frames; ++t)
    for (std::size_t f = 0; f < spec.bins; ++f)
      power(Eigen::Index(t), Eigen::Index(f)) = std::norm(spec.at(0, t, f));
  Eigen::MatrixXd mel = power * fb.transpose();
  return mel.array().max(cfg.log_floor).log10().matrix();
}

// Mean over frames of the Euclidean distance between log-mel vectors.
inline double mel_l2(const MultichannelAudio& estimate, const MultichannelAudio& reference,
                     const MelConfig& cfg = {}) {
  if (estimate.frames() != reference.frames()) throw DataError("mel_l2: length mismatch");
  const Eigen::MatrixXd a = log_mel(estimate, cfg);
  const Eigen::MatrixXd b = log_mel(reference, cfg);
  return (a - b).rowwise().norm().mean();
}

}  // namespace spatialsep::metrics
