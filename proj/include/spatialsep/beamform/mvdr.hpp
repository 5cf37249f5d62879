// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Oracle mask-based MVDR with a reference microphone:
//   ideal ratio mask at the reference channel
//   -> mask-weighted spatial covariances of the mixture STFT
//   -> w(f) = (Phi_n + dI)^-1 Phi_s u / tr((Phi_n + dI)^-1 Phi_s)
//   -> s(t, f) = w(f)^H y(t, f)

#pragma once

#include <complex>
#include <vector>

#include "spatialsep/common.hpp"
#include "spatialsep/dsp/stft.hpp"

namespace spatialsep::beamform {

using cd = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kMaskEps = 1e-12;
inline constexpr double kLoading = 1e-6;
inline constexpr double kTraceFloor = 1e-12;

// [frame][bin], every entry in [0, 1].
struct MaskTensor {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> values;

  double& at(std::size_t t, std::size_t f) { return values[t * bins + f]; }
  double at(std::size_t t, std::size_t f) const { return values[t * bins + f]; }
};

inline MaskTensor ideal_ratio_mask(const dsp::Spectrogram& target,
                                   const dsp::Spectrogram& interference,
                                   std::size_t ref_channel = 0) {
  if (!target.same_shape(interference))
    throw DataError("ideal_ratio_mask: target and interference spectrograms differ in shape");
  if (ref_channel >= target.channels) throw ConfigError("ideal_ratio_mask: bad reference channel");
  MaskTensor m{target.frames, target.bins, std::vector<double>(target.frames * target.bins)};
  for (std::size_t t = 0; t < m.frames; ++t)
    for (std::size_t f = 0; f < m.bins; ++f) {
      const double s = std::abs(target.at(ref_channel, t, f));
      const double n = std::abs(interference.at(ref_channel, t, f));
      m.at(t, f) = s / (s + n + kMaskEps);
    }
  return m;
}

struct CovarianceSet {
  std::vector<CMatrix> phi_s;  // one C x C matrix per bin
  std::vector<CMatrix> phi_n;
  std::vector<double> target_weight;  // sum_t m(t, f)
  std::vector<double> noise_weight;   // sum_t (1 - m(t, f))
  // Set when the corresponding weight sum is zero and the matrix was
  // zeroed instead of normalized.
  std::vector<bool> target_empty;
  std::vector<bool> noise_empty;

  std::size_t bins() const { return phi_s.size(); }
  Eigen::Index channels() const { return phi_s.empty() ? 0 : phi_s.front().rows(); }
};

namespace detail {

inline void accumulate(const dsp::Spectrogram& y, const MaskTensor& mask, std::size_t t0,
                       std::size_t t1, CovarianceSet& cov) {
  const auto C = static_cast<Eigen::Index>(y.channels);
  const std::size_t F = y.bins;
  cov.phi_s.assign(F, CMatrix::Zero(C, C));
  cov.phi_n.assign(F, CMatrix::Zero(C, C));
  cov.target_weight.assign(F, 0.0);
  cov.noise_weight.assign(F, 0.0);
  cov.target_empty.assign(F, false);
  cov.noise_empty.assign(F, false);
  CVector v(C);
  for (std::size_t f = 0; f < F; ++f) {
    CMatrix& ps = cov.phi_s[f];
    CMatrix& pn = cov.phi_n[f];
    for (std::size_t t = t0; t < t1; ++t) {
      for (Eigen::Index c = 0; c < C; ++c) v[c] = y.at(std::size_t(c), t, f);
      const double m = mask.at(t, f);
      const CMatrix outer = v * v.adjoint();
      ps += m * outer;
      pn += (1.0 - m) * outer;
      cov.target_weight[f] += m;
      cov.noise_weight[f] += 1.0 - m;
    }
    if (cov.target_weight[f] > 0.0) {
      ps /= cov.target_weight[f];
    } else {
      ps.setZero();
      cov.target_empty[f] = true;
    }
    if (cov.noise_weight[f] > 0.0) {
      pn /= cov.noise_weight[f];
    } else {
      pn.setZero();
      cov.noise_empty[f] = true;
    }
    // exact Hermitian symmetry
    ps = 0.5 * (ps + ps.adjoint()).eval();
    pn = 0.5 * (pn + pn.adjoint()).eval();
  }
}

}  // namespace detail

// Segment-level covariances over all frames.
inline CovarianceSet spatial_covariances(const dsp::Spectrogram& mixture, const MaskTensor& mask) {
  if (mask.frames != mixture.frames || mask.bins != mixture.bins)
    throw DataError("spatial_covariances: mask and mixture shapes differ");
  CovarianceSet cov;
  detail::accumulate(mixture, mask, 0, mixture.frames, cov);
  return cov;
}

struct BeamformerWeights {
  std::vector<CVector> w;  // per bin
  std::size_t reference_channel = 0;
  std::vector<bool> passthrough;  // bins where the trace fell below the floor

  std::size_t bins() const { return w.size(); }
  std::size_t passthrough_count() const {
    return static_cast<std::size_t>(std::count(passthrough.begin(), passthrough.end(), true));
  }
};

inline BeamformerWeights mvdr_weights(const CovarianceSet& cov, std::size_t ref = 0) {
  const Eigen::Index C = cov.channels();
  if (C == 0) throw DataError("mvdr_weights: empty covariance set");
  if (ref >= std::size_t(C)) throw ConfigError("mvdr_weights: bad reference channel");
  BeamformerWeights out;
  out.reference_channel = ref;
  out.w.resize(cov.bins());
  out.passthrough.assign(cov.bins(), false);
  const CVector u = CVector::Unit(C, Eigen::Index(ref));
  for (std::size_t f = 0; f < cov.bins(); ++f) {
    const CMatrix& pn = cov.phi_n[f];
    const double delta = kLoading * pn.trace().real() / double(C);
    CMatrix loaded = pn;
    loaded.diagonal().array() += delta;

    bool ok = delta > 0.0;
    CMatrix num;
    if (ok) {
      // Hermitian positive definite after loading
      Eigen::LDLT<CMatrix> ldlt(loaded);
      ok = ldlt.info() == Eigen::Success;
      if (ok) num = ldlt.solve(cov.phi_s[f]);
    }
    const cd tr = ok ? num.trace() : cd(0.0);
    if (!ok || !std::isfinite(std::abs(tr)) || std::abs(tr) < kTraceFloor) {
      out.w[f] = u;
      out.passthrough[f] = true;
      continue;
    }
    out.w[f] = num.col(Eigen::Index(ref)) / tr;
    if (!out.w[f].allFinite()) {
      out.w[f] = u;
      out.passthrough[f] = true;
    }
  }
  return out;
}

// s(t, f) = w(f)^H y(t, f), as a single-channel spectrogram.
inline dsp::Spectrogram beamform_spectrogram(const dsp::Spectrogram& y, const BeamformerWeights& w) {
  if (w.bins() != y.bins) throw ConfigError("apply_mvdr: weights and STFT config differ");
  if (w.w.front().size() != Eigen::Index(y.channels))
    throw DataError("apply_mvdr: weights and mixture differ in channel count");
  dsp::Spectrogram s(y.config, y.sample_rate, 1, y.frames, y.signal_length);
  for (std::size_t t = 0; t < y.frames; ++t)
    for (std::size_t f = 0; f < y.bins; ++f) {
      cd acc = 0.0;
      for (std::size_t c = 0; c < y.channels; ++c)
        acc += std::conj(w.w[f][Eigen::Index(c)]) * y.at(c, t, f);
      s.at(0, t, f) = acc;
    }
  return s;
}

inline MultichannelAudio apply_mvdr(const MultichannelAudio& mixture, const BeamformerWeights& w,
                                    const dsp::StftConfig& cfg) {
  if (w.bins() != cfg.bins()) throw ConfigError("apply_mvdr: weights and STFT config differ");
  return dsp::istft(beamform_spectrogram(dsp::stft(mixture, cfg), w));
}

struct OracleOptions {
  dsp::StftConfig stft;
  std::size_t reference_channel = 0;
  // Block-adaptive covariances (block_seconds long, 50% overlap) instead of
  // one covariance per segment.
  bool block_adaptive = false;
  double block_seconds = 1.0;
};

// Full oracle pipeline. `target` and `interference` are the multichannel
// stems whose sum is `mixture`; only their reference channel is used, to
// build the mask.
inline MultichannelAudio oracle_mvdr(const MultichannelAudio& mixture,
                                     const MultichannelAudio& target,
                                     const MultichannelAudio& interference,
                                     const OracleOptions& opt = {}) {
  if (target.frames() != mixture.frames() || interference.frames() != mixture.frames())
    throw DataError("oracle_mvdr: stems and mixture differ in length");
  const auto Y = dsp::stft(mixture, opt.stft);
  const auto S = dsp::stft(target, opt.stft);
  const auto N = dsp::stft(interference, opt.stft);
  const MaskTensor mask = ideal_ratio_mask(S, N, opt.reference_channel);

  if (!opt.block_adaptive) {
    const auto w = mvdr_weights(spatial_covariances(Y, mask), opt.reference_channel);
    return dsp::istft(beamform_spectrogram(Y, w));
  }

  // Triangular crossfade between per-block beamformer outputs.
  const auto block = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::llround(opt.block_seconds * mixture.sample_rate /
                                               double(opt.stft.hop))));
  const std::size_t hop = std::max<std::size_t>(1, block / 2);
  dsp::Spectrogram out(Y.config, Y.sample_rate, 1, Y.frames, Y.signal_length);
  std::vector<double> weight(Y.frames, 0.0);
  for (std::size_t start = 0;; start += hop) {
    const std::size_t end = std::min(Y.frames, start + block);
    CovarianceSet cov;
    detail::accumulate(Y, mask, start, end, cov);
    const auto w = mvdr_weights(cov, opt.reference_channel);
    const auto s = beamform_spectrogram(Y, w);
    for (std::size_t t = start; t < end; ++t) {
      const double pos = (double(t - start) + 0.5) / double(block);
      double g = 1.0 - std::abs(2.0 * pos - 1.0);
      if (start == 0 && t - start < block / 2) g = 1.0;
      if (end == Y.frames && t - start >= block / 2) g = 1.0;
      weight[t] += g;
      for (std::size_t f = 0; f < Y.bins; ++f) out.at(0, t, f) += g * s.at(0, t, f);
    }
    if (end == Y.frames) break;
  }
  for (std::size_t t = 0; t < Y.frames; ++t)
    if (weight[t] > 0.0)
      for (std::size_t f = 0; f < Y.bins; ++f) out.at(0, t, f) /= weight[t];
  return dsp::istft(out);
}

}  // namespace spatialsep::beamform
