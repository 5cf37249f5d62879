// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "spatialsep/common.hpp"

namespace spatialsep::dsp {

enum class WindowType { kHann };

// Periodic window of length n (w[0] = 0, peak at n/2).
inline std::vector<double> make_window(WindowType type, std::size_t n) {
  std::vector<double> w(n);
  switch (type) {
    case WindowType::kHann:
      for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * double(i) / double(n));
      break;
  }
  return w;
}

struct StftConfig {
  std::size_t window_len = 2048;
  std::size_t hop = 512;
  std::size_t fft_len = 2048;
  WindowType window = WindowType::kHann;

  std::size_t bins() const { return fft_len / 2 + 1; }
  std::size_t pad() const { return window_len / 2; }

  void validate() const {
    if (window_len == 0) throw ConfigError("stft: window_len must be > 0");
    if (hop == 0 || hop > window_len)
      throw ConfigError("stft: hop must satisfy 0 < hop <= window_len");
    if (fft_len < window_len) throw ConfigError("stft: fft_len must be >= window_len");
  }

  // True when shifted copies of the analysis window at this hop sum to a
  // constant.
  bool is_cola(double tol = 1e-9) const {
    if (hop == 0 || hop > window_len) return false;
    const auto w = make_window(window, window_len);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t n = 0; n < hop; ++n) {
      double s = 0.0;
      for (std::size_t m = n; m < window_len; m += hop) s += w[m];
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    return lo > 0.0 && (hi - lo) <= tol * hi;
  }

  bool operator==(const StftConfig&) const = default;
};

// Complex STFT of every channel, laid out [channel][frame][bin].
struct Spectrogram {
  StftConfig config;
  double sample_rate = 48000.0;
  std::size_t channels = 0;
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::size_t signal_length = 0;  // T of the analysed signal
  std::vector<std::complex<double>> data;

  Spectrogram() = default;
  Spectrogram(const StftConfig& cfg, double rate, std::size_t c, std::size_t t,
              std::size_t length)
      : config(cfg), sample_rate(rate), channels(c), frames(t), bins(cfg.bins()),
        signal_length(length), data(c * t * cfg.bins()) {}

  std::complex<double>& at(std::size_t c, std::size_t t, std::size_t f) {
    return data[(c * frames + t) * bins + f];
  }
  const std::complex<double>& at(std::size_t c, std::size_t t, std::size_t f) const {
    return data[(c * frames + t) * bins + f];
  }
  std::span<std::complex<double>> frame(std::size_t c, std::size_t t) {
    return {data.data() + (c * frames + t) * bins, bins};
  }
  std::span<const std::complex<double>> frame(std::size_t c, std::size_t t) const {
    return {data.data() + (c * frames + t) * bins, bins};
  }
  bool same_shape(const Spectrogram& o) const {
    return channels == o.channels && frames == o.frames && bins == o.bins &&
           config == o.config;
  }
};

// Number of frames produced for a length-T signal after the symmetric
// window_len/2 zero padding.
inline std::size_t stft_frame_count(const StftConfig& cfg, std::size_t length) {
  const std::size_t padded = length + 2 * cfg.pad();
  if (padded < cfg.window_len) return 0;
  return (padded - cfg.window_len) / cfg.hop + 1;
}

inline Spectrogram stft(const MultichannelAudio& audio, const StftConfig& cfg) {
  cfg.validate();
  const auto length = static_cast<std::size_t>(audio.frames());
  if (length < cfg.window_len) throw DataError("stft: input too short");

  const std::size_t pad = cfg.pad();
  const std::size_t frames = stft_frame_count(cfg, length);
  const auto window = make_window(cfg.window, cfg.window_len);
  Spectrogram spec(cfg, audio.sample_rate, static_cast<std::size_t>(audio.channels()),
                   frames, length);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> buf(cfg.fft_len);
  std::vector<std::complex<double>> out;
  for (std::size_t c = 0; c < spec.channels; ++c) {
    const auto x = audio.channel(static_cast<Eigen::Index>(c));
    for (std::size_t t = 0; t < frames; ++t) {
      std::fill(buf.begin(), buf.end(), 0.0);
      const std::ptrdiff_t start = std::ptrdiff_t(t * cfg.hop) - std::ptrdiff_t(pad);
      for (std::size_t n = 0; n < cfg.window_len; ++n) {
        const std::ptrdiff_t i = start + std::ptrdiff_t(n);
        if (i >= 0 && i < std::ptrdiff_t(length)) buf[n] = x[std::size_t(i)] * window[n];
      }
      fft.fwd(out, buf);
      std::copy_n(out.begin(), spec.bins, spec.frame(c, t).begin());
    }
  }
  return spec;
}

// Weighted overlap-add: each frame is windowed again and the sum is divided
// by the accumulated squared window, giving the original length back.
inline MultichannelAudio istft(const Spectrogram& spec) {
  const StftConfig& cfg = spec.config;
  cfg.validate();
  if (!cfg.is_cola()) throw ConfigError("istft: window/hop pair is not COLA");

  const std::size_t length = spec.signal_length;
  const std::size_t pad = cfg.pad();
  const auto window = make_window(cfg.window, cfg.window_len);
  MultichannelAudio audio(static_cast<Eigen::Index>(spec.channels),
                          static_cast<Eigen::Index>(length), spec.sample_rate);

  std::vector<double> norm(length, 0.0);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const std::ptrdiff_t start = std::ptrdiff_t(t * cfg.hop) - std::ptrdiff_t(pad);
    for (std::size_t n = 0; n < cfg.window_len; ++n) {
      const std::ptrdiff_t i = start + std::ptrdiff_t(n);
      if (i >= 0 && i < std::ptrdiff_t(length)) norm[std::size_t(i)] += window[n] * window[n];
    }
  }

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> half(spec.bins);
  std::vector<double> buf;
  for (std::size_t c = 0; c < spec.channels; ++c) {
    auto y = audio.channel(static_cast<Eigen::Index>(c));
    for (std::size_t t = 0; t < spec.frames; ++t) {
      const auto fr = spec.frame(c, t);
      std::copy(fr.begin(), fr.end(), half.begin());
      fft.inv(buf, half, cfg.fft_len);
      const std::ptrdiff_t start = std::ptrdiff_t(t * cfg.hop) - std::ptrdiff_t(pad);
      for (std::size_t n = 0; n < cfg.window_len; ++n) {
        const std::ptrdiff_t i = start + std::ptrdiff_t(n);
        if (i >= 0 && i < std::ptrdiff_t(length)) y[std::size_t(i)] += buf[n] * window[n];
      }
    }
    for (std::size_t i = 0; i < length; ++i)
      y[i] = norm[i] > 1e-12 ? y[i] / norm[i] : 0.0;
  }
  return audio;
}

}  // namespace spatialsep::dsp
