// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace spatialsep {

inline constexpr const char* kVersion = "0.3.0";
inline constexpr double kPi = 3.14159265358979323846;

// Invalid user configuration (bad flags, malformed config/scene JSON,
// inconsistent parameters). The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent data (unreadable WAV, shape mismatch between stems,
// corrupt weight file). The CLI maps this to exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vec3 = Eigen::Vector3d;
using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// C x T block of samples at a fixed rate. Rows are channels and are
// contiguous in memory, so channel(c) is a plain span.
struct MultichannelAudio {
  double sample_rate = 48000.0;
  RowMatrixXd samples;

  MultichannelAudio() = default;
  MultichannelAudio(Eigen::Index channels, Eigen::Index frames,
                    double rate = 48000.0)
      : sample_rate(rate), samples(RowMatrixXd::Zero(channels, frames)) {}
  MultichannelAudio(RowMatrixXd data, double rate)
      : sample_rate(rate), samples(std::move(data)) {}

  Eigen::Index channels() const { return samples.rows(); }
  Eigen::Index frames() const { return samples.cols(); }
  double duration() const { return static_cast<double>(frames()) / sample_rate; }

  std::span<double> channel(Eigen::Index c) {
    return {samples.row(c).data(), static_cast<std::size_t>(frames())};
  }
  std::span<const double> channel(Eigen::Index c) const {
    return {samples.row(c).data(), static_cast<std::size_t>(frames())};
  }
};

// SplitMix64-seeded xoshiro256** generator. Used instead of <random>
// distributions so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t z = seed;
    for (auto& s : state_) s = splitmix(z);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }

  double normal() {
    // Box-Muller, one value per call.
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  static std::uint64_t splitmix(std::uint64_t& z) {
    z += 0x9e3779b97f4a7c15ULL;
    std::uint64_t r = z;
    r = (r ^ (r >> 30)) * 0xbf58476d1ce4e5b9ULL;
    r = (r ^ (r >> 27)) * 0x94d049bb133111ebULL;
    return r ^ (r >> 31);
  }
  std::uint64_t state_[4]{};
};

inline double db_to_gain(double db) { return std::pow(10.0, db / 20.0); }
inline double gain_to_db(double g) { return 20.0 * std::log10(g); }

inline double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

}  // namespace spatialsep
