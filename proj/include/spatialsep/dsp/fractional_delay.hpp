// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "spatialsep/common.hpp"

namespace spatialsep::dsp {

inline constexpr std::size_t kDefaultDelayHalfLen = 32;
inline constexpr double kDefaultKaiserBeta = 8.0;

inline double sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

// Modified Bessel function of the first kind, order 0 (power series; the
// arguments used here stay below ~20).
inline double bessel_i0(double x) {
  const double q = 0.25 * x * x;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 200; ++k) {
    term *= q / (double(k) * double(k));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

// Kaiser window evaluated at u in [-1, 1].
inline double kaiser(double u, double beta) {
  if (u <= -1.0 || u >= 1.0) return 0.0;
  return bessel_i0(beta * std::sqrt(1.0 - u * u)) / bessel_i0(beta);
}

// Interpolation taps for a delay whose fractional part is `frac` in (0, 1).
// tap[j] multiplies x[m0 - half_len + 1 + j] where m0 = floor(n - delay).
inline std::vector<double> fractional_delay_taps(double frac, std::size_t half_len,
                                                 double beta = kDefaultKaiserBeta) {
  std::vector<double> taps(2 * half_len);
  const double h = static_cast<double>(half_len);
  for (std::size_t j = 0; j < taps.size(); ++j) {
    // distance from the interpolation point t = m0 + frac to sample m0 + k
    const double k = static_cast<double>(j) - h + 1.0;
    const double arg = frac - k;
    taps[j] = sinc(arg) * kaiser(arg / h, beta);
  }
  return taps;
}

// Splits a delay into integer and fractional parts; fractional parts within
// 1e-9 of an integer snap to it so integer delays are exact shifts.
inline std::pair<std::ptrdiff_t, double> split_delay(double delay) {
  double whole = std::floor(delay);
  double frac = delay - whole;
  if (frac < 1e-9) {
    frac = 0.0;
  } else if (frac > 1.0 - 1e-9) {
    frac = 0.0;
    whole += 1.0;
  }
  return {static_cast<std::ptrdiff_t>(whole), frac};
}

// y[n] = x(n - delay) by Kaiser-windowed sinc interpolation. Output has the
// input's length; samples that would come from outside x are zero.
inline std::vector<double> fractional_delay(std::span<const double> x, double delay,
                                            std::size_t half_len = kDefaultDelayHalfLen) {
  if (!(delay >= 0.0)) throw std::invalid_argument("fractional_delay: negative delay");
  if (half_len < 8) throw std::invalid_argument("fractional_delay: filter_half_len < 8");

  const auto n_out = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> y(x.size(), 0.0);
  const auto [shift, frac] = split_delay(delay);
  if (frac == 0.0) {
    for (std::ptrdiff_t n = shift; n < n_out; ++n) y[std::size_t(n)] = x[std::size_t(n - shift)];
    return y;
  }
  // n - delay = (n - shift - 1) + (1 - frac)
  const auto taps = fractional_delay_taps(1.0 - frac, half_len);
  const auto h = static_cast<std::ptrdiff_t>(half_len);
  for (std::ptrdiff_t n = 0; n < n_out; ++n) {
    const std::ptrdiff_t m0 = n - shift - 1;
    double acc = 0.0;
    for (std::ptrdiff_t j = 0; j < 2 * h; ++j) {
      const std::ptrdiff_t m = m0 - h + 1 + j;
      if (m >= 0 && m < n_out) acc += taps[std::size_t(j)] * x[std::size_t(m)];
    }
    y[std::size_t(n)] = acc;
  }
  return y;
}

// Adds gain * delta(n - delay) (band-limited) into `out`, dropping taps that
// fall outside it.
inline void add_fractional_impulse(std::span<double> out, double delay, double gain,
                                   std::size_t half_len = kDefaultDelayHalfLen) {
  const auto [shift, frac] = split_delay(delay);
  const auto n_out = static_cast<std::ptrdiff_t>(out.size());
  if (frac == 0.0) {
    if (shift >= 0 && shift < n_out) out[std::size_t(shift)] += gain;
    return;
  }
  const auto h = static_cast<std::ptrdiff_t>(half_len);
  // Impulse at position shift + frac: out[n] += g * sinc(n - shift - frac)
  for (std::ptrdiff_t k = -h + 1; k <= h; ++k) {
    const std::ptrdiff_t n = shift + k;
    if (n < 0 || n >= n_out) continue;
    const double arg = double(k) - frac;
    out[std::size_t(n)] += gain * sinc(arg) * kaiser(arg / double(h), kDefaultKaiserBeta);
  }
}

}  // namespace spatialsep::dsp
