// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <vector>

#include "spatialsep/common.hpp"

namespace spatialsep::scene {

// Speech-like test material for self-contained runs: syllables of voiced
// harmonic sound with a gliding pitch and moving formant weights,
// occasional fricative noise bursts, and pauses. Every talker (seed) has
// its own pitch range. Output RMS is -23 dBFS.
inline std::vector<double> synth_speech_like(std::uint64_t seed, std::size_t length,
                                             double fs = 48000.0) {
  Rng rng(seed ^ 0x5eedf00dULL);
  std::vector<double> x(length, 0.0);
  const double f0_base = rng.uniform(95.0, 230.0);

  std::size_t t = static_cast<std::size_t>(rng.uniform(0.0, 0.15) * fs);
  while (t < length) {
    const auto syl = static_cast<std::size_t>(rng.uniform(0.12, 0.32) * fs);
    const bool fricative = rng.uniform() < 0.2;
    const double amp = db_to_gain(rng.uniform(-8.0, 0.0));
    const std::size_t end = std::min(length, t + syl);
    const auto ramp = static_cast<std::size_t>(0.015 * fs);

    auto envelope = [&](std::size_t n) {
      const std::size_t i = n - t, len = end - t;
      double e = 1.0;
      if (i < ramp) e = 0.5 - 0.5 * std::cos(kPi * double(i) / double(ramp));
      if (len - i < ramp) e = std::min(e, 0.5 - 0.5 * std::cos(kPi * double(len - i) / double(ramp)));
      return e;
    };

    if (fricative) {
      // high-passed noise
      double prev = 0.0;
      for (std::size_t n = t; n < end; ++n) {
        const double w = rng.normal();
        x[n] += 0.3 * amp * envelope(n) * (w - 0.95 * prev);
        prev = w;
      }
    } else {
      const double f0_start = f0_base * rng.uniform(0.85, 1.2);
      const double f0_end = f0_base * rng.uniform(0.8, 1.15);
      const std::array<double, 3> formant_a{rng.uniform(300, 850), rng.uniform(900, 2400),
                                            rng.uniform(2400, 3400)};
      const std::array<double, 3> formant_b{rng.uniform(300, 850), rng.uniform(900, 2400),
                                            rng.uniform(2400, 3400)};
      const std::array<double, 3> bandwidth{90.0, 140.0, 220.0};
      double phase = rng.uniform(0.0, 2.0 * kPi);
      for (std::size_t n = t; n < end; ++n) {
        const double u = double(n - t) / double(end - t);
        const double f0 = f0_start + (f0_end - f0_start) * u;
        phase += 2.0 * kPi * f0 / fs;
        if (phase > 2.0 * kPi) phase -= 2.0 * kPi;
        double s = 0.0;
        for (int h = 1; h * f0 < 7000.0; ++h) {
          const double fh = h * f0;
          double g = 0.02 / h;
          for (std::size_t k = 0; k < 3; ++k) {
            const double fk = formant_a[k] + (formant_b[k] - formant_a[k]) * u;
            const double d = (fh - fk) / bandwidth[k];
            g += (k == 0 ? 1.0 : 0.6 / double(k)) * std::exp(-0.5 * d * d);
          }
          s += g * std::sin(h * phase);
        }
        x[n] += amp * envelope(n) * s;
      }
    }
    t = end + static_cast<std::size_t>(rng.uniform(0.03, 0.25) * fs);
  }

  const double r = rms(x);
  if (r > 0.0) {
    const double g = db_to_gain(-23.0) / r;
    for (auto& v : x) v *= g;
  }
  return x;
}

}  // namespace spatialsep::scene
