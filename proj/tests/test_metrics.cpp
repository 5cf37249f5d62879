// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch_amalgamated.hpp>

#include "spatialsep/metrics/mel.hpp"
#include "spatialsep/metrics/si_sdr.hpp"

using namespace spatialsep;
using namespace spatialsep::metrics;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> randn(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> x(n);
  for (auto& v : x) v = scale * rng.normal();
  return x;
}

// Independent oracle: SI-SDR from the correlation coefficient of the
// zero-mean signals, 10 log10(rho^2 / (1 - rho^2)), in long double.
double oracle_si_sdr(const std::vector<double>& est, const std::vector<double>& ref) {
  long double me = 0, mr = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) me += est[i], mr += ref[i];
  me /= ref.size();
  mr /= ref.size();
  long double see = 0, srr = 0, ser = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const long double e = est[i] - me, r = ref[i] - mr;
    see += e * e;
    srr += r * r;
    ser += e * r;
  }
  const long double rho2 = ser * ser / (see * srr);
  return double(10.0L * std::log10(rho2 / (1.0L - rho2)));
}

MultichannelAudio mono(const std::vector<double>& x) {
  MultichannelAudio a(1, Eigen::Index(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) a.samples(0, Eigen::Index(i)) = x[i];
  return a;
}

}  // namespace

TEST_CASE("si_sdr fixture: [1,1,0,0] against [1,0,0,0]") {
  const std::vector<double> ref{1, 0, 0, 0}, est{1, 1, 0, 0};
  CHECK_THAT(si_sdr(est, ref), WithinAbs(-3.0103, 0.01));
  CHECK_THAT(si_sdr(est, ref), WithinAbs(10.0 * std::log10(0.5), 1e-9));
}

TEST_CASE("si_sdr caps perfect and scaled reconstructions") {
  Rng rng(1);
  const auto ref = randn(rng, 1000);
  CHECK(si_sdr(ref, ref) == 100.0);
  std::vector<double> twice(ref);
  for (auto& v : twice) v *= 2.0;
  CHECK(si_sdr(twice, ref) == 100.0);
  std::vector<double> neg(ref);
  for (auto& v : neg) v = -v;
  CHECK(si_sdr(neg, ref) == 100.0);
}

TEST_CASE("si_sdr errors") {
  const std::vector<double> a{1, 2, 3}, b{1, 2}, z{0, 0, 0}, c{4, 4, 4};
  CHECK_THROWS_AS(si_sdr(a, b), DataError);
  CHECK_THROWS_AS(si_sdr(a, z), DataError);
  CHECK_THROWS_AS(si_sdr(a, c), DataError);  // zero after mean removal
  CHECK_THROWS_AS(si_sdr(std::vector<double>{}, std::vector<double>{}), DataError);
}

TEST_CASE("si_sdr matches the correlation oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 16 + rng.index(2000);
    const auto ref = randn(rng, n);
    auto est = randn(rng, n, rng.uniform(0.01, 3.0));
    const double g = rng.uniform(-2.0, 2.0);
    for (std::size_t i = 0; i < n; ++i) est[i] += g * ref[i];
    CHECK_THAT(si_sdr(est, ref), WithinAbs(oracle_si_sdr(est, ref), 1e-8));
  }
}

TEST_CASE("si_sdr is scale and DC invariant") {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 8 + rng.index(500);
    const auto ref = randn(rng, n);
    auto est = randn(rng, n);
    for (std::size_t i = 0; i < n; ++i) est[i] += ref[i];
    const double base = si_sdr(est, ref);

    double c = rng.uniform(0.1, 10.0);
    if (rng.uniform() < 0.5) c = -c;
    auto scaled = est;
    for (auto& v : scaled) v *= c;
    CHECK_THAT(si_sdr(scaled, ref), WithinAbs(base, 1e-9));


    auto dc_e = est, dc_r = ref;
    const double de = rng.uniform(-5, 5), dr = rng.uniform(-5, 5);
    for (auto& v : dc_e) v += de;
    for (auto& v : dc_r) v += dr;
    CHECK_THAT(si_sdr(dc_e, ref), WithinAbs(base, 1e-9));
    CHECK_THAT(si_sdr(est, dc_r), WithinAbs(base, 1e-9));
  }
}

TEST_CASE("si_sdr works on float samples and uses channel 0 of multichannel audio") {
  const std::vector<float> ref{1, 0, 0, 0}, est{1, 1, 0, 0};
  CHECK_THAT(si_sdr<float>(std::span<const float>(est), std::span<const float>(ref)),
             WithinAbs(-3.0103, 0.01));
  MultichannelAudio a(2, 4), b(2, 4);
  a.samples.row(0) << 1, 1, 0, 0;
  b.samples.row(0) << 1, 0, 0, 0;
  a.samples.row(1) << 9, -3, 2, 7;
  CHECK_THAT(si_sdr(a, b), WithinAbs(10.0 * std::log10(0.5), 1e-9));
}

TEST_CASE("si_sdr improvement") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ref = randn(rng, 800);
    auto mix = randn(rng, 800), est = randn(rng, 800, 0.3);
    for (std::size_t i = 0; i < 800; ++i) mix[i] += ref[i], est[i] += ref[i];
    const auto m = mono(mix), e = mono(est), r = mono(ref);
    CHECK_THAT(si_sdr_improvement(m, e, r), WithinAbs(oracle_si_sdr(est, ref) - oracle_si_sdr(mix, ref), 1e-8));
    CHECK(si_sdr_improvement(m, m, r) == 0.0);
    CHECK_THAT(si_sdr_improvement(m, r, r), WithinAbs(100.0 - si_sdr(m, r), 1e-12));
  }
}

TEST_CASE("mel scale conversions and filterbank") {
  for (double f : {0.0, 20.0, 700.0, 1000.0, 8000.0, 24000.0})
    CHECK_THAT(mel_to_hz(hz_to_mel(f)), WithinAbs(f, 1e-8));
  CHECK_THAT(hz_to_mel(1000.0), WithinAbs(999.9855, 1e-3));
  const MelConfig cfg;
  const auto fb = mel_filterbank(cfg, 48000.0);
  REQUIRE(fb.rows() == 80);
  REQUIRE(fb.cols() == 1025);
  for (Eigen::Index b = 0; b < fb.rows(); ++b) {
    CHECK_THAT(fb.row(b).sum(), WithinAbs(1.0, 1e-12));
    CHECK(fb.row(b).minCoeff() >= 0.0);
  }
  // centre frequencies increase
  Eigen::VectorXd centroid = fb * Eigen::VectorXd::LinSpaced(1025, 0, 1024);
  for (Eigen::Index b = 1; b < 80; ++b) CHECK(centroid(b) > centroid(b - 1));
}

TEST_CASE("mel_l2 identity, symmetry and level offsets") {
  Rng rng(5);
  const auto x = randn(rng, 48000, 0.1);
  const auto a = mono(x);
  CHECK(mel_l2(a, a) == 0.0);
  const auto b = mono(randn(rng, 48000, 0.1));
  CHECK(mel_l2(a, b) == mel_l2(b, a));
  CHECK(mel_l2(a, b) > 0.0);

  // power spectrogram: x10 amplitude is +2 per log10 band, sqrt(10) is +1
  MultichannelAudio a10(a.samples * 10.0, a.sample_rate), a_sqrt10(a.samples * std::sqrt(10.0), a.sample_rate);
  CHECK_THAT(mel_l2(a10, a), WithinRel(2.0 * std::sqrt(80.0), 1e-9));
  CHECK_THAT(mel_l2(a_sqrt10, a), WithinRel(std::sqrt(80.0), 1e-9));

  CHECK_THROWS_AS(mel_l2(a, mono(randn(rng, 47999))), DataError);
}

TEST_CASE("mel_l2 floors silence") {
  const auto s = mono(std::vector<double>(4096, 0.0));
  const auto lm = log_mel(s);
  CHECK(lm.maxCoeff() == -5.0);
  CHECK(lm.minCoeff() == -5.0);
}

TEST_CASE("mel_l2 satisfies the triangle inequality") {
  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = mono(randn(rng, 8192, rng.uniform(0.001, 1.0)));
    const auto b = mono(randn(rng, 8192, rng.uniform(0.001, 1.0)));
    const auto c = mono(randn(rng, 8192, rng.uniform(0.001, 1.0)));
    CHECK(mel_l2(a, c) <= mel_l2(a, b) + mel_l2(b, c) + 1e-12);
    CHECK(mel_l2(a, b) >= 0.0);
  }
}
