// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch_amalgamated.hpp>

#include <filesystem>

#include "spatialsep/demucs/model.hpp"
#include "spatialsep/demucs/parity.hpp"
#include "spatialsep/demucs/stream.hpp"

using namespace spatialsep;
using namespace spatialsep::demucs;
using Catch::Matchers::ContainsSubstring;

namespace {

const std::filesystem::path kFixtures = SPATIALSEP_FIXTURE_DIR;

DemucsConfig tiny(int channels = 2) {
  DemucsConfig c;
  c.layers = 2;
  c.hidden = 4;
  c.channels = channels;
  return c;
}

MultichannelAudio noise(std::uint64_t seed, Eigen::Index c, Eigen::Index t, double scale = 0.3) {
  Rng rng(seed);
  MultichannelAudio a(c, t);
  for (Eigen::Index i = 0; i < c; ++i)
    for (Eigen::Index n = 0; n < t; ++n) a.samples(i, n) = scale * rng.normal();
  return a;
}

std::shared_ptr<const Model> make_model(const DemucsConfig& cfg, std::uint64_t seed = 1) {
  return std::make_shared<const Model>(init_weights(cfg, seed));
}

double rel_diff(const MultichannelAudio& a, const MultichannelAudio& b) {
  return (a.samples - b.samples).cwiseAbs().maxCoeff() / std::max(1e-30, b.samples.cwiseAbs().maxCoeff());
}

// Largest look-ahead found by perturbing single input samples: for each m,
// the earliest output index that changes. Independent of the frame
// arithmetic in algorithmic_latency().
std::int64_t measured_lookahead(const Model& model, Eigen::Index T, Eigen::Index m_lo, Eigen::Index m_hi) {
  const auto x = noise(7, model.config().channels, T);
  const auto y = forward(x, model, Normalization::kNone);
  std::int64_t best = -1;
  for (Eigen::Index m = m_lo; m < m_hi; ++m) {
    auto xp = x;
    xp.samples(0, m) += 1.0;
    const auto yp = forward(xp, model, Normalization::kNone);
    Eigen::Index first = T;
    for (Eigen::Index n = 0; n < T && first == T; ++n)
      if ((yp.samples.col(n) - y.samples.col(n)).cwiseAbs().maxCoeff() > 0.0) first = n;
    REQUIRE(first < T);
    best = std::max<std::int64_t>(best, m - first);
  }
  return best;
}

}  // namespace

// ---- config and latency -------------------------------------------------------

TEST_CASE("config validation and channel schedule") {
  DemucsConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.level_channels(0) == 1);
  CHECK(c.level_channels(1) == 64);
  CHECK(c.level_channels(5) == 1024);
  CHECK(c.lstm_hidden() == 1024);
  for (auto bad : {DemucsConfig{0}, DemucsConfig{5, 64, 4, 4}, DemucsConfig{5, 64, 8, 0}, DemucsConfig{5, 0}}) {
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
  c.channels = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(config_from_json(to_json(tiny(3))) == tiny(3));
}

TEST_CASE("algorithmic latency from the frame recurrence") {
  DemucsConfig c;
  CHECK(algorithmic_latency(c) == 2388);
  CHECK(algorithmic_latency(c) <= 3552);
  CHECK(algorithmic_latency_ms(c) <= 74.0);
  c.layers = 1;
  CHECK(algorithmic_latency(c) == 8);
  for (int L = 1; L <= 6; ++L)
    for (int K : {2, 3, 8}) {
      DemucsConfig s1;
      s1.layers = L;
      s1.kernel_size = K;
      s1.stride = 1;
      CHECK(algorithmic_latency(s1) == L * (K - 1) + 1);
    }
}

TEST_CASE("valid_length covers the input and is a fixed point") {
  for (const auto& cfg : {DemucsConfig{}, tiny()})
    for (std::int64_t T : {1, 7, 100, 2388, 2389, 48000, 144000}) {
      const auto v = valid_length(cfg, T);
      CHECK(v >= T);
      CHECK(valid_length(cfg, v) == v);
    }
}

TEST_CASE("measured look-ahead matches algorithmic_latency - 1") {
  {
    const auto cfg = tiny(1);
    const auto m = make_model(cfg);
    const auto lat = algorithmic_latency(cfg);
    CHECK(measured_lookahead(*m, 600, 200, 216) == lat - 1);
  }
  {
    DemucsConfig cfg;
    cfg.layers = 3;
    cfg.hidden = 8;
    cfg.kernel_size = 6;
    cfg.stride = 2;
    const auto m = make_model(cfg, 3);
    CHECK(measured_lookahead(*m, 500, 100, 108) == algorithmic_latency(cfg) - 1);
  }
  {
    DemucsConfig cfg;
    cfg.layers = 2;
    cfg.hidden = 2;
    cfg.kernel_size = 5;
    cfg.stride = 1;
    const auto m = make_model(cfg, 4);
    CHECK(measured_lookahead(*m, 200, 50, 52) == algorithmic_latency(cfg) - 1);
  }
}

// ---- weights --------------------------------------------------------------------

TEST_CASE("tensor table order and shapes") {
  const auto specs = tensor_specs(tiny());
  REQUIRE(specs.size() == 2 * 4 + 2 * 4 + 2 * 4);
  CHECK(specs.front().name == "encoder.1.conv.weight");
  CHECK(specs.front().shape == std::vector<std::int64_t>{4, 2, 8});
  CHECK(specs[8].name == "lstm.weight_ih_l0");
  CHECK(specs[8].shape == std::vector<std::int64_t>{32, 8});
  CHECK(specs[16].name == "decoder.2.pointwise.weight");
  CHECK(specs.back().name == "decoder.1.convtr.bias");
  CHECK(specs[18].shape == std::vector<std::int64_t>{8, 4, 8});
}

TEST_CASE("weights round trip bit for bit") {
  const auto dir = std::filesystem::temp_directory_path() / "spatialsep_weights_test";
  std::filesystem::create_directories(dir);
  const auto ws = init_weights(tiny(3), 9);
  save_weights(ws, dir / "w.sdwx");
  const auto back = load_weights(dir / "w.sdwx");
  CHECK(back.config == ws.config);
  REQUIRE(back.tensors.size() == ws.tensors.size());
  for (const auto& [name, t] : ws.tensors) {
    CHECK(back.at(name).shape == t.shape);
    CHECK(std::memcmp(back.at(name).data.data(), t.data.data(), 4 * t.data.size()) == 0);
  }
  CHECK(serialize_weights(back) == serialize_weights(ws));
  std::filesystem::remove_all(dir);
}

TEST_CASE("weight file framing is little-endian SDWX v1") {
  const auto bytes = serialize_weights(init_weights(tiny(), 2));
  REQUIRE(bytes.size() > 16);
  CHECK(bytes.substr(0, 4) == "SDWX");
  CHECK(std::uint8_t(bytes[4]) == 1);
  CHECK(bytes[5] == 0);
  std::uint64_t hl = 0;
  for (int i = 0; i < 8; ++i) hl |= std::uint64_t(std::uint8_t(bytes[8 + i])) << (8 * i);
  const auto header = nlohmann::json::parse(bytes.substr(16, hl));
  CHECK(header.at("kind") == "weights");
  CHECK(header.at("format_version") == 1);
  CHECK(header.at("config").at("layers") == 2);
  const auto& table = header.at("tensors");
  std::uint64_t expect = 0;
  std::size_t numel_total = 0;
  for (const auto& e : table) {
    CHECK(e.at("dtype") == "f32");
    CHECK(e.at("byte_offset").get<std::uint64_t>() == expect);
    std::uint64_t n = 1;
    for (auto d : e.at("shape")) n *= d.get<std::uint64_t>();
    expect += 4 * n;
    numel_total += n;
  }
  CHECK(bytes.size() == 16 + hl + 4 * numel_total);
}

TEST_CASE("weight loading errors") {
  const auto good = serialize_weights(init_weights(tiny(), 2));
  auto bad = good;
  bad[0] = 'X';
  CHECK_THROWS_WITH(deserialize_weights(bad), ContainsSubstring("not a weight file"));
  bad = good;
  bad[4] = 2;
  CHECK_THROWS_WITH(deserialize_weights(bad), ContainsSubstring("unsupported version"));
  CHECK_THROWS_AS(deserialize_weights(good.substr(0, good.size() - 8)), DataError);
  CHECK_THROWS_WITH(deserialize_weights("SD"), ContainsSubstring("not a weight file"));
  CHECK_THROWS_AS(load_weights("/nonexistent/w.sdwx"), DataError);

  auto ws = init_weights(tiny(), 2);
  ws.tensors["encoder.1.conv.weight"].shape = {5, 2, 8};
  ws.tensors["encoder.1.conv.weight"].data.resize(80);
  CHECK_THROWS_WITH(ws.validate(), ContainsSubstring("encoder.1.conv.weight"));
  CHECK_THROWS_WITH(serialize_weights(ws), ContainsSubstring("encoder.1.conv.weight"));

  ws = init_weights(tiny(), 2);
  ws.tensors.erase("lstm.bias_hh_l1");
  CHECK_THROWS_WITH(ws.validate(), ContainsSubstring("lstm.bias_hh_l1"));
  ws = init_weights(tiny(), 2);
  ws.tensors["extra"] = Tensor{{1}, {0.0f}};
  CHECK_THROWS_WITH(ws.validate(), ContainsSubstring("extra"));
  ws = init_weights(tiny(), 2);
  ws.tensors["decoder.1.convtr.bias"].data[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(serialize_weights(ws), DataError);
}

TEST_CASE("init weights are deterministic and bounded") {
  const auto a = init_weights(tiny(), 5), b = init_weights(tiny(), 5), c = init_weights(tiny(), 6);
  CHECK(serialize_weights(a) == serialize_weights(b));
  CHECK(serialize_weights(a) != serialize_weights(c));
  for (const auto& v : a.at("encoder.1.conv.weight").data) CHECK(std::abs(v) <= 1.0 / std::sqrt(16.0));
}

// ---- parity fixtures ---------------------------------------------------------------

TEST_CASE("engine matches the reference implementation's parity vectors") {
  const auto model = Model(load_weights(kFixtures / "parity_tiny.sdwx"));
  const auto fx = load_parity_fixture(kFixtures / "parity_tiny.parity");
  CHECK(fx.config == model.config());
  CHECK(fx.tolerance == 1e-4);
  CHECK(fx.input.channels() == 2);
  const auto r = check_parity(fx, model);
  INFO("max abs error " << r.max_abs_error);
  CHECK(r.pass);
  CHECK(r.max_abs_error < 1e-5);
}

TEST_CASE("tampered parity fixture fails") {
  const auto model = Model(load_weights(kFixtures / "parity_tiny.sdwx"));
  const auto r = check_parity(load_parity_fixture(kFixtures / "parity_tiny_tampered.parity"), model);
  CHECK_FALSE(r.pass);
  CHECK(r.max_abs_error > 0.04);
  CHECK_THROWS_AS(load_parity_fixture(kFixtures / "parity_tiny.sdwx"), DataError);
  CHECK_THROWS_AS(load_weights(kFixtures / "parity_tiny.parity"), DataError);
}

TEST_CASE("parity fixtures round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "spatialsep_parity_test";
  std::filesystem::create_directories(dir);
  const auto m = make_model(tiny());
  ParityFixture f;
  f.config = tiny();
  f.normalization = Normalization::kNone;
  f.input = noise(3, 2, 1000);
  f.output = forward(f.input, *m, Normalization::kNone);
  save_parity_fixture(f, dir / "p.parity");
  const auto g = load_parity_fixture(dir / "p.parity");
  CHECK(g.normalization == Normalization::kNone);
  CHECK(check_parity(g, *m).pass);
  std::filesystem::remove_all(dir);
}

// ---- forward -----------------------------------------------------------------------

TEST_CASE("forward keeps shape") {
  DemucsConfig cfg;
  cfg.channels = 4;
  const auto m = make_model(cfg);
  const auto y = forward(noise(1, 4, 144000), *m);
  CHECK(y.channels() == 4);
  CHECK(y.frames() == 144000);
  CHECK(y.samples.allFinite());
  const auto t = make_model(tiny());
  for (Eigen::Index T : {1, 2, 37, 4800}) CHECK(forward(noise(2, 2, T), *t).frames() == T);
  CHECK(forward(MultichannelAudio(2, 0), *t).frames() == 0);
  CHECK_THROWS_AS(forward(noise(1, 3, 100), *t), DataError);
}

TEST_CASE("zero input with zero biases gives zero output") {
  auto ws = init_weights(tiny(), 3);
  for (auto& [name, t] : ws.tensors)
    if (name.find("bias") != std::string::npos) std::fill(t.data.begin(), t.data.end(), 0.0f);
  const Model m(ws);
  for (auto norm : {Normalization::kNone, Normalization::kGlobal, Normalization::kRunning})
    CHECK(forward(MultichannelAudio(2, 3000), m, norm).samples.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("global normalisation makes the output scale-equivariant") {
  const auto m = make_model(tiny());
  const auto x = noise(5, 2, 4000, 1.0);
  MultichannelAudio x2(x.samples * 4.0, x.sample_rate);
  const auto y = forward(x, *m, Normalization::kGlobal), y2 = forward(x2, *m, Normalization::kGlobal);
  // eps = 1e-3 in the divisor makes this approximate
  CHECK(rel_diff(MultichannelAudio(y2.samples / 4.0, 48000), y) < 2e-3);
}

TEST_CASE("causality with normalisation off") {
  const auto cfg = tiny();
  const auto m = make_model(cfg);
  const auto lat = algorithmic_latency(cfg);
  const auto x = noise(6, 2, 6000);
  const auto y = forward(x, *m, Normalization::kNone);
  for (Eigen::Index n : {500, 1234, 4000}) {
    auto xp = x;
    Rng rng{std::uint64_t(n)};
    for (Eigen::Index t = n + 1; t < xp.frames(); ++t) xp.samples.col(t) = Eigen::Vector2d(rng.normal(), rng.normal());
    const auto yp = forward(xp, *m, Normalization::kNone);
    const Eigen::Index keep = n - lat + 1;
    CHECK((yp.samples.leftCols(keep) - y.samples.leftCols(keep)).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

// ---- streaming ---------------------------------------------------------------------

TEST_CASE("streaming equals offline for all chunk sizes") {
  const auto m = make_model(tiny());
  const auto x = noise(8, 2, 9000);
  for (auto norm : {Normalization::kNone, Normalization::kRunning}) {
    const auto y = forward(x, *m, norm);
    for (Eigen::Index chunk : {1, 3, 64, 1000, 1024, 4096, 9000, 20000})
      CHECK(rel_diff(stream_forward(x, m, chunk, norm), y) <= 1e-5);
  }
}

TEST_CASE("streaming default config, 1024-sample chunks") {
  DemucsConfig cfg;
  cfg.channels = 2;
  const auto m = make_model(cfg, 11);
  const auto x = noise(9, 2, 48000);
  const auto y = forward(x, *m, Normalization::kRunning);
  CHECK(rel_diff(stream_forward(x, m, 1024, Normalization::kRunning), y) <= 1e-5);
}

TEST_CASE("stream bookkeeping and first emission") {
  const auto cfg = tiny();
  const auto m = make_model(cfg);
  const auto lat = algorithmic_latency(cfg);
  Stream s(m, Normalization::kNone);
  const auto x = noise(10, 2, 2000);
  bool first_seen = false;
  for (Eigen::Index t = 0; t < x.frames(); t += 5) {
    const auto y = s.push(MultichannelAudio(x.samples.middleCols(t, 5), x.sample_rate));
    CHECK(s.samples_emitted() <= s.samples_consumed());
    if (y.frames() > 0 && !first_seen) {
      first_seen = true;
      CHECK(s.samples_consumed() >= lat);
    }
    if (!first_seen) CHECK(s.samples_emitted() == 0);
  }
  CHECK(first_seen);
  s.flush();
  CHECK(s.flushed());
  CHECK(s.samples_emitted() == s.samples_consumed());
  CHECK_THROWS_AS(s.push(MultichannelAudio(2, 4)), std::logic_error);
  CHECK_THROWS_AS(Stream(m, Normalization::kGlobal), ConfigError);
  Stream s2(m, Normalization::kNone);
  CHECK_THROWS_AS(s2.push(MultichannelAudio(3, 4)), DataError);
}

TEST_CASE("interleaved streams are isolated") {
  const auto m = make_model(tiny());
  const auto x = noise(12, 2, 3000);
  Stream a(m), b(m);
  RowMatrixXd ya(2, 3000), yb(2, 3000);
  Eigen::Index wa = 0, wb = 0;
  for (Eigen::Index t = 0; t < 3000; t += 100) {
    const MultichannelAudio c(x.samples.middleCols(t, 100), 48000);
    const auto oa = a.push(c);
    ya.middleCols(wa, oa.frames()) = oa.samples;
    wa += oa.frames();
    const auto ob = b.push(c);
    yb.middleCols(wb, ob.frames()) = ob.samples;
    wb += ob.frames();
  }
  const auto ta = a.flush(), tb = b.flush();
  ya.middleCols(wa, ta.frames()) = ta.samples;
  yb.middleCols(wb, tb.frames()) = tb.samples;
  CHECK(wa + ta.frames() == 3000);
  CHECK(ya == yb);
}
