// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "spatialsep/scene/geometry.hpp"
#include "spatialsep/scene/render.hpp"
#include "spatialsep/scene/rir.hpp"
#include "spatialsep/scene/scene_io.hpp"
#include "spatialsep/scene/synthetic.hpp"
#include "spatialsep/scene/trajectory.hpp"

using namespace spatialsep;
using namespace spatialsep::scene;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> white(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = 0.1 * rng.normal();
  return x;
}

Room anechoic(Vec3 dims = {10, 10, 10}) {
  Room r;
  r.dims = dims;
  r.absorption.fill(1.0);
  r.max_image_order = 0;
  return r;
}

ArrayGeometry single_mic() {
  ArrayGeometry g;
  g.mic_positions = {Vec3::Zero()};
  return g;
}

double rms_window(std::span<const double> x, std::size_t a, std::size_t b) {
  return rms(x.subspan(a, b - a));
}

}  // namespace

// ---- trajectories ---------------------------------------------------------

TEST_CASE("trajectory at 240 Hz for 3 s has 720 samples") {
  const Box box{{1, 1, 1}, {3, 3, 2}};
  const auto t = sample_trajectory(11, box, 3.0, 1.0);
  CHECK(t.size() == 720);
  CHECK(t.rate == 240.0);
  CHECK_THAT(t.duration(), WithinAbs(3.0, 1e-12));
}

TEST_CASE("zero max_speed gives a constant trajectory") {
  const auto t = sample_trajectory(5, {{1, 1, 1}, {3, 3, 2}}, 2.0, 0.0);
  for (const auto& p : t.positions) CHECK(p == t.positions.front());
}

TEST_CASE("trajectory steps respect max_speed and bounds for many seeds") {
  const Box box{{0.5, 0.5, 1.0}, {4.5, 3.5, 2.0}};
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const double vmax = 0.2 + 0.05 * double(seed);
    const auto t = sample_trajectory(seed, box, 4.0, vmax);
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(box.contains(t.positions[i]));
      if (i > 0) CHECK((t.positions[i] - t.positions[i - 1]).norm() <= vmax / 240.0 + 1e-12);
    }
  }
}

TEST_CASE("trajectory sampling is deterministic and rejects degenerate bounds") {
  const Box box{{1, 1, 1}, {3, 3, 2}};
  CHECK(sample_trajectory(3, box, 1.0, 1.0).positions == sample_trajectory(3, box, 1.0, 1.0).positions);
  CHECK(sample_trajectory(3, box, 1.0, 1.0).positions != sample_trajectory(4, box, 1.0, 1.0).positions);
  CHECK_THROWS_AS(sample_trajectory(1, {{2, 1, 1}, {1, 3, 2}}, 1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(sample_trajectory(1, box, 0.0, 1.0), ConfigError);
}

TEST_CASE("trajectory slice and interpolation") {
  const auto t = static_trajectory({1, 2, 3}, 1.0);
  CHECK(t.size() == 240);
  Trajectory lin;
  for (int i = 0; i < 10; ++i) lin.positions.push_back(Vec3(double(i), 0, 0));
  CHECK_THAT(lin.position_at(1.5 / 240.0).x(), WithinAbs(1.5, 1e-12));
  CHECK(lin.position_at(-1.0).x() == 0.0);
  CHECK(lin.position_at(10.0).x() == 9.0);
  const auto s = lin.slice(2.0 / 240.0, 5.0 / 240.0);
  REQUIRE(s.size() == 3);
  CHECK(s.positions.front().x() == 2.0);
}

// ---- image source RIR ----------------------------------------------------------

TEST_CASE("direct path: 3.43 m gives one impulse at 480 samples of 1/3.43") {
  Room room = anechoic();
  room.absorption.fill(0.7);
  const Vec3 mic(2, 5, 5), src(5.43, 5, 5);
  const auto h = image_source_rir(room, src, mic, 0);
  std::size_t nonzero = 0;
  for (std::size_t n = 0; n < h.size(); ++n)
    if (h[n] != 0.0) ++nonzero;
  CHECK(nonzero == 1);
  CHECK_THAT(h[480], WithinRel(1.0 / 3.43, 1e-12));
}

TEST_CASE("inverse distance law between two microphones") {
  const Room room = anechoic();
  const Vec3 src(5, 5, 5);
  const auto a = image_arrivals(room, src, {6.5, 5, 5}, 0);
  const auto b = image_arrivals(room, src, {8, 5, 5}, 0);
  REQUIRE(a.size() == 1);
  REQUIRE(b.size() == 1);
  CHECK_THAT(a[0].gain / b[0].gain, WithinRel(2.0, 1e-12));
  CHECK(std::abs(20.0 * std::log10(a[0].gain / b[0].gain) - 6.0206) <= 0.5);
}

TEST_CASE("first-order images in a rigid cube") {
  Room room;
  room.dims = {4, 4, 4};
  room.absorption.fill(0.0);
  const Vec3 s(1.0, 1.5, 2.5), m(3.0, 2.0, 1.0);
  const auto arr = image_arrivals(room, s, m, 1);
  REQUIRE(arr.size() == 7);
  // hand-mirrored images: direct, then x=0, x=L, y=0, y=L, z=0, z=L
  const std::vector<Vec3> images = {s,
                                    {-s.x(), s.y(), s.z()}, {8 - s.x(), s.y(), s.z()},
                                    {s.x(), -s.y(), s.z()}, {s.x(), 8 - s.y(), s.z()},
                                    {s.x(), s.y(), -s.z()}, {s.x(), s.y(), 8 - s.z()}};
  std::vector<double> expect, got;
  for (const auto& im : images) expect.push_back((im - m).norm() / 343.0 * 48000.0);
  for (const auto& a : arr) {
    got.push_back(a.delay);
    CHECK_THAT(a.gain * std::max((a.delay * 343.0 / 48000.0), kMinDistance), WithinRel(1.0, 1e-12));
  }
  std::sort(expect.begin(), expect.end());
  std::sort(got.begin(), got.end());
  for (std::size_t i = 0; i < 7; ++i) CHECK(std::abs(got[i] - expect[i]) <= 1.0);

  // and the rendered RIR peaks at each arrival
  const auto h = image_source_rir(room, s, m, 1);
  for (double d : expect) {
    const auto n = std::size_t(std::llround(d));
    double peak = 0.0;
    std::size_t at = 0;
    for (std::size_t k = n - 2; k <= n + 2; ++k)
      if (std::abs(h[k]) > peak) peak = std::abs(h[k]), at = k;
    CHECK(std::abs(double(at) - d) <= 1.0);
  }
}

TEST_CASE("image count grows with order and absorption scales reflections") {
  Room room;
  room.absorption.fill(0.0);
  const Vec3 s(1, 1, 1), m(4, 3, 2);
  CHECK(image_arrivals(room, s, m, 0).size() == 1);
  CHECK(image_arrivals(room, s, m, 2).size() == 25);
  room.absorption.fill(0.75);  // beta = 0.5
  for (const auto& a : image_arrivals(room, s, m, 2)) {
    const double d = a.delay * room.speed_of_sound / room.sample_rate;
    CHECK_THAT(a.gain, WithinRel(std::pow(0.5, a.order) / d, 1e-12));
  }
}

TEST_CASE("RIR rejects positions outside the room and floors the distance") {
  const Room room;
  CHECK_THROWS_AS(image_source_rir(room, {7, 1, 1}, {1, 1, 1}, 1), DataError);
  CHECK_THROWS_AS(image_source_rir(room, {1, 1, 1}, {1, -1, 1}, 1), DataError);
  const auto a = image_arrivals(anechoic(), {1, 1, 1}, {1.01, 1, 1}, 0);
  CHECK_THAT(a[0].gain, WithinRel(10.0, 1e-12));
}

// ---- rendering -------------------------------------------------------------------

TEST_CASE("static trajectory rendering equals static convolution") {
  SceneSpec s;
  s.room = Room{};
  s.array_pose.position = {3, 2.5, 1.5};
  SourceSpec src;
  src.audio = white(1, 24000);
  src.trajectory = static_trajectory({4.2, 1.7, 1.3}, 0.5);
  s.sources.push_back(src);
  const auto out = render_moving_source(s, 0);
  REQUIRE(out.channels() == 8);
  REQUIRE(out.frames() == 24000);
  const auto mics = s.mic_world_positions();
  for (std::size_t c = 0; c < mics.size(); ++c) {
    const auto h = image_source_rir(s.room, src.trajectory.positions[0], mics[c], s.room.max_image_order);
    std::vector<double> ref(src.audio.size(), 0.0);
    for (std::size_t n = 0; n < ref.size(); ++n)
      for (std::size_t k = 0; k < h.size() && k <= n; ++k) ref[n] += h[k] * src.audio[n - k];
    double err = 0.0, peak = 0.0;
    for (std::size_t n = 0; n < ref.size(); ++n) {
      err = std::max(err, std::abs(out.samples(Eigen::Index(c), Eigen::Index(n)) - ref[n]));
      peak = std::max(peak, std::abs(ref[n]));
    }
    CHECK(err <= 1e-6 * peak);
  }
}

TEST_CASE("zero input renders to zero output") {
  SceneSpec s;
  s.array_pose.position = {3, 2.5, 1.5};
  s.sources.push_back({"z", sample_trajectory(2, {{1, 1, 1}, {2, 2, 2}}, 1.0, 1.0),
                       std::vector<double>(48000, 0.0)});
  CHECK(render_moving_source(s, 0).samples.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("radial motion from 1 m to 2 m drops the level by 6 dB") {
  SceneSpec s;
  s.room = anechoic();
  s.geometry = single_mic();
  s.array_pose.position = {2, 5, 5};
  const double fs = 48000.0;
  const double T = 2.0;
  Trajectory traj;
  for (std::size_t i = 0; i < std::size_t(T * 240); ++i) {
    const double t = double(i) / 240.0;
    const double u = std::clamp((t - 0.5) / 1.0, 0.0, 1.0);  // hold, move over 1 s, hold
    traj.positions.push_back(s.array_pose.position + Vec3(1.0 + u, 0, 0));
  }
  s.sources.push_back({"r", traj, white(7, std::size_t(T * fs))});
  const auto out = render_moving_source(s, 0);
  const auto y = out.channel(0);
  const double near = rms_window(y, std::size_t(0.1 * fs), std::size_t(0.4 * fs));
  const double far = rms_window(y, std::size_t(1.6 * fs), std::size_t(1.9 * fs));
  const auto& x = s.sources[0].audio;
  const double near_in = rms(std::span<const double>(x).subspan(std::size_t(0.1 * fs) - 140, std::size_t(0.3 * fs)));
  const double far_in = rms(std::span<const double>(x).subspan(std::size_t(1.6 * fs) - 280, std::size_t(0.3 * fs)));
  const double drop = gain_to_db(near / near_in) - gain_to_db(far / far_in);
  CHECK_THAT(drop, WithinAbs(6.0206, 0.5));
}

TEST_CASE("rendering is linear and sources superpose") {
  SceneSpec s;
  s.array_pose.position = {3, 2.5, 1.5};
  s.sources.push_back({"a", sample_trajectory(1, {{1, 1, 1}, {2, 2, 2}}, 0.5, 1.0), white(2, 24000)});
  s.sources.push_back({"b", sample_trajectory(2, {{4, 3, 1}, {5, 4, 2}}, 0.5, 1.0), white(3, 24000)});
  const auto a = render_moving_source(s, 0);
  SceneSpec scaled = s;
  for (auto& v : scaled.sources[0].audio) v *= -2.5;
  const auto a2 = render_moving_source(scaled, 0);
  CHECK((a2.samples + 2.5 * a.samples).cwiseAbs().maxCoeff() <= 1e-9 * a.samples.cwiseAbs().maxCoeff());

  const auto r = render_scene(s);
  REQUIRE(r.images.size() == 2);
  CHECK(r.mixture.samples == r.images[0].samples + r.images[1].samples);
}

TEST_CASE("direct-path delay difference across a mic pair") {
  SceneSpec s;
  s.room = anechoic({8, 8, 4});
  s.array_pose.position = {4, 4, 2};
  std::vector<double> impulse(4800, 0.0);
  impulse[0] = 1.0;
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec3 p(rng.uniform(1, 7), rng.uniform(1, 7), rng.uniform(0.5, 3.5));
    s.sources = {{"p", static_trajectory(p, 0.1), impulse}};
    const auto out = render_moving_source(s, 0);
    const auto mics = s.mic_world_positions();
    auto peak_at = [&](std::size_t c) {
      Eigen::Index idx;
      out.samples.row(Eigen::Index(c)).cwiseAbs().maxCoeff(&idx);
      return double(idx);
    };
    for (std::size_t c = 1; c < mics.size(); ++c) {
      const double expect = ((p - mics[0]).norm() - (p - mics[c]).norm()) / 343.0 * 48000.0;
      CHECK(std::abs((peak_at(0) - peak_at(c)) - expect) <= 1.0);
    }
  }
}

TEST_CASE("render argument checks") {
  SceneSpec s;
  s.array_pose.position = {3, 2.5, 1.5};
  s.sources.push_back({"short", static_trajectory({1, 1, 1}, 0.5), white(1, 48000)});
  CHECK_THROWS_AS(render_moving_source(s, 0), DataError);
  CHECK_THROWS_AS(render_moving_source(s, 1), ConfigError);
  s.sources[0].trajectory = static_trajectory({7, 1, 1}, 2.0);
  CHECK_THROWS_AS(render_moving_source(s, 0), ConfigError);
}

// ---- geometry and regions ------------------------------------------------------

TEST_CASE("default geometry and presets") {
  const auto g = default_geometry();
  REQUIRE(g.size() == 8);
  CHECK(g.mic_positions[0].x() > 0.08);  // front pair first
  CHECK(g.mic_positions[2].x() < -0.08);
  CHECK_THAT((g.mic_positions[0] - g.mic_positions[1]).norm(), WithinAbs(0.015, 1e-12));
  for (const auto& p : g.mic_positions) CHECK_THAT(p.norm(), WithinAbs(std::hypot(0.09, 0.0075), 1e-12));
  CHECK(mic_preset(2) == std::vector<std::size_t>{0, 1});
  CHECK(mic_preset(4) == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(mic_preset(8).size() == 8);
  CHECK_THROWS_AS(mic_preset(9), ConfigError);
  CHECK_THROWS_AS(mic_preset(0), ConfigError);
}

TEST_CASE("left/right labels") {
  const auto g = default_geometry();
  const ArrayPose pose;
  const RegionSplit lr;
  const Vec3 right = g.lateral_axis;  // +1 m lateral
  std::vector<Vec3> all_right(50, right), crossing;
  CHECK(classify_positions(all_right, pose, g, lr) == Region::kTarget);
  std::vector<Vec3> all_left(50, -right);
  CHECK(classify_positions(all_left, pose, g, lr) == Region::kInterference);
  for (int i = 0; i <= 20; ++i) crossing.push_back(right * (-0.1 + 0.01 * i) + Vec3(1, 0, 0));
  CHECK(classify_positions(crossing, pose, g, lr) == Region::kAmbiguous);
  CHECK(classify_point(Vec3(1, 0, 0), pose, g, lr) == Region::kAmbiguous);
}

TEST_CASE("near/far labels around 0.7 m") {
  const auto g = default_geometry();
  const ArrayPose pose;
  RegionSplit nf{SplitKind::kNearFar, 0.7};
  std::vector<Vec3> near(30, Vec3(0, 0.69, 0)), far(30, Vec3(0.71, 0, 0));
  CHECK(classify_positions(near, pose, g, nf) == Region::kInterference);
  CHECK(classify_positions(far, pose, g, nf) == Region::kTarget);
  nf.near_far_boundary = 0.0;
  CHECK_THROWS_AS(nf.validate(), ConfigError);
}

TEST_CASE("region labels are invariant to a rigid rotation of world and array") {
  const auto g = default_geometry();
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    ArrayPose pose;
    pose.position = Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-1, 1));
    pose.rotation = rotation_from_euler_deg(rng.uniform(-180, 180), rng.uniform(-30, 30), rng.uniform(-30, 30));
    const Vec3 p(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-1, 1));
    const Eigen::Matrix3d R = rotation_from_euler_deg(rng.uniform(-180, 180), rng.uniform(-90, 90), 0.0);
    ArrayPose moved;
    moved.position = R * pose.position;
    moved.rotation = R * pose.rotation;
    for (auto kind : {SplitKind::kLeftRight, SplitKind::kNearFar}) {
      const RegionSplit split{kind, 0.7};
      CHECK(classify_point(p, pose, g, split) == classify_point(R * p, moved, g, split));
    }
  }
}

TEST_CASE("synthetic region scenes keep sources in their regions") {
  for (auto kind : {SplitKind::kLeftRight, SplitKind::kNearFar}) {
    SyntheticSceneOptions opt;
    opt.split.kind = kind;
    opt.n_targets = 2;
    opt.n_interferers = 2;
    opt.duration = 1.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto sc = make_region_scene(seed, opt);
      REQUIRE(sc.spec.sources.size() == 4);
      CHECK_NOTHROW(sc.spec.validate());
      for (std::size_t k = 0; k < 4; ++k) {
        CHECK(sc.regions[k] == (k < 2 ? Region::kTarget : Region::kInterference));
        CHECK(classify_positions(sc.spec.sources[k].trajectory.positions, sc.spec.array_pose,
                                 sc.spec.geometry, opt.split) == sc.regions[k]);
        CHECK(sc.spec.sources[k].audio.size() == 48000);
      }
    }
  }
}

// ---- scene files -----------------------------------------------------------------

TEST_CASE("scene file parsing") {
  const auto dir = std::filesystem::temp_directory_path() / "spatialsep_scene_test";
  std::filesystem::create_directories(dir);
  MultichannelAudio mono(1, 48000);
  mono.samples.row(0).setConstant(0.01);
  wav::write(dir / "src.wav", mono);
  const nlohmann::json j = {
      {"schema_version", 1},
      {"duration", 1.0},
      {"room", {{"dims", {5, 4, 3}}, {"absorption", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}}, {"max_image_order", 1}}},
      {"array", {{"position", {2.5, 2, 1.5}}, {"yaw_deg", 90}}},
      {"sources",
       {{{"id", "a"}, {"audio", "src.wav"}, {"trajectory", {{"static", {1, 1, 1}}}}},
        {{"id", "b"},
         {"audio", {{"synthetic_seed", 4}}},
         {"trajectory", {{"random", {{"seed", 2}, {"bounds", {{1, 1, 1}, {2, 2, 2}}}, {"max_speed", 0.5}}}}}}}}};
  std::ofstream(dir / "scene.json") << j.dump();
  const auto s = load_scene(dir / "scene.json");
  CHECK(s.room.dims == Vec3(5, 4, 3));
  CHECK(s.room.absorption[5] == 0.6);
  CHECK(s.room.max_image_order == 1);
  REQUIRE(s.sources.size() == 2);
  CHECK(s.sources[0].audio.size() == 48000);
  CHECK(s.sources[1].audio.size() == 48000);
  CHECK(s.sources[1].trajectory.size() == 240);
  CHECK((s.array_pose.rotation * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-12);

  auto bad = j;
  bad["schema_version"] = 2;
  CHECK_THROWS_AS(scene_from_json(bad, dir), ConfigError);
  bad = j;
  bad.erase("array");
  CHECK_THROWS_AS(scene_from_json(bad, dir), ConfigError);
  std::ofstream(dir / "broken.json") << "{not json";
  CHECK_THROWS_AS(load_scene(dir / "broken.json"), ConfigError);

  const auto side = parse_trajectory_sidecar(trajectory_sidecar(s, 1));
  CHECK(side.trajectory.positions == s.sources[1].trajectory.positions);
  CHECK(side.pose.rotation == s.array_pose.rotation);
  CHECK(side.geometry.mic_positions == s.geometry.mic_positions);
  std::filesystem::remove_all(dir);
}
