// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// spatialsep command line tool.
//
//   simulate   render a scene file (or a random region scene) to WAVs
//   segment    cut simulate output into labelled 3 s segments + manifest
//   mix        build mixtures from manifests
//   beamform   oracle MVDR on one mixture
//   enhance    run a weight file on a WAV, offline or streaming
//   eval       evaluate a method over manifests
//   analyze    tables and spatial grids from eval records
//   init-weights, parity   weight-file utilities
//
// Exit codes: 0 ok, 2 configuration error, 3 data error, 1 anything else.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "spatialsep/beamform/mvdr.hpp"
#include "spatialsep/dataset/builder.hpp"
#include "spatialsep/demucs/parity.hpp"
#include "spatialsep/demucs/stream.hpp"
#include "spatialsep/eval/analysis.hpp"
#include "spatialsep/eval/experiment.hpp"
#include "spatialsep/scene/scene_io.hpp"
#include "spatialsep/scene/synthetic.hpp"

namespace fs = std::filesystem;
using namespace spatialsep;
using nlohmann::json;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string config;
  std::size_t jobs = 1;
  json config_json = json::object();
};

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open config " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + p.string() + " is not valid JSON: " + e.what());
  }
}

void write_json_file(const fs::path& p, const json& j) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw DataError("cannot write " + p.string());
  os << j.dump(2) << '\n';
}

void write_run_json(const fs::path& dir, const std::string& command, const Globals& g, const json& config) {
  write_json_file(dir / "run.json", {{"command", command},
                                     {"version", kVersion},
                                     {"seed", g.seed},
                                     {"config_file", g.config},
                                     {"config", config}});
}

fs::path dir_of(const fs::path& file) { return file.has_parent_path() ? file.parent_path() : fs::path("."); }

scene::SplitKind parse_split(const std::string& s) { return scene::split_kind_from_string(s); }

// ---- simulate ---------------------------------------------------------------------

struct SimulateArgs {
  std::string scene, out, split = "left_right";
  std::size_t targets = 1, interferers = 1;
  double duration = 6.0;
  bool static_sources = false;
};

void simulate(const SimulateArgs& a, const Globals& g) {
  scene::SceneSpec spec;
  json cfg;
  std::vector<std::string> regions;
  if (!a.scene.empty() || !g.config.empty()) {
    const fs::path path = a.scene.empty() ? fs::path(g.config) : fs::path(a.scene);
    spec = scene::load_scene(path);
    cfg = {{"scene_file", path.string()}};
  } else {
    scene::SyntheticSceneOptions opt;
    opt.split.kind = parse_split(a.split);
    opt.duration = a.duration;
    opt.n_targets = a.targets;
    opt.n_interferers = a.interferers;
    opt.moving = !a.static_sources;
    const auto sc = scene::make_region_scene(g.seed, opt);
    spec = sc.spec;
    for (auto r : sc.regions) regions.push_back(scene::to_string(r));
    cfg = {{"random_scene",
            {{"split", a.split}, {"duration", a.duration}, {"targets", a.targets},
             {"interferers", a.interferers}, {"moving", opt.moving}}}};
  }
  const fs::path out(a.out);
  fs::create_directories(out / "sources");
  fs::create_directories(out / "trajectories");
  const auto r = scene::render_scene(spec);
  for (std::size_t i = 0; i < spec.sources.size(); ++i) {
    const auto& id = spec.sources[i].id;
    wav::write(out / "sources" / (id + ".wav"), r.images[i]);
    auto side = scene::trajectory_sidecar(spec, i);
    if (!regions.empty()) side["intended_region"] = regions[i];
    write_json_file(out / "trajectories" / (id + ".json"), side);
  }
  wav::write(out / "mixture.wav", r.mixture);
  write_run_json(out, "simulate", g, cfg);
  std::printf("rendered %zu source(s), %.2f s, %ld channels to %s\n", spec.sources.size(),
              r.mixture.duration(), long(r.mixture.channels()), out.string().c_str());
}

// ---- segment ----------------------------------------------------------------------

struct SegmentArgs {
  std::vector<std::string> inputs;
  std::string out, split = "left_right";
  double boundary = 0.7;
};

void segment(const SegmentArgs& a, const Globals& g) {
  scene::RegionSplit split;
  split.kind = parse_split(a.split);
  split.near_far_boundary = a.boundary;
  split.validate();
  const fs::path out(a.out);
  std::vector<dataset::SegmentRecord> all;
  for (const auto& in_str : a.inputs) {
    const fs::path in(in_str);
    const fs::path tdir = in / "trajectories";
    if (!fs::is_directory(tdir)) throw DataError("no trajectories/ directory in " + in.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(tdir))
      if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::ifstream is(f);
      json j;
      try {
        j = json::parse(is);
      } catch (const json::parse_error& e) {
        throw DataError("malformed trajectory file " + f.string() + ": " + e.what());
      }
      const auto side = scene::parse_trajectory_sidecar(j);
      const auto audio = wav::read(in / "sources" / (f.stem().string() + ".wav"));
      const std::string prefix = in.filename().string() + "_" + side.source_id;
      auto segs = dataset::segment_and_label(audio, side.trajectory, side.pose, side.geometry, split, prefix);
      for (auto& s : segs) s.record.audio_path = "audio/" + s.record.audio_path;
      const auto recs = dataset::write_segments(segs, out);
      all.insert(all.end(), recs.begin(), recs.end());
    }
  }
  dataset::write_manifest(out / "manifest.jsonl", all);
  std::size_t nt = 0, ni = 0;
  for (const auto& r : all) (r.region == scene::Region::kTarget ? nt : ni) += 1;
  write_run_json(out, "segment", g, {{"inputs", a.inputs}, {"split", a.split}, {"near_far_boundary", a.boundary}});
  std::printf("%zu segment(s): %zu target, %zu interference -> %s\n", all.size(), nt, ni,
              (out / "manifest.jsonl").string().c_str());
}

// ---- experiment config shared by mix and eval ------------------------------------------

struct ExperimentArgs {
  std::vector<std::string> manifests;
  std::optional<std::string> split, method, weights, weights_1ch;
  std::optional<std::size_t> mics, targets, interferers, count;
  bool block_adaptive = false;
};

eval::ExperimentConfig experiment_config(const ExperimentArgs& a, const Globals& g) {
  eval::ExperimentConfig c;
  c.seed = g.seed;
  if (!g.config.empty()) c = eval::experiment_from_json(g.config_json, c);
  if (!a.manifests.empty()) c.manifests.assign(a.manifests.begin(), a.manifests.end());
  if (a.split) c.split.kind = parse_split(*a.split);
  if (a.method) c.method = eval::method_from_string(*a.method);
  if (a.weights) c.spatial_weights = *a.weights;
  if (a.weights_1ch) c.single_channel_weights = *a.weights_1ch;
  if (a.mics) c.mic_subset = scene::mic_preset(*a.mics);
  if (a.targets) c.n_targets = *a.targets;
  if (a.interferers) c.n_interferers = *a.interferers;
  if (a.count) c.n_mixtures = *a.count;
  if (a.block_adaptive) c.beamformer.block_adaptive = true;
  if (c.manifests.empty()) throw ConfigError("no manifests given");
  c.validate();
  return c;
}

void add_experiment_options(CLI::App* app, ExperimentArgs& a) {
  app->add_option("--manifest", a.manifests, "Segment manifest(s)");
  app->add_option("--split", a.split, "left_right or near_far");
  app->add_option("--method", a.method, "passthrough, mvdr_oracle, mvdr_oracle_plus_1ch_model, spatial_model");
  app->add_option("--weights", a.weights, "Spatial model weight file");
  app->add_option("--weights-1ch", a.weights_1ch, "Single-channel post-filter weight file");
  app->add_option("--mics", a.mics, "Mic preset: 2, 4 or 8");
  app->add_option("--targets", a.targets, "Target sources per mixture");
  app->add_option("--interferers", a.interferers, "Interference sources per mixture");
  app->add_option("--count", a.count, "Number of mixtures");
  app->add_flag("--block-adaptive", a.block_adaptive, "Block-adaptive MVDR covariances");
}

// ---- mix ---------------------------------------------------------------------------

void mix(const ExperimentArgs& a, const std::string& out_str, const Globals& g) {
  const auto cfg = experiment_config(a, g);
  const auto pool = eval::load_pool(cfg);
  const fs::path out(out_str);
  std::vector<json> rows(cfg.n_mixtures);
  eval::parallel_for(cfg.n_mixtures, g.jobs, [&](std::size_t k) {
    const auto in = eval::build_mixture_input(pool, cfg, k);
    const fs::path d = out / in.id;
    fs::create_directories(d);
    wav::write(d / "mixture.wav", in.mixture.mixture);
    wav::write(d / "target.wav", in.mixture.target_reference);
    wav::write(d / "interference.wav", in.mixture.interference);
    rows[k] = {{"id", in.id}, {"gains_db", in.mixture.gains_db}, {"normalization", in.mixture.normalization},
               {"n_targets", in.n_targets}, {"n_interferers", in.n_interferers}};
  });
  std::ofstream os(out / "mixtures.jsonl");
  for (const auto& r : rows) os << r.dump() << '\n';
  write_run_json(out, "mix", g, eval::to_json(cfg));
  std::printf("%zu mixture(s) -> %s\n", rows.size(), out.string().c_str());
}

// ---- beamform ----------------------------------------------------------------------

struct BeamformArgs {
  std::string mixture, target, interference, out;
  std::optional<std::size_t> mics;
  bool block_adaptive = false;
};

void beamform_cmd(const BeamformArgs& a, const Globals& g) {
  auto y = wav::read(a.mixture), s = wav::read(a.target), n = wav::read(a.interference);
  if (a.mics) {
    const auto idx = scene::mic_preset(*a.mics, std::size_t(y.channels()));
    y = eval::select_channels(y, idx);
    s = eval::select_channels(s, idx);
    n = eval::select_channels(n, idx);
  }
  if (s.channels() != y.channels() || n.channels() != y.channels())
    throw DataError("mixture and stems differ in channel count");
  beamform::OracleOptions opt;
  opt.block_adaptive = a.block_adaptive;
  const auto est = beamform::oracle_mvdr(y, s, n, opt);
  wav::write(a.out, est);
  const MultichannelAudio ref(s.samples.topRows(1), s.sample_rate), in(y.samples.topRows(1), y.sample_rate);
  const double si_in = metrics::si_sdr(in, ref), si_out = metrics::si_sdr(est, ref);
  write_run_json(dir_of(a.out), "beamform", g,
                 {{"mixture", a.mixture}, {"target", a.target}, {"interference", a.interference},
                  {"channels", y.channels()}, {"block_adaptive", a.block_adaptive},
                  {"si_sdr_in", si_in}, {"si_sdr_out", si_out}});
  std::printf("si_sdr in %.2f dB, out %.2f dB -> %s\n", si_in, si_out, a.out.c_str());
}

// ---- enhance -----------------------------------------------------------------------

struct EnhanceArgs {
  std::string weights, in, out, norm;
  bool stream = false;
  long chunk = 1024;
};

void enhance(const EnhanceArgs& a, const Globals& g) {
  if (!fs::exists(a.weights)) throw DataError("weights file not found: " + a.weights);
  const auto model = std::make_shared<const demucs::Model>(demucs::load_weights(a.weights));
  const auto x = wav::read(a.in);
  if (x.channels() != model->config().channels)
    throw ConfigError("weights expect " + std::to_string(model->config().channels) + " channels, " + a.in +
                      " has " + std::to_string(x.channels()));
  // offline defaults to global normalization, streaming to running
  demucs::Normalization norm = demucs::Normalization::kNone;
  if (model->config().normalize_input)
    norm = a.stream ? demucs::Normalization::kRunning : demucs::Normalization::kGlobal;
  if (!a.norm.empty()) norm = demucs::normalization_from_string(a.norm);
  const auto t0 = std::chrono::steady_clock::now();
  const auto y = a.stream ? demucs::stream_forward(x, model, a.chunk, norm) : demucs::forward(x, *model, norm);
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  wav::write(a.out, y);
  write_run_json(dir_of(a.out), "enhance", g,
                 {{"weights", a.weights}, {"in", a.in}, {"stream", a.stream}, {"chunk", a.chunk},
                  {"normalization", demucs::to_string(norm)}, {"model", demucs::to_json(model->config())},
                  {"latency_samples", demucs::algorithmic_latency(model->config())}});
  std::printf("%.2f s of audio in %.3f s (latency %.1f ms) -> %s\n", x.duration(), dt,
              demucs::algorithmic_latency_ms(model->config()), a.out.c_str());
}

// ---- eval / analyze -----------------------------------------------------------------

void write_tables(const fs::path& out, const std::vector<eval::EvalRecord>& records) {
  const auto rows = eval::summary_table(records);
  std::ofstream csv(out / "table.csv");
  eval::write_table_csv(csv, rows);
  std::ofstream txt(out / "table.txt");
  eval::write_table_text(txt, rows);
  eval::write_table_text(std::cout, rows);
}

void eval_cmd(const ExperimentArgs& a, const std::string& out_str, const Globals& g) {
  const auto cfg = experiment_config(a, g);
  const fs::path out(out_str);
  const auto res = eval::evaluate_system(cfg, g.jobs);
  fs::create_directories(out);
  eval::write_records(out / "records.jsonl", res.records);
  write_json_file(out / "aggregate.json", eval::to_json(res.aggregate));
  write_tables(out, res.records);
  write_run_json(out, "eval", g, eval::to_json(cfg));
}

struct AnalyzeArgs {
  std::vector<std::string> records;
  std::string out;
  double angle_bin = 20.0, distance_bin = 0.5;
};

void analyze(const AnalyzeArgs& a, const Globals& g) {
  std::vector<eval::EvalRecord> all;
  for (const auto& r : a.records) {
    auto v = eval::read_records(r);
    all.insert(all.end(), v.begin(), v.end());
  }
  if (all.empty()) throw DataError("no records to analyze");
  const fs::path out(a.out);
  fs::create_directories(out);
  write_tables(out, all);
  const auto grid = eval::spatial_analysis(all, a.angle_bin, a.distance_bin);
  std::ofstream csv(out / "spatial_grid.csv");
  eval::write_grid_csv(csv, grid);
  write_run_json(out, "analyze", g,
                 {{"records", a.records}, {"angle_bin_deg", a.angle_bin}, {"distance_bin_m", a.distance_bin}});
}

// ---- weight utilities -----------------------------------------------------------------

struct InitArgs {
  std::string out;
  demucs::DemucsConfig cfg;
};

void init_weights(const InitArgs& a, const Globals& g) {
  a.cfg.validate();
  demucs::save_weights(demucs::init_weights(a.cfg, g.seed), a.out);
  write_run_json(dir_of(a.out), "init-weights", g, demucs::to_json(a.cfg));
  std::printf("wrote %s (latency %ld samples)\n", a.out.c_str(), long(demucs::algorithmic_latency(a.cfg)));
}

struct ParityArgs {
  std::string fixture, weights;
};

int parity(const ParityArgs& a) {
  const auto f = demucs::load_parity_fixture(a.fixture);
  const demucs::Model model(demucs::load_weights(a.weights));
  const auto r = demucs::check_parity(f, model);
  std::printf("%s max abs error %.3e (tolerance %.1e)\n", r.pass ? "PASS" : "FAIL", r.max_abs_error, f.tolerance);
  return r.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatialsep: spatial source separation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--config", g.config, "JSON config file");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Render a scene to multichannel WAVs");
  c_sim->add_option("--scene", sim.scene, "Scene file (default: --config, else a random region scene)");
  c_sim->add_option("--out", sim.out, "Output directory")->required();
  c_sim->add_option("--split", sim.split, "Random scene split");
  c_sim->add_option("--targets", sim.targets, "Random scene target count");
  c_sim->add_option("--interferers", sim.interferers, "Random scene interferer count");
  c_sim->add_option("--duration", sim.duration, "Random scene duration in seconds");
  c_sim->add_flag("--static", sim.static_sources, "Random scene with static sources");

  SegmentArgs seg;
  auto* c_seg = app.add_subcommand("segment", "Segment simulate output into labelled clips");
  c_seg->add_option("--in", seg.inputs, "simulate output directory (repeatable)")->required();
  c_seg->add_option("--out", seg.out, "Output directory")->required();
  c_seg->add_option("--split", seg.split, "left_right or near_far");
  c_seg->add_option("--boundary", seg.boundary, "Near/far boundary in metres");

  ExperimentArgs mix_args;
  std::string mix_out;
  auto* c_mix = app.add_subcommand("mix", "Build mixtures from manifests");
  add_experiment_options(c_mix, mix_args);
  c_mix->add_option("--out", mix_out, "Output directory")->required();

  BeamformArgs bf;
  auto* c_bf = app.add_subcommand("beamform", "Oracle-mask MVDR on one mixture");
  c_bf->add_option("--mixture", bf.mixture)->required();
  c_bf->add_option("--target", bf.target)->required();
  c_bf->add_option("--interference", bf.interference)->required();
  c_bf->add_option("--out", bf.out, "Output WAV")->required();
  c_bf->add_option("--mics", bf.mics, "Mic preset: 2, 4 or 8");
  c_bf->add_flag("--block-adaptive", bf.block_adaptive);

  EnhanceArgs en;
  auto* c_en = app.add_subcommand("enhance", "Run a separation model on a WAV");
  c_en->add_option("--weights", en.weights, "Weight file")->required();
  c_en->add_option("--in", en.in, "Input WAV")->required();
  c_en->add_option("--out", en.out, "Output WAV")->required();
  c_en->add_flag("--stream", en.stream, "Use the streaming engine");
  c_en->add_option("--chunk", en.chunk, "Streaming chunk size in samples")->check(CLI::PositiveNumber);
  c_en->add_option("--normalization", en.norm, "none, global or running");

  ExperimentArgs ev;
  std::string ev_out;
  auto* c_ev = app.add_subcommand("eval", "Evaluate a method over manifests");
  add_experiment_options(c_ev, ev);
  c_ev->add_option("--out", ev_out, "Output directory")->required();

  AnalyzeArgs an;
  auto* c_an = app.add_subcommand("analyze", "Tables and spatial grids from eval records");
  c_an->add_option("--records", an.records, "records.jsonl (repeatable)")->required();
  c_an->add_option("--out", an.out, "Output directory")->required();
  c_an->add_option("--angle-bin", an.angle_bin, "Angle bin width in degrees");
  c_an->add_option("--distance-bin", an.distance_bin, "Distance bin width in metres");

  InitArgs ini;
  auto* c_ini = app.add_subcommand("init-weights", "Write a randomly initialised weight file");
  c_ini->add_option("--out", ini.out, "Weight file")->required();
  c_ini->add_option("--channels", ini.cfg.channels);
  c_ini->add_option("--layers", ini.cfg.layers);
  c_ini->add_option("--hidden", ini.cfg.hidden);
  c_ini->add_option("--kernel-size", ini.cfg.kernel_size);
  c_ini->add_option("--stride", ini.cfg.stride);
  c_ini->add_option("--lstm-layers", ini.cfg.lstm_layers);

  ParityArgs par;
  auto* c_par = app.add_subcommand("parity", "Check a weight file against a parity fixture");
  c_par->add_option("--fixture", par.fixture)->required();
  c_par->add_option("--weights", par.weights)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (!g.config.empty()) g.config_json = read_json_file(g.config);
    if (c_sim->parsed()) simulate(sim, g);
    else if (c_seg->parsed()) segment(seg, g);
    else if (c_mix->parsed()) mix(mix_args, mix_out, g);
    else if (c_bf->parsed()) beamform_cmd(bf, g);
    else if (c_en->parsed()) enhance(en, g);
    else if (c_ev->parsed()) eval_cmd(ev, ev_out, g);
    else if (c_an->parsed()) analyze(an, g);
    else if (c_ini->parsed()) init_weights(ini, g);
    else if (c_par->parsed()) return parity(par);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
