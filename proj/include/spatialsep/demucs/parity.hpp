// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Parity fixtures: SDWX framing with kind "parity", tensors "input" [C, T]
// and "output" [C, T], plus the tolerance and normalization mode the
// reference implementation used.

#pragma once

#include <string>

#include "spatialsep/demucs/model.hpp"
#include "spatialsep/demucs/weights.hpp"

namespace spatialsep::demucs {

struct ParityFixture {
  DemucsConfig config;
  double tolerance = 1e-4;
  Normalization normalization = Normalization::kGlobal;
  MultichannelAudio input;
  MultichannelAudio output;
};

inline const char* to_string(Normalization n) {
  switch (n) {
    case Normalization::kNone: return "none";
    case Normalization::kGlobal: return "global";
    case Normalization::kRunning: return "running";
  }
  return "?";
}

inline Normalization normalization_from_string(const std::string& s) {
  if (s == "none") return Normalization::kNone;
  if (s == "global") return Normalization::kGlobal;
  if (s == "running") return Normalization::kRunning;
  throw ConfigError("unknown normalization '" + s + "'");
}

namespace detail {

inline MultichannelAudio to_audio(const Tensor& t, double rate, const std::string& what) {
  if (t.shape.size() != 2) throw DataError(what + " must be a 2-D [C, T] tensor");
  MultichannelAudio a(t.shape[0], t.shape[1], rate);
  for (Eigen::Index c = 0; c < a.channels(); ++c)
    for (Eigen::Index i = 0; i < a.frames(); ++i) a.samples(c, i) = t.data[std::size_t(c * a.frames() + i)];
  return a;
}

inline Tensor from_audio(const MultichannelAudio& a) {
  Tensor t;
  t.shape = {a.channels(), a.frames()};
  t.data.resize(std::size_t(a.samples.size()));
  for (Eigen::Index c = 0; c < a.channels(); ++c)
    for (Eigen::Index i = 0; i < a.frames(); ++i)
      t.data[std::size_t(c * a.frames() + i)] = static_cast<float>(a.samples(c, i));
  return t;
}

}  // namespace detail

inline ParityFixture load_parity_fixture(const std::filesystem::path& path) {
  const auto d = detail::decode(detail::read_file(path), path.string());
  if (d.header.value("kind", std::string()) != "parity")
    throw DataError("not a parity fixture: " + path.string());
  ParityFixture f;
  try {
    f.config = config_from_json(d.header.at("config"));
    f.tolerance = d.header.value("tolerance", f.tolerance);
    f.normalization = normalization_from_string(d.header.value("normalization", std::string("global")));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad parity header in " + path.string() + ": " + e.what());
  }
  bool have_in = false, have_out = false;
  for (const auto& [name, t] : d.tensors) {
    if (name == "input") {
      f.input = detail::to_audio(t, f.config.sample_rate, "input");
      have_in = true;
    } else if (name == "output") {
      f.output = detail::to_audio(t, f.config.sample_rate, "output");
      have_out = true;
    }
  }
  if (!have_in || !have_out) throw DataError("parity fixture lacks input or output: " + path.string());
  if (f.input.channels() != f.output.channels() || f.input.frames() != f.output.frames())
    throw DataError("parity fixture input and output shapes differ: " + path.string());
  return f;
}

inline void save_parity_fixture(const ParityFixture& f, const std::filesystem::path& path) {
  const Tensor in = detail::from_audio(f.input), out = detail::from_audio(f.output);
  detail::write_file_atomic(
      path, detail::encode({{"kind", "parity"},
                            {"config", to_json(f.config)},
                            {"tolerance", f.tolerance},
                            {"normalization", to_string(f.normalization)}},
                           {{"input", &in}, {"output", &out}}));
}

struct ParityReport {
  double max_abs_error = 0.0;
  bool pass = false;
};

inline ParityReport check_parity(const ParityFixture& f, const Model& model) {
  if (!(model.config() == f.config)) throw DataError("parity fixture config differs from the model");
  const auto y = forward(f.input, model, f.normalization);
  ParityReport r;
  r.max_abs_error = (y.samples - f.output.samples).cwiseAbs().maxCoeff();
  r.pass = r.max_abs_error <= f.tolerance;
  return r;
}

}  // namespace spatialsep::demucs
