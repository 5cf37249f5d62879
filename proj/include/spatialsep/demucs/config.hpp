// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spatialsep/common.hpp"

namespace spatialsep::demucs {

struct DemucsConfig {
  int layers = 5;         // L
  int hidden = 64;        // H
  int kernel_size = 8;    // K
  int stride = 4;         // S
  int channels = 1;       // C, audio channels in and out
  int lstm_layers = 2;
  int sample_rate = 48000;
  bool normalize_input = true;

  // Output width of encoder layer i (1-based); level 0 is the audio itself.
  int level_channels(int i) const { return i == 0 ? channels : hidden << (i - 1); }
  int lstm_hidden() const { return level_channels(layers); }

  void validate() const {
    if (layers < 1) throw ConfigError("demucs: layers must be >= 1");
    if (hidden < 1) throw ConfigError("demucs: hidden must be >= 1");
    if (stride < 1) throw ConfigError("demucs: stride must be >= 1");
    if (kernel_size <= stride) throw ConfigError("demucs: kernel_size must exceed stride");
    if (channels < 1) throw ConfigError("demucs: channels must be >= 1");
    if (lstm_layers < 1) throw ConfigError("demucs: lstm_layers must be >= 1");
    if (sample_rate <= 0) throw ConfigError("demucs: sample_rate must be positive");
    if (layers > 12 || (std::int64_t(hidden) << (layers - 1)) > (1 << 16))
      throw ConfigError("demucs: channel schedule too large");
  }

  bool operator==(const DemucsConfig&) const = default;
};

// Smallest length >= `length` for which every strided convolution consumes
// its input exactly and the transposed convolutions rebuild the same length.
inline std::int64_t valid_length(const DemucsConfig& cfg, std::int64_t length) {
  std::int64_t n = length;
  for (int i = 0; i < cfg.layers; ++i) {
    n = (n - cfg.kernel_size + cfg.stride - 1) / cfg.stride + 1;  // ceil((n - K) / S) + 1
    n = std::max<std::int64_t>(n, 1);
  }
  for (int i = 0; i < cfg.layers; ++i) n = (n - 1) * cfg.stride + cfg.kernel_size;
  return n;
}

// Input samples that must have arrived before the streaming engine can emit
// its first output sample: one frame at the deepest level, expanded back
// through the K/S cascade. Equals one plus the largest look-ahead of any
// output sample.
inline std::int64_t algorithmic_latency(const DemucsConfig& cfg) {
  cfg.validate();
  std::int64_t n = 1;
  for (int i = 0; i < cfg.layers; ++i) n = (n - 1) * cfg.stride + cfg.kernel_size;
  return n;
}

inline double algorithmic_latency_ms(const DemucsConfig& cfg) {
  return 1000.0 * double(algorithmic_latency(cfg)) / double(cfg.sample_rate);
}

inline nlohmann::json to_json(const DemucsConfig& c) {
  return {{"layers", c.layers},         {"hidden", c.hidden},
          {"kernel_size", c.kernel_size}, {"stride", c.stride},
          {"channels", c.channels},     {"lstm_layers", c.lstm_layers},
          {"sample_rate", c.sample_rate}, {"normalize_input", c.normalize_input}};
}

inline DemucsConfig config_from_json(const nlohmann::json& j) {
  DemucsConfig c;
  c.layers = j.value("layers", c.layers);
  c.hidden = j.value("hidden", c.hidden);
  c.kernel_size = j.value("kernel_size", c.kernel_size);
  c.stride = j.value("stride", c.stride);
  c.channels = j.value("channels", c.channels);
  c.lstm_layers = j.value("lstm_layers", c.lstm_layers);
  c.sample_rate = j.value("sample_rate", c.sample_rate);
  c.normalize_input = j.value("normalize_input", c.normalize_input);
  return c;
}

struct TensorSpec {
  std::string name;
  std::vector<std::int64_t> shape;
};

// Every tensor the config requires, in canonical file order. Layouts follow
// torch.nn: Conv1d [out, in, K], ConvTranspose1d [in, out, K], LSTM gates
// stacked (i, f, g, o).
inline std::vector<TensorSpec> tensor_specs(const DemucsConfig& cfg) {
  cfg.validate();
  std::vector<TensorSpec> s;
  const std::int64_t K = cfg.kernel_size;
  for (int i = 1; i <= cfg.layers; ++i) {
    const std::int64_t in = cfg.level_channels(i - 1), ch = cfg.level_channels(i);
    const std::string p = "encoder." + std::to_string(i) + ".";
    s.push_back({p + "conv.weight", {ch, in, K}});
    s.push_back({p + "conv.bias", {ch}});
    s.push_back({p + "pointwise.weight", {2 * ch, ch, 1}});
    s.push_back({p + "pointwise.bias", {2 * ch}});
  }
  const std::int64_t hd = cfg.lstm_hidden();
  for (int k = 0; k < cfg.lstm_layers; ++k) {
    const std::string l = std::to_string(k);
    s.push_back({"lstm.weight_ih_l" + l, {4 * hd, hd}});
    s.push_back({"lstm.weight_hh_l" + l, {4 * hd, hd}});
    s.push_back({"lstm.bias_ih_l" + l, {4 * hd}});
    s.push_back({"lstm.bias_hh_l" + l, {4 * hd}});
  }
  for (int i = cfg.layers; i >= 1; --i) {
    const std::int64_t out = cfg.level_channels(i - 1), ch = cfg.level_channels(i);
    const std::string p = "decoder." + std::to_string(i) + ".";
    s.push_back({p + "pointwise.weight", {2 * ch, ch, 1}});
    s.push_back({p + "pointwise.bias", {2 * ch}});
    s.push_back({p + "convtr.weight", {ch, out, K}});
    s.push_back({p + "convtr.bias", {out}});
  }
  return s;
}

}  // namespace spatialsep::demucs
