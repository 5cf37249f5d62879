// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Weight file layout (all integers little-endian):
//
//   "SDWX" | u32 format_version (= 1) | u64 header_len | header (UTF-8 JSON)
//   | f32 payloads, contiguous, in tensor-table order, row-major
//
// Header: {"kind": "weights", "format_version": 1, "config": {...},
//          "tensors": [{"name", "dtype": "f32", "shape", "byte_offset"}]}
// byte_offset counts from the first payload byte. Parity fixtures use the
// same framing with "kind": "parity".

#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spatialsep/common.hpp"
#include "spatialsep/demucs/config.hpp"

namespace spatialsep::demucs {

inline constexpr char kMagic[4] = {'S', 'D', 'W', 'X'};
inline constexpr std::uint32_t kFormatVersion = 1;

struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

inline std::string shape_string(const std::vector<std::int64_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + std::to_string(s[i]);
  return out + "]";
}

struct WeightStore {
  DemucsConfig config;
  std::uint32_t format_version = kFormatVersion;
  std::map<std::string, Tensor> tensors;

  const Tensor& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("missing tensor: " + name);
    return it->second;
  }

  // Exactly the tensors the config needs, with exact shapes.
  void validate() const {
    const auto specs = tensor_specs(config);
    for (const auto& s : specs) {
      auto it = tensors.find(s.name);
      if (it == tensors.end()) throw DataError("missing tensor: " + s.name);
      if (it->second.shape != s.shape)
        throw DataError("shape mismatch for tensor " + s.name + ": expected " +
                        shape_string(s.shape) + ", got " + shape_string(it->second.shape));
      if (std::int64_t(it->second.data.size()) != it->second.numel())
        throw DataError("payload size mismatch for tensor " + s.name);
    }
    if (tensors.size() != specs.size()) {
      for (const auto& [name, t] : tensors) {
        bool known = false;
        for (const auto& s : specs) known = known || s.name == name;
        if (!known) throw DataError("unexpected tensor: " + name);
      }
    }
  }
};

// Uniform in +-1/sqrt(fan_in) from a fixed seed. Fan-in is the product of
// all dimensions but the first (for biases, that of the matching weight).
inline WeightStore init_weights(const DemucsConfig& cfg, std::uint64_t seed) {
  WeightStore ws;
  ws.config = cfg;
  Rng rng(seed);
  std::int64_t last_fan_in = 1;
  for (const auto& s : tensor_specs(cfg)) {
    Tensor t;
    t.shape = s.shape;
    std::int64_t fan_in = 1;
    if (s.shape.size() > 1) {
      for (std::size_t k = 1; k < s.shape.size(); ++k) fan_in *= s.shape[k];
      // transposed conv: contributions per output come from in * K / stride
      if (s.name.find("convtr.weight") != std::string::npos) fan_in = s.shape[0] * s.shape[2];
      if (s.name.find("lstm.") != std::string::npos) fan_in = s.shape[0] / 4;
      last_fan_in = fan_in;
    } else {
      fan_in = last_fan_in;
    }
    const double bound = 1.0 / std::sqrt(double(std::max<std::int64_t>(1, fan_in)));
    t.data.resize(std::size_t(t.numel()));
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(-bound, bound));
    ws.tensors.emplace(s.name, std::move(t));
  }
  return ws;
}

namespace detail {

inline void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}
inline std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}

struct NamedTensor {
  std::string name;
  const Tensor* tensor;
};

inline std::string encode(nlohmann::json header, const std::vector<NamedTensor>& tensors) {
  std::uint64_t offset = 0;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& nt : tensors) {
    if (std::int64_t(nt.tensor->data.size()) != nt.tensor->numel())
      throw DataError("tensor " + nt.name + " payload does not match its shape");
    for (float v : nt.tensor->data)
      if (!std::isfinite(v)) throw DataError("tensor " + nt.name + " contains non-finite values");
    table.push_back({{"name", nt.name},
                     {"dtype", "f32"},
                     {"shape", nt.tensor->shape},
                     {"byte_offset", offset}});
    offset += 4 * nt.tensor->data.size();
  }
  header["format_version"] = kFormatVersion;
  header["tensors"] = table;
  const std::string text = header.dump();

  std::string out(kMagic, 4);
  put_le(out, kFormatVersion, 4);
  put_le(out, text.size(), 8);
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& nt : tensors)
    for (float v : nt.tensor->data) {
      std::uint32_t u;
      std::memcpy(&u, &v, 4);
      put_le(out, u, 4);
    }
  return out;
}

struct Decoded {
  nlohmann::json header;
  std::vector<std::pair<std::string, Tensor>> tensors;  // table order
};

inline Decoded decode(const std::string& bytes, const std::string& what) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw DataError("not a weight file: " + what);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const auto version = static_cast<std::uint32_t>(get_le(p + 4, 4));
  if (version != kFormatVersion)
    throw DataError("unsupported version " + std::to_string(version) + ": " + what);
  const std::uint64_t header_len = get_le(p + 8, 8);
  if (header_len > bytes.size() - 16) throw DataError("truncated header: " + what);

  Decoded d;
  try {
    d.header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("corrupt header in " + what + ": " + e.what());
  }
  const std::size_t payload = 16 + header_len;
  try {
    for (const auto& entry : d.header.at("tensors")) {
      Tensor t;
      const auto name = entry.at("name").get<std::string>();
      if (entry.value("dtype", std::string("f32")) != "f32")
        throw DataError("unsupported dtype for tensor " + name);
      t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
      const auto off = entry.at("byte_offset").get<std::uint64_t>();
      const auto n = static_cast<std::uint64_t>(t.numel());
      if (payload + off + 4 * n > bytes.size())
        throw DataError("tensor " + name + " runs past the end of " + what);
      t.data.resize(n);
      for (std::uint64_t i = 0; i < n; ++i) {
        const auto u = static_cast<std::uint32_t>(get_le(p + payload + off + 4 * i, 4));
        std::memcpy(&t.data[i], &u, 4);
      }
      d.tensors.emplace_back(name, std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt tensor table in " + what + ": " + e.what());
  }
  return d;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Write to a temporary sibling, then rename into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw DataError("cannot write " + tmp.string());
    os.write(bytes.data(), std::streamsize(bytes.size()));
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

inline std::string serialize_weights(const WeightStore& ws) {
  ws.validate();
  std::vector<detail::NamedTensor> order;
  for (const auto& s : tensor_specs(ws.config)) order.push_back({s.name, &ws.at(s.name)});
  return detail::encode({{"kind", "weights"}, {"config", to_json(ws.config)}}, order);
}

inline WeightStore deserialize_weights(const std::string& bytes, const std::string& what = "<memory>") {
  auto d = detail::decode(bytes, what);
  if (d.header.value("kind", std::string("weights")) != "weights")
    throw DataError("not a weight file (kind '" + d.header.value("kind", std::string()) + "'): " + what);
  WeightStore ws;
  ws.format_version = kFormatVersion;
  try {
    ws.config = config_from_json(d.header.at("config"));
    ws.config.validate();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad config in " + what + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("bad config in ") + what + ": " + e.what());
  }
  for (auto& [name, t] : d.tensors)
    if (!ws.tensors.emplace(name, std::move(t)).second)
      throw DataError("duplicate tensor " + name + " in " + what);
  ws.validate();
  return ws;
}

inline void save_weights(const WeightStore& ws, const std::filesystem::path& path) {
  detail::write_file_atomic(path, serialize_weights(ws));
}

inline WeightStore load_weights(const std::filesystem::path& path) {
  return deserialize_weights(detail::read_file(path), path.string());
}

}  // namespace spatialsep::demucs
