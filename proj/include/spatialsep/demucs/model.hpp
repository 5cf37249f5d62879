// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Causal multichannel waveform encoder/decoder.
//
//   encoder i = 1..L : Conv1d(K, stride S) -> ReLU -> 1x1 conv to 2*ch -> GLU
//   bottleneck       : unidirectional LSTM, lstm_layers deep, width ch(L)
//   decoder i = L..1 : (x + encoder_i output) -> 1x1 conv to 2*ch -> GLU
//                      -> ConvTranspose1d(K, stride S) -> ReLU (not on i = 1)
//
// Convolutions are unpadded; the input is zero-padded at the end to
// valid_length() and the output trimmed back, so output sample n only sees
// inputs up to n + algorithmic_latency() - 1.
//
// Tensors are Eigen column-major [channels x time], one time step per
// column, so K consecutive columns form an im2col patch without copying.

#pragma once

#include <memory>
#include <vector>

#include "spatialsep/common.hpp"
#include "spatialsep/demucs/config.hpp"
#include "spatialsep/demucs/weights.hpp"

namespace spatialsep::demucs {

using MatrixF = Eigen::MatrixXf;
using VectorF = Eigen::VectorXf;

inline constexpr double kNormEps = 1e-3;

enum class Normalization {
  kNone,
  kGlobal,   // whole-signal standard deviation
  kRunning,  // cumulative standard deviation up to each sample (causal)
};

struct EncoderLayer {
  MatrixF conv;       // [ch x K*in], column k*in + c
  VectorF conv_bias;
  MatrixF pointwise;  // [2ch x ch]
  VectorF pointwise_bias;
};

struct DecoderLayer {
  MatrixF pointwise;  // [2ch x ch]
  VectorF pointwise_bias;
  MatrixF convtr;     // [K*out x ch], row k*out + c
  VectorF convtr_bias;
};

struct LstmLayer {
  MatrixF w_ih;  // [4h x in]
  MatrixF w_hh;  // [4h x h]
  VectorF bias;  // b_ih + b_hh
};

// Immutable, GEMM-ready copy of a WeightStore. Safe to share between
// threads and streams.
class Model {
 public:
  explicit Model(const WeightStore& ws) : config_(ws.config) {
    ws.validate();
    const int K = config_.kernel_size;
    auto vec = [&](const std::string& n) {
      const auto& t = ws.at(n);
      return VectorF(Eigen::Map<const VectorF>(t.data.data(), Eigen::Index(t.data.size())));
    };
    for (int i = 1; i <= config_.layers; ++i) {
      const int in = config_.level_channels(i - 1), ch = config_.level_channels(i);
      const std::string p = "encoder." + std::to_string(i) + ".";
      EncoderLayer e;
      const auto& w = ws.at(p + "conv.weight").data;  // [ch][in][K]
      e.conv.resize(ch, K * in);
      for (int o = 0; o < ch; ++o)
        for (int c = 0; c < in; ++c)
          for (int k = 0; k < K; ++k) e.conv(o, k * in + c) = w[std::size_t((o * in + c) * K + k)];
      e.conv_bias = vec(p + "conv.bias");
      e.pointwise = rowmajor(ws.at(p + "pointwise.weight").data, 2 * ch, ch);
      e.pointwise_bias = vec(p + "pointwise.bias");
      encoder_.push_back(std::move(e));
    }
    const int hd = config_.lstm_hidden();
    for (int k = 0; k < config_.lstm_layers; ++k) {
      const std::string l = std::to_string(k);
      LstmLayer layer;
      layer.w_ih = rowmajor(ws.at("lstm.weight_ih_l" + l).data, 4 * hd, hd);
      layer.w_hh = rowmajor(ws.at("lstm.weight_hh_l" + l).data, 4 * hd, hd);
      layer.bias = vec("lstm.bias_ih_l" + l) + vec("lstm.bias_hh_l" + l);
      lstm_.push_back(std::move(layer));
    }
    decoder_.resize(std::size_t(config_.layers));
    for (int i = 1; i <= config_.layers; ++i) {
      const int out = config_.level_channels(i - 1), ch = config_.level_channels(i);
      const std::string p = "decoder." + std::to_string(i) + ".";
      DecoderLayer d;
      d.pointwise = rowmajor(ws.at(p + "pointwise.weight").data, 2 * ch, ch);
      d.pointwise_bias = vec(p + "pointwise.bias");
      const auto& w = ws.at(p + "convtr.weight").data;  // [ch][out][K]
      d.convtr.resize(K * out, ch);
      for (int c = 0; c < ch; ++c)
        for (int o = 0; o < out; ++o)
          for (int k = 0; k < K; ++k) d.convtr(k * out + o, c) = w[std::size_t((c * out + o) * K + k)];
      d.convtr_bias = vec(p + "convtr.bias");
      decoder_[std::size_t(i - 1)] = std::move(d);
    }
  }

  const DemucsConfig& config() const { return config_; }
  // 1-based, as in the weight names.
  const EncoderLayer& encoder(int i) const { return encoder_[std::size_t(i - 1)]; }
  const DecoderLayer& decoder(int i) const { return decoder_[std::size_t(i - 1)]; }
  const std::vector<LstmLayer>& lstm() const { return lstm_; }

 private:
  static MatrixF rowmajor(const std::vector<float>& data, int rows, int cols) {
    return Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        data.data(), rows, cols);
  }

  DemucsConfig config_;
  std::vector<EncoderLayer> encoder_;
  std::vector<DecoderLayer> decoder_;
  std::vector<LstmLayer> lstm_;
};

// ---- kernels ---------------------------------------------------------------

namespace kernels {

inline float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

// Strided valid convolution over the first (frames - 1) * S + K columns.
inline MatrixF conv(const MatrixF& x, const EncoderLayer& l, int K, int S, Eigen::Index frames) {
  const Eigen::Index in = x.rows();
  Eigen::Map<const MatrixF, 0, Eigen::OuterStride<>> patches(x.data(), in * K, frames,
                                                            Eigen::OuterStride<>(in * S));
  MatrixF y = l.conv * patches;
  y.colwise() += l.conv_bias;
  return y;
}

inline void relu(MatrixF& x) { x = x.cwiseMax(0.0f); }

// First half of the rows gated by the sigmoid of the second half.
inline MatrixF glu(const MatrixF& x) {
  const Eigen::Index h = x.rows() / 2;
  return x.topRows(h).array() * x.bottomRows(h).unaryExpr(&sigmoid).array();
}

inline MatrixF pointwise_glu(const MatrixF& x, const MatrixF& w, const VectorF& b) {
  MatrixF y = w * x;
  y.colwise() += b;
  return glu(y);
}

inline MatrixF encode(const MatrixF& x, const EncoderLayer& l, int K, int S, Eigen::Index frames) {
  MatrixF y = conv(x, l, K, S, frames);
  relu(y);
  return pointwise_glu(y, l.pointwise, l.pointwise_bias);
}

// Adds ConvTranspose1d contributions of `frames` (no bias) into acc; the
// first frame lands at column `offset`.
inline void convtr_accumulate(const MatrixF& frames, const DecoderLayer& l, int K, int S,
                              MatrixF& acc, Eigen::Index offset = 0) {
  const MatrixF y = l.convtr * frames;  // [K*out x n]
  const Eigen::Index out = acc.rows();
  for (Eigen::Index j = 0; j < frames.cols(); ++j)
    for (int k = 0; k < K; ++k) acc.col(offset + j * S + k) += y.block(k * out, j, out, 1);
}

struct LstmState {
  std::vector<VectorF> h, c;

  explicit LstmState(const Model& m) {
    const int hd = m.config().lstm_hidden();
    for (int k = 0; k < m.config().lstm_layers; ++k) {
      h.push_back(VectorF::Zero(hd));
      c.push_back(VectorF::Zero(hd));
    }
  }
};

// Runs the LSTM stack over the columns of x, updating state in place.
inline MatrixF lstm(const MatrixF& x, const Model& m, LstmState& st) {
  MatrixF cur = x;
  const Eigen::Index hd = m.config().lstm_hidden();
  for (std::size_t k = 0; k < m.lstm().size(); ++k) {
    const LstmLayer& l = m.lstm()[k];
    MatrixF gx = l.w_ih * cur;
    gx.colwise() += l.bias;
    MatrixF out(hd, cur.cols());
    VectorF g(4 * hd);
    for (Eigen::Index t = 0; t < cur.cols(); ++t) {
      g.noalias() = gx.col(t);
      g.noalias() += l.w_hh * st.h[k];
      auto i = g.segment(0, hd).unaryExpr(&sigmoid).array();
      auto f = g.segment(hd, hd).unaryExpr(&sigmoid).array();
      auto gg = g.segment(2 * hd, hd).array().tanh();
      auto o = g.segment(3 * hd, hd).unaryExpr(&sigmoid).array();
      st.c[k] = (f * st.c[k].array() + i * gg).matrix();
      st.h[k] = (o * st.c[k].array().tanh()).matrix();
      out.col(t) = st.h[k];
    }
    cur = std::move(out);
  }
  return cur;
}

}  // namespace kernels

// Cumulative (population) standard deviation over all channels up to and
// including each sample.
class RunningStd {
 public:
  double push(const double* column, Eigen::Index channels) {
    for (Eigen::Index c = 0; c < channels; ++c) {
      sum_ += column[c];
      sum_sq_ += column[c] * column[c];
    }
    count_ += double(channels);
    const double mean = sum_ / count_;
    return std::sqrt(std::max(0.0, sum_sq_ / count_ - mean * mean));
  }

 private:
  double sum_ = 0.0, sum_sq_ = 0.0, count_ = 0.0;
};

inline double global_std(const RowMatrixXd& x) {
  if (x.size() == 0) return 0.0;
  const double mean = x.mean();
  return std::sqrt((x.array() - mean).square().sum() / double(x.size()));
}

// Offline forward pass on a C x T signal; returns C x T.
inline MultichannelAudio forward(const MultichannelAudio& audio, const Model& model,
                                 Normalization norm) {
  const DemucsConfig& cfg = model.config();
  if (audio.channels() != cfg.channels)
    throw DataError("forward: model expects " + std::to_string(cfg.channels) +
                    " channels, got " + std::to_string(audio.channels()));
  const Eigen::Index T = audio.frames();
  MultichannelAudio result(audio.channels(), T, audio.sample_rate);
  if (T == 0) return result;

  // per-sample input scale (the output is multiplied back by 1 / scale)
  std::vector<double> scale(std::size_t(T), 1.0);
  if (norm == Normalization::kGlobal) {
    std::fill(scale.begin(), scale.end(), 1.0 / (global_std(audio.samples) + kNormEps));
  } else if (norm == Normalization::kRunning) {
    RunningStd rs;
    Eigen::VectorXd col(audio.channels());
    for (Eigen::Index t = 0; t < T; ++t) {
      col = audio.samples.col(t);
      scale[std::size_t(t)] = 1.0 / (rs.push(col.data(), col.size()) + kNormEps);
    }
  }

  const int K = cfg.kernel_size, S = cfg.stride;
  const Eigen::Index V = valid_length(cfg, T);
  MatrixF x = MatrixF::Zero(cfg.channels, V);
  for (Eigen::Index t = 0; t < T; ++t)
    x.col(t) = (audio.samples.col(t) * scale[std::size_t(t)]).cast<float>();

  std::vector<MatrixF> skips;
  for (int i = 1; i <= cfg.layers; ++i) {
    const Eigen::Index frames = (x.cols() - K) / S + 1;
    x = kernels::encode(x, model.encoder(i), K, S, frames);
    skips.push_back(x);
  }

  kernels::LstmState st(model);
  x = kernels::lstm(x, model, st);

  for (int i = cfg.layers; i >= 1; --i) {
    const DecoderLayer& d = model.decoder(i);
    x += skips[std::size_t(i - 1)];
    const MatrixF z = kernels::pointwise_glu(x, d.pointwise, d.pointwise_bias);
    MatrixF acc = MatrixF::Zero(cfg.level_channels(i - 1), (z.cols() - 1) * S + K);
    kernels::convtr_accumulate(z, d, K, S, acc);
    acc.colwise() += d.convtr_bias;
    if (i > 1) kernels::relu(acc);
    x = std::move(acc);
  }

  for (Eigen::Index t = 0; t < T; ++t)
    result.samples.col(t) = x.col(t).cast<double>() / scale[std::size_t(t)];
  return result;
}

inline MultichannelAudio forward(const MultichannelAudio& audio, const Model& model) {
  return forward(audio, model,
                 model.config().normalize_input ? Normalization::kGlobal : Normalization::kNone);
}

}  // namespace spatialsep::demucs
