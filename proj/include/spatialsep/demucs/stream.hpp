// Copyright 2026 The spatialsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <deque>
#include <memory>
#include <vector>

#include "spatialsep/demucs/model.hpp"

namespace spatialsep::demucs {

// Incremental execution of forward(). Every layer keeps the tail of its
// input that the next strided frame still needs, the LSTM keeps its state,
// and each transposed convolution keeps the K - S output positions that
// later frames still add into. An output sample is emitted as soon as no
// future frame can touch it.
//
// With Normalization::kRunning (the default when the model normalizes its
// input) the result matches forward(x, model, Normalization::kRunning).
//
// One Stream belongs to one caller at a time; many streams may share a
// Model.
class Stream {
 public:
  explicit Stream(std::shared_ptr<const Model> model)
      : Stream(model, model->config().normalize_input ? Normalization::kRunning
                                                      : Normalization::kNone) {}

  Stream(std::shared_ptr<const Model> model, Normalization norm)
      : model_(std::move(model)), norm_(norm), lstm_(*model_) {
    if (norm_ == Normalization::kGlobal)
      throw ConfigError("streaming needs a causal normalization (running or none)");
    const auto& cfg = model_->config();
    const auto L = std::size_t(cfg.layers);
    enc_pending_.resize(L);
    skip_.resize(L);
    acc_.resize(L);
    acc_base_.assign(L, 0);
    dec_frames_.assign(L, 0);
    for (int i = 1; i <= cfg.layers; ++i) {
      enc_pending_[std::size_t(i - 1)].resize(cfg.level_channels(i - 1), 0);
      skip_[std::size_t(i - 1)].resize(cfg.level_channels(i), 0);
      acc_[std::size_t(i - 1)].resize(cfg.level_channels(i - 1), 0);
    }
  }

  std::int64_t samples_consumed() const { return consumed_; }
  std::int64_t samples_emitted() const { return emitted_; }
  bool flushed() const { return flushed_; }

  MultichannelAudio push(const MultichannelAudio& chunk) {
    if (flushed_) throw std::logic_error("stream: push after flush");
    const auto& cfg = model_->config();
    if (chunk.channels() != cfg.channels)
      throw DataError("stream: expected " + std::to_string(cfg.channels) + " channels, got " +
                      std::to_string(chunk.channels()));
    sample_rate_ = chunk.sample_rate;
    const Eigen::Index n = chunk.frames();
    MatrixF x(cfg.channels, n);
    Eigen::VectorXd col(cfg.channels);
    for (Eigen::Index t = 0; t < n; ++t) {
      double scale = 1.0;
      if (norm_ == Normalization::kRunning) {
        col = chunk.samples.col(t);
        scale = 1.0 / (running_.push(col.data(), col.size()) + kNormEps);
      }
      scales_.push_back(scale);
      x.col(t) = (chunk.samples.col(t) * scale).cast<float>();
    }
    consumed_ += n;
    append(enc_pending_[0], x);
    return emit(decode(run_encoders(), false), consumed_);
  }

  // Pads the input to the model's valid length with zeros and releases the
  // remaining output; total output equals total input length.
  MultichannelAudio flush() {
    if (flushed_) throw std::logic_error("stream: already flushed");
    flushed_ = true;
    const auto& cfg = model_->config();
    if (consumed_ == 0) return MultichannelAudio(cfg.channels, 0, sample_rate_);
    const Eigen::Index pad = valid_length(cfg, consumed_) - consumed_;
    append(enc_pending_[0], MatrixF::Zero(cfg.channels, pad));
    return emit(decode(run_encoders(), true), consumed_);
  }

 private:
  static void append(MatrixF& m, const MatrixF& cols) {
    if (cols.cols() == 0) return;
    const Eigen::Index old = m.cols();
    m.conservativeResize(m.rows(), old + cols.cols());
    m.rightCols(cols.cols()) = cols;
  }

  static void drop_front(MatrixF& m, Eigen::Index n) {
    if (n <= 0) return;
    if (n >= m.cols()) {
      m.resize(m.rows(), 0);
      return;
    }
    MatrixF rest = m.rightCols(m.cols() - n);
    m = std::move(rest);
  }

  // Runs every encoder level on whatever full frames are available and
  // returns the new deepest-level frames.
  MatrixF run_encoders() {
    const auto& cfg = model_->config();
    const int K = cfg.kernel_size, S = cfg.stride;
    MatrixF top(cfg.lstm_hidden(), 0);
    for (int i = 1; i <= cfg.layers; ++i) {
      MatrixF& pending = enc_pending_[std::size_t(i - 1)];
      const Eigen::Index frames = pending.cols() >= K ? (pending.cols() - K) / S + 1 : 0;
      if (frames == 0) break;
      MatrixF y = kernels::encode(pending, model_->encoder(i), K, S, frames);
      drop_front(pending, frames * S);
      append(skip_[std::size_t(i - 1)], y);
      if (i < cfg.layers)
        append(enc_pending_[std::size_t(i)], y);
      else
        top = std::move(y);
    }
    return top;
  }

  // Pops the first n skip columns of level i.
  MatrixF take_skip(int i, Eigen::Index n) {
    MatrixF& s = skip_[std::size_t(i - 1)];
    MatrixF out = s.leftCols(n);
    drop_front(s, n);
    return out;
  }

  MatrixF decode(const MatrixF& top, bool final) {
    const auto& cfg = model_->config();
    const int K = cfg.kernel_size, S = cfg.stride;
    MatrixF x(cfg.lstm_hidden(), 0);
    if (top.cols() > 0) {
      x = kernels::lstm(top, *model_, lstm_);
      x += take_skip(cfg.layers, x.cols());
    }
    for (int i = cfg.layers; i >= 1; --i) {
      const auto li = std::size_t(i - 1);
      const DecoderLayer& d = model_->decoder(i);
      MatrixF& acc = acc_[li];
      if (x.cols() > 0) {
        const MatrixF z = kernels::pointwise_glu(x, d.pointwise, d.pointwise_bias);
        const std::int64_t first = dec_frames_[li];
        const Eigen::Index need = (first + z.cols() - 1) * S + K - acc_base_[li];
        if (need > acc.cols()) {
          const Eigen::Index old = acc.cols();
          acc.conservativeResize(acc.rows(), need);
          acc.rightCols(need - old).setZero();
        }
        kernels::convtr_accumulate(z, d, K, S, acc, first * S - acc_base_[li]);
        dec_frames_[li] += z.cols();
      }
      const Eigen::Index ready =
          final ? acc.cols()
                : std::clamp<Eigen::Index>(dec_frames_[li] * S - acc_base_[li], 0, acc.cols());
      MatrixF out = acc.leftCols(ready);
      out.colwise() += d.convtr_bias;
      if (i > 1) kernels::relu(out);
      drop_front(acc, ready);
      acc_base_[li] += ready;
      if (i > 1 && out.cols() > 0) out += take_skip(i - 1, out.cols());
      x = std::move(out);
    }
    return x;
  }

  // Converts finished output positions back to the signal scale, never
  // past sample `limit`.
  MultichannelAudio emit(const MatrixF& y, std::int64_t limit) {
    const Eigen::Index n = std::min<Eigen::Index>(y.cols(), limit - emitted_);
    MultichannelAudio out(y.rows(), std::max<Eigen::Index>(0, n), sample_rate_);
    for (Eigen::Index t = 0; t < out.frames(); ++t) {
      out.samples.col(t) = y.col(t).cast<double>() / scales_.front();
      scales_.pop_front();
    }
    emitted_ += out.frames();
    return out;
  }

  std::shared_ptr<const Model> model_;
  Normalization norm_;
  RunningStd running_;
  kernels::LstmState lstm_;
  std::deque<double> scales_;
  std::vector<MatrixF> enc_pending_;  // input of encoder level i
  std::vector<MatrixF> skip_;         // encoder level i outputs not yet used by the decoder
  std::vector<MatrixF> acc_;          // transposed-conv partial sums of decoder level i
  std::vector<std::int64_t> acc_base_;
  std::vector<std::int64_t> dec_frames_;
  std::int64_t consumed_ = 0;
  std::int64_t emitted_ = 0;
  double sample_rate_ = 48000.0;
  bool flushed_ = false;
};

// Runs a whole signal through a fresh stream in fixed-size chunks.
inline MultichannelAudio stream_forward(const MultichannelAudio& audio,
                                        std::shared_ptr<const Model> model, Eigen::Index chunk,
                                        Normalization norm) {
  if (chunk <= 0) throw ConfigError("chunk size must be positive");
  Stream s(std::move(model), norm);
  RowMatrixXd out(audio.channels(), audio.frames());
  Eigen::Index w = 0;
  auto put = [&](const MultichannelAudio& y) {
    out.middleCols(w, y.frames()) = y.samples;
    w += y.frames();
  };
  for (Eigen::Index t = 0; t < audio.frames(); t += chunk) {
    const Eigen::Index n = std::min(chunk, audio.frames() - t);
    put(s.push(MultichannelAudio(audio.samples.middleCols(t, n), audio.sample_rate)));
  }
  put(s.flush());
  return MultichannelAudio(std::move(out), audio.sample_rate);
}

}  // namespace spatialsep::demucs
