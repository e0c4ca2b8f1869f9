#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dshl/features.h"
#include "dshl/rng.h"

namespace dshl {

using Mat = Eigen::MatrixXd;

enum class Direction { kForward, kRetrograde };

/// A batch of sequences: one (input_dim x batch) matrix per timestep.
using SequenceBatch = std::vector<Mat>;

/// Builds a 16-step batch from store segments; retrograde reverses time.
SequenceBatch make_batch(const SegmentStore& store, const std::vector<int>& segment_ids,
                         Direction direction);

/// Gates are stacked in row blocks of size H: input, forget, output, candidate.
struct LstmParams {
  Mat wx;  // 4H x D
  Mat wh;  // 4H x H
  Mat b;   // 4H x 1

  int hidden() const { return static_cast<int>(wh.cols()); }
  int input() const { return static_cast<int>(wx.cols()); }

  /// Uniform(+-1/sqrt(H)) weights, zero biases except forget gate = 1.
  static LstmParams init(int input, int hidden, Rng& rng);
  LstmParams zeros_like() const;
  std::vector<Mat*> tensors();
  std::vector<const Mat*> tensors() const;
};

struct LstmState {
  Mat h;  // H x B
  Mat c;  // H x B
};

/// Everything the backward pass needs from one forward pass.
struct LstmTape {
  SequenceBatch inputs;
  std::vector<Mat> gates;   // per step, 4H x B, post-activation
  std::vector<Mat> cells;   // per step, c_t
  std::vector<Mat> hiddens; // per step, h_t
  int hidden = 0;

  const Mat& final_hidden() const { return hiddens.back(); }
};

/// Runs the recurrence from h = c = 0. `direction` reverses the steps first.
LstmTape lstm_forward(const LstmParams& params, const SequenceBatch& sequence,
                      Direction direction = Direction::kForward);

/// Reverse-mode pass. `d_hidden[t]` is dLoss/dh_t (empty matrices count as
/// zero). Gradients are accumulated into `grads`.
void lstm_backward(const LstmParams& params, const LstmTape& tape, const std::vector<Mat>& d_hidden,
                   LstmParams& grads);

/// Linear heads on h_t predicting the next timestep's 29 features. Row blocks
/// of the weight: articulation (1), octave (4), pitch class (12), chord (12).
struct PredictionHeads {
  Mat w;  // 29 x H
  Mat b;  // 29 x 1

  static PredictionHeads init(int hidden, Rng& rng);
  PredictionHeads zeros_like() const;
  std::vector<Mat*> tensors();
  std::vector<const Mat*> tensors() const;
};

struct PretrainLoss {
  double loss = 0.0;
  std::int64_t predictions = 0;  // (step, sequence) pairs averaged over
};

/// Teacher-forced next-step prediction loss on `sequence` (already in the
/// processing direction): mean over predicted steps of BCE(articulation) plus
/// the cross-entropy of each one-hot group whose target is not all-zero.
/// When `lstm_grads`/`head_grads` are given, exact gradients are accumulated.
PretrainLoss pretrain_loss(const LstmParams& lstm, const PredictionHeads& heads,
                           const SequenceBatch& sequence, LstmParams* lstm_grads = nullptr,
                           PredictionHeads* head_grads = nullptr);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // <= 0 disables clipping
};

/// Adam over a fixed list of tensors, with global gradient-norm clipping.
class Adam {
 public:
  Adam(std::vector<Mat*> params, AdamConfig config = {});

  /// Applies one update; returns the pre-clipping gradient norm.
  double step(const std::vector<const Mat*>& grads);
  std::int64_t steps() const { return t_; }

 private:
  std::vector<Mat*> params_;
  std::vector<Mat> m_, v_;
  AdamConfig config_;
  std::int64_t t_ = 0;
};

/// Forward and backward next-step predictors trained in the first stage.
struct PretrainModel {
  LstmParams forward_lstm, backward_lstm;
  PredictionHeads forward_heads, backward_heads;

  static PretrainModel init(int hidden, Rng& rng);
};

struct PretrainConfig {
  int epochs = 30;
  int batch_size = 64;
  AdamConfig adam;
};

struct PretrainEpoch {
  int epoch = 0;
  double forward_loss = 0.0;
  double backward_loss = 0.0;
};

/// One optimizer step on a batch for one direction; returns the batch loss.
/// Throws NonFiniteLoss.
double pretrain_step(LstmParams& lstm, PredictionHeads& heads, const SequenceBatch& batch,
                     Adam& optimizer);

std::vector<PretrainEpoch> pretrain(PretrainModel& model, const SegmentStore& store,
                                    const PretrainConfig& config, Rng& rng);

/// Named tensors, persisted as a versioned binary file.
class Checkpoint {
 public:
  void put(const std::string& name, const Mat& value) { tensors_[name] = value; }
  const Mat& get(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.contains(name); }
  const std::map<std::string, Mat>& tensors() const { return tensors_; }

  void write(std::ostream& out) const;
  static Checkpoint read(std::istream& in);
  std::string serialize() const;
  /// FNV-1a over the serialized bytes.
  std::uint64_t checksum() const;

  void put_lstm(const std::string& prefix, const LstmParams& p);
  LstmParams get_lstm(const std::string& prefix) const;
  void put_heads(const std::string& prefix, const PredictionHeads& h);
  PredictionHeads get_heads(const std::string& prefix) const;

 private:
  std::map<std::string, Mat> tensors_;
};

Checkpoint to_checkpoint(const PretrainModel& model);
PretrainModel pretrain_model_from(const Checkpoint& ckpt);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace dshl
