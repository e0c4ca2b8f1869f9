#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "dshl/neural.h"
#include "dshl/pairs.h"

namespace dshl {

inline constexpr int kHashHidden = 64;

/// fc1: H -> 64, fc2: 64 -> L*K.
struct HashHead {
  Mat w1, b1;  // 64 x H, 64 x 1
  Mat w2, b2;  // LK x 64, LK x 1

  static HashHead init(int hidden, int code_length, int arity, Rng& rng);
  HashHead zeros_like() const;
  std::vector<Mat*> tensors();
  std::vector<const Mat*> tensors() const;
};

/// W_F or W_B: an LSTM plus its hashing layers.
struct DirectionNet {
  LstmParams lstm;
  HashHead head;

  DirectionNet zeros_like() const { return {lstm.zeros_like(), head.zeros_like()}; }
  std::vector<Mat*> tensors();
  std::vector<const Mat*> tensors() const;
};

struct HashNet {
  int code_length = 8;  // L
  int arity = 4;        // K
  DirectionNet forward, backward;

  /// LSTMs copied from the pretraining stage, fresh hash heads.
  static HashNet from_pretrained(const PretrainModel& pre, int code_length, int arity, Rng& rng);
  static HashNet init(int hidden, int code_length, int arity, Rng& rng);
  HashNet zeros_like() const;
  std::vector<Mat*> tensors();
  std::vector<const Mat*> tensors() const;
  int hidden() const { return forward.lstm.hidden(); }
};

/// Relaxed codes of a batch: (L*K) x B, column b is row-major L x K.
/// `direction` picks the network; the backward network sees the retrograde.
Mat continuous_codes(const HashNet& net, Direction direction, const SegmentStore& store,
                     const std::vector<int>& segment_ids);

/// Per-group softmax of the columns of an (L*K) x B matrix.
Mat group_softmax(const Mat& logits, int code_length, int arity);

/// L x K softmax output for a single segment.
struct ContinuousCode {
  int code_length = 0;
  int arity = 0;
  std::vector<double> values;  // row-major L x K

  double at(int l, int k) const { return values[static_cast<std::size_t>(l * arity + k)]; }
  static ContinuousCode from_column(const Mat& codes, Eigen::Index col, int code_length, int arity);
};

using DiscreteCode = std::vector<int>;

/// Row-wise argmax; ties go to the lowest index.
DiscreteCode discretize(const ContinuousCode& code);
/// Same, for every column of an (L*K) x B matrix.
std::vector<DiscreteCode> discretize_columns(const Mat& codes, int code_length, int arity);

double pair_loss(const ContinuousCode& forward, const ContinuousCode& backward, int label);
/// Sum over L groups of || batch mean - 1/K ||^2 for one batch of codes.
double balance_term(const std::vector<ContinuousCode>& batch);

int digit_hamming(const DiscreteCode& a, const DiscreteCode& b);

struct Objective {
  double loss = 0.0;        // mean pair loss + alpha * balance
  double pair_loss = 0.0;   // mean over the batch
  double balance = 0.0;     // forward batch + backward batch
};

/// Mean Eq. (3) loss over `pairs` plus alpha times the balance term of the
/// forward batch (codes of the i's) and the backward batch (codes of the j's).
/// Accumulates exact gradients into `grads` when given.
Objective hash_objective(const HashNet& net, const SegmentStore& store,
                         const std::vector<SegmentPair>& pairs, double alpha,
                         HashNet* grads = nullptr);

/// Optimizer bound to one network's tensors.
class HashTrainer {
 public:
  HashTrainer(HashNet& net, double alpha, AdamConfig adam = {});
  /// One update on `pairs`; throws NonFiniteLoss.
  Objective step(const SegmentStore& store, const std::vector<SegmentPair>& pairs);

 private:
  HashNet& net_;
  double alpha_;
  Adam adam_;
};

struct TrainConfig {
  int code_length = 8;
  int arity = 4;
  double alpha = 0.1;
  int epochs = 100;
  int batch_positives = 64;  // and as many negatives
  AdamConfig adam;
  std::uint64_t seed = 1;
};

void validate(const TrainConfig& config);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double ham_pos_train = 0.0;
  double ham_neg_train = 0.0;
  double ham_pos_val = 0.0;
  double ham_neg_val = 0.0;
};

struct HashTrainingData {
  std::vector<SegmentPair> train_pos, val_pos, val_neg;
  /// The first epoch's negatives; later epochs call `resample` if set.
  std::vector<SegmentPair> train_neg;
  std::function<std::vector<SegmentPair>(std::size_t n, Rng& rng)> resample;
};

/// Mean digit Hamming distance between discretized h_F(s_i) and h_B(s_j).
double mean_pair_hamming(const HashNet& net, const SegmentStore& store,
                         const std::vector<SegmentPair>& pairs);

std::vector<EpochMetrics> train_hash(HashNet& net, const SegmentStore& store,
                                     const HashTrainingData& data, const TrainConfig& config,
                                     const std::function<void(const EpochMetrics&)>& on_epoch = {});

void write_metrics(std::ostream& out, const std::vector<EpochMetrics>& rows);
std::vector<EpochMetrics> read_metrics(std::istream& in);

Checkpoint to_checkpoint(const HashNet& net);
HashNet hash_net_from(const Checkpoint& ckpt);

}  // namespace dshl
