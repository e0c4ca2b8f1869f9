#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dshl/errors.h"
#include "dshl/hashnet.h"

using namespace dshl;

namespace {

SegmentStore random_store(int n, Rng& rng) {
  SegmentStore s;
  for (int k = 0; k < n; ++k) {
    SegmentTensor t;
    t.segment_id = k;
    t.song_ids = {k};
    for (auto& v : t.steps) {
      if (rng.uniform01() < 0.8) {
        v.set(static_cast<std::size_t>(kOctaveBit + rng.uniform_index(4)));
        v.set(static_cast<std::size_t>(kPitchClassBit + rng.uniform_index(12)));
        v.set(kArticulationBit, rng.uniform01() < 0.5);
      }
      if (rng.uniform01() < 0.7) v.set(static_cast<std::size_t>(kChordBit + rng.uniform_index(12)));
    }
    s.segments.push_back(t);
  }
  return s;
}

// One-hot relaxed code with the given digits.
ContinuousCode hard(const std::vector<int>& digits, int K) {
  ContinuousCode c;
  c.code_length = static_cast<int>(digits.size());
  c.arity = K;
  c.values.assign(digits.size() * static_cast<std::size_t>(K), 0.0);
  for (std::size_t l = 0; l < digits.size(); ++l) c.values[l * static_cast<std::size_t>(K) + static_cast<std::size_t>(digits[l])] = 1.0;
  return c;
}

double rel_error(double a, double b) { return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-7); }

}  // namespace

TEST(Softmax, RowsSumToOneAndPreserveArgmax) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int L = 1 + static_cast<int>(rng.uniform_index(8)), K = 2 + static_cast<int>(rng.uniform_index(6));
    Mat z(L * K, 3);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.uniform(-30, 30);
    const Mat p = group_softmax(z, L, K);
    const auto digits = discretize_columns(p, L, K);
    for (int b = 0; b < 3; ++b) {
      for (int l = 0; l < L; ++l) {
        EXPECT_NEAR(p.block(l * K, b, K, 1).sum(), 1.0, 1e-9);
        EXPECT_GE(p.block(l * K, b, K, 1).minCoeff(), 0.0);
        Eigen::Index arg;
        z.col(b).segment(l * K, K).maxCoeff(&arg);
        EXPECT_EQ(digits[static_cast<std::size_t>(b)][static_cast<std::size_t>(l)], arg);
      }
    }
  }
}

TEST(Softmax, SpecGroupPicksFirst) {
  Mat z(4, 1);
  z << 2.0, 0.1, 0.5, 0.3;
  EXPECT_EQ(discretize_columns(group_softmax(z, 1, 4), 1, 4)[0], (DiscreteCode{0}));
}

TEST(Codes, ZeroParametersGiveUniformCodes) {
  Rng rng(2);
  const SegmentStore s = random_store(4, rng);
  const HashNet net = HashNet::init(6, 3, 5, rng).zeros_like();
  for (Direction d : {Direction::kForward, Direction::kRetrograde}) {
    const Mat c = continuous_codes(net, d, s, {0, 1, 2, 3});
    EXPECT_EQ(c.rows(), 15);
    EXPECT_EQ(c.cols(), 4);
    EXPECT_NEAR((c.array() - 0.2).abs().maxCoeff(), 0.0, 1e-15);
  }
}

TEST(Codes, ColumnLayoutIsRowMajor) {
  Mat codes(6, 2);
  codes << 0.7, 0, 0.3, 0, 0, 0, 0.2, 0, 0.5, 0, 0.3, 0;
  const auto c = ContinuousCode::from_column(codes, 0, 2, 3);
  EXPECT_EQ(c.at(0, 0), 0.7);
  EXPECT_EQ(c.at(1, 1), 0.5);
}

TEST(Discretize, ExamplesAndTies) {
  ContinuousCode c{2, 4, {0.7, 0.1, 0.1, 0.1, 0.2, 0.5, 0.2, 0.1}};
  EXPECT_EQ(discretize(c), (DiscreteCode{0, 1}));
  ContinuousCode u{1, 4, {0.25, 0.25, 0.25, 0.25}};
  EXPECT_EQ(discretize(u), (DiscreteCode{0}));
  ContinuousCode tie{1, 3, {0.2, 0.4, 0.4}};
  EXPECT_EQ(discretize(tie), (DiscreteCode{1}));
}

TEST(PairLoss, SpecIdentities) {
  const std::vector<int> a{0, 1, 2, 3, 0, 1, 2, 3};
  EXPECT_DOUBLE_EQ(pair_loss(hard(a, 4), hard(a, 4), 1), 0.0);
  const std::vector<int> disjoint{1, 2, 3, 0, 1, 2, 3, 0};
  EXPECT_DOUBLE_EQ(pair_loss(hard(a, 4), hard(disjoint, 4), 0), 0.0);
  const std::vector<int> half{0, 1, 2, 3, 1, 2, 3, 0};
  EXPECT_DOUBLE_EQ(pair_loss(hard(a, 4), hard(half, 4), 1), 0.25);
}

TEST(PairLoss, HardCodesTrackHamming) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const int L = 1 + static_cast<int>(rng.uniform_index(10)), K = 2 + static_cast<int>(rng.uniform_index(5));
    std::vector<int> x(static_cast<std::size_t>(L)), y(x.size());
    for (auto& d : x) d = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(K)));
    for (auto& d : y) d = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(K)));
    const double dist = digit_hamming(x, y);
    const double inner = 1.0 - dist / L;
    EXPECT_NEAR(pair_loss(hard(x, K), hard(y, K), 1), (inner - 1) * (inner - 1), 1e-12);
    EXPECT_NEAR(pair_loss(hard(x, K), hard(y, K), 0), inner * inner, 1e-12);
  }
}

TEST(Balance, UniformAndDegenerateBatches) {
  ContinuousCode uni{2, 4, std::vector<double>(8, 0.25)};
  EXPECT_NEAR(balance_term({uni, uni, uni}), 0.0, 1e-15);
  // Bit 0 always digit 0, bit 1 uniform.
  ContinuousCode skew{2, 4, {1, 0, 0, 0, 0.25, 0.25, 0.25, 0.25}};
  EXPECT_NEAR(balance_term({skew, skew}), 3.0 / 4.0, 1e-12);
  // Opposite hard codes average to a balanced batch.
  EXPECT_NEAR(balance_term({hard({0, 1}, 2), hard({1, 0}, 2)}), 0.0, 1e-15);
}

TEST(Objective, GradientsMatchFiniteDifferences) {
  // Full objective through fc2, fc1 and both LSTMs, tiny config.
  Rng rng(4);
  const SegmentStore s = random_store(6, rng);
  HashNet net = HashNet::init(4, 2, 3, rng);
  // Keep ReLU inputs away from their kink so central differences are valid.
  for (DirectionNet* d : {&net.forward, &net.backward}) {
    d->head.b1.setConstant(0.3);
    d->head.b2.setConstant(0.2);
    for (Eigen::Index i = 0; i < d->head.w2.size(); ++i) d->head.w2.data()[i] = rng.uniform(-1.0, 1.0);
  }
  const std::vector<SegmentPair> pairs{{0, 1, 1}, {2, 3, 1}, {4, 5, 0}, {1, 4, 0}};
  HashNet grads = net.zeros_like();
  hash_objective(net, s, pairs, 0.5, &grads);

  auto params = net.tensors();
  auto g = grads.tensors();
  const double eps = 1e-4;
  int checked = 0, skipped = 0;
  for (int trial = 0; trial < 80; ++trial) {
    const std::size_t t = rng.uniform_index(params.size());
    const auto k = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(params[t]->size())));
    double& w = params[t]->data()[k];
    const double saved = w;
    w = saved + eps;
    const double up = hash_objective(net, s, pairs, 0.5).loss;
    w = saved + eps / 2;
    const double up_half = hash_objective(net, s, pairs, 0.5).loss;
    w = saved - eps;
    const double down = hash_objective(net, s, pairs, 0.5).loss;
    w = saved;
    const double center = hash_objective(net, s, pairs, 0.5).loss;
    // A kink inside [w - eps, w + eps] shows up as a mismatch of one-sided slopes.
    const double right = (up - center) / eps, right_half = (up_half - center) / (eps / 2);
    if (std::abs(right - right_half) > 1e-3 * std::max(1.0, std::abs(right))) {
      ++skipped;
      continue;
    }
    const double numeric = (up - down) / (2 * eps);
    EXPECT_LT(rel_error(g[t]->data()[k], numeric), 1e-4) << "tensor " << t << " entry " << k;
    ++checked;
  }
  EXPECT_GE(checked, 50);
  EXPECT_LE(skipped, 10);
}

TEST(Objective, BalanceGradientAlone) {
  Rng rng(5);
  const SegmentStore s = random_store(5, rng);
  HashNet net = HashNet::init(3, 3, 2, rng);
  for (DirectionNet* d : {&net.forward, &net.backward}) d->head.b1.setConstant(0.4), d->head.b2.setConstant(0.3);
  const std::vector<SegmentPair> pairs{{0, 1, 1}, {2, 3, 0}, {4, 0, 1}};
  // alpha large enough that the balance term dominates.
  HashNet grads = net.zeros_like();
  const Objective o = hash_objective(net, s, pairs, 50.0, &grads);
  EXPECT_NEAR(o.loss, o.pair_loss + 50.0 * o.balance, 1e-12);
  Mat& w = net.forward.head.w2;
  const double eps = 1e-5;
  const double saved = w(1, 2);
  w(1, 2) = saved + eps;
  const double up = hash_objective(net, s, pairs, 50.0).loss;
  w(1, 2) = saved - eps;
  const double down = hash_objective(net, s, pairs, 50.0).loss;
  w(1, 2) = saved;
  EXPECT_LT(rel_error(grads.forward.head.w2(1, 2), (up - down) / (2 * eps)), 1e-4);
}

TEST(Training, OverfitsAFewPositives) {
  Rng rng(6);
  const SegmentStore s = random_store(10, rng);
  HashNet net = HashNet::init(16, 8, 4, rng);
  std::vector<SegmentPair> pos;
  for (int k = 0; k < 9; ++k) pos.push_back({k, k + 1, 1});
  HashTrainer trainer(net, 0.0);
  int steps = 0;
  for (; steps < 2000; ++steps) {
    if (mean_pair_hamming(net, s, pos) == 0.0) break;
    trainer.step(s, pos);
  }
  EXPECT_EQ(mean_pair_hamming(net, s, pos), 0.0) << "after " << steps << " steps";
}

TEST(Training, MetricsRowsAndDeterminism) {
  Rng data(7);
  const SegmentStore s = random_store(30, data);
  HashTrainingData d;
  for (int k = 0; k < 20; ++k) d.train_pos.push_back({k, k + 1, 1});
  for (int k = 0; k < 20; ++k) d.train_neg.push_back({k, (k + 7) % 30, 0});
  d.val_pos = {{25, 26, 1}, {27, 28, 1}};
  d.val_neg = {{25, 3, 0}, {28, 10, 0}};
  TrainConfig cfg;
  cfg.code_length = 4;
  cfg.arity = 3;
  cfg.epochs = 3;
  cfg.batch_positives = 8;
  auto run = [&] {
    Rng rng(8);
    HashNet net = HashNet::init(5, 4, 3, rng);
    int callbacks = 0;
    auto rows = train_hash(net, s, d, cfg, [&](const EpochMetrics&) { ++callbacks; });
    EXPECT_EQ(callbacks, 3);
    return std::make_pair(net, rows);
  };
  const auto [n1, r1] = run();
  const auto [n2, r2] = run();
  ASSERT_EQ(r1.size(), 3u);
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(r1[e].epoch, static_cast<int>(e + 1));
    EXPECT_EQ(r1[e].train_loss, r2[e].train_loss);
    EXPECT_GE(r1[e].ham_pos_val, 0.0);
    EXPECT_LE(r1[e].ham_neg_val, 4.0);
  }
  EXPECT_EQ(n1.forward.head.w2, n2.forward.head.w2);
}

TEST(Training, ConfigValidation) {
  TrainConfig c;
  EXPECT_NO_THROW(validate(c));
  c.arity = 1;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.code_length = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.alpha = -0.1;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Io, MetricsRoundTrip) {
  std::vector<EpochMetrics> rows{{1, 0.5, 3.25, 5.5, 3.0, 5.75}, {2, 0.125, 1.0 / 3.0, 6.0, 2.5, 5.0}};
  std::stringstream buf;
  write_metrics(buf, rows);
  const auto back = read_metrics(buf);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].ham_pos_train, 1.0 / 3.0);
  EXPECT_EQ(back[0].ham_neg_val, 5.75);
  std::stringstream bad("1 2 3\n");
  EXPECT_THROW(read_metrics(bad), FormatError);
}

TEST(Io, CheckpointRoundTrip) {
  Rng rng(9);
  const HashNet net = HashNet::init(4, 5, 3, rng);
  std::stringstream buf;
  to_checkpoint(net).write(buf);
  const HashNet back = hash_net_from(Checkpoint::read(buf));
  EXPECT_EQ(back.code_length, 5);
  EXPECT_EQ(back.arity, 3);
  EXPECT_EQ(back.backward.lstm.wh, net.backward.lstm.wh);
  EXPECT_EQ(back.forward.head.w1, net.forward.head.w1);
  EXPECT_EQ(back.backward.head.b2, net.backward.head.b2);
}

TEST(Io, FromPretrainedCopiesLstms) {
  Rng rng(10);
  const PretrainModel pre = PretrainModel::init(6, rng);
  const HashNet net = HashNet::from_pretrained(pre, 8, 4, rng);
  EXPECT_EQ(net.forward.lstm.wx, pre.forward_lstm.wx);
  EXPECT_EQ(net.backward.lstm.b, pre.backward_lstm.b);
  EXPECT_EQ(net.forward.head.w2.rows(), 32);
  EXPECT_EQ(net.forward.head.w1.rows(), kHashHidden);
}
