#include "dshl/hashnet.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "dshl/errors.h"

namespace dshl {
namespace {

Mat uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
  }
  return m;
}

Mat relu(const Mat& x) { return x.cwiseMax(0.0); }

Mat relu_mask(const Mat& pre) { return (pre.array() > 0.0).cast<double>().matrix(); }

/// Everything recorded by one direction's forward pass.
struct CodeTape {
  LstmTape lstm;
  Mat m0, a1, m1, a2, m2, codes;
};

CodeTape code_forward(const DirectionNet& net, const SequenceBatch& seq, int L, int K) {
  CodeTape t;
  t.lstm = lstm_forward(net.lstm, seq);
  t.m0 = relu(t.lstm.final_hidden());
  t.a1 = net.head.w1 * t.m0;
  t.a1.colwise() += net.head.b1.col(0);
  t.m1 = relu(t.a1);
  t.a2 = net.head.w2 * t.m1;
  t.a2.colwise() += net.head.b2.col(0);
  t.m2 = relu(t.a2);
  t.codes = group_softmax(t.m2, L, K);
  return t;
}

void code_backward(const DirectionNet& net, const CodeTape& t, const Mat& d_codes, int L, int K,
                   DirectionNet& grads) {
  // softmax: dz = p * (dp - <p, dp>) within each group
  Mat d_m2(d_codes.rows(), d_codes.cols());
  for (int l = 0; l < L; ++l) {
    const auto p = t.codes.middleRows(l * K, K).array();
    const auto dp = d_codes.middleRows(l * K, K).array();
    const Eigen::RowVectorXd dot = (p * dp).colwise().sum().matrix();
    d_m2.middleRows(l * K, K) = (p * (dp.rowwise() - dot.array())).matrix();
  }
  const Mat d_a2 = d_m2.cwiseProduct(relu_mask(t.a2));
  grads.head.w2.noalias() += d_a2 * t.m1.transpose();
  grads.head.b2 += d_a2.rowwise().sum();
  const Mat d_a1 = (net.head.w2.transpose() * d_a2).cwiseProduct(relu_mask(t.a1));
  grads.head.w1.noalias() += d_a1 * t.m0.transpose();
  grads.head.b1 += d_a1.rowwise().sum();
  const Mat d_h = (net.head.w1.transpose() * d_a1).cwiseProduct(relu_mask(t.lstm.final_hidden()));

  std::vector<Mat> d_hidden(t.lstm.hiddens.size());
  d_hidden.back() = d_h;
  lstm_backward(net.lstm, t.lstm, d_hidden, grads.lstm);
}

const DirectionNet& pick(const HashNet& net, Direction d) {
  return d == Direction::kForward ? net.forward : net.backward;
}

// Balance term of one code batch and, optionally, its gradient.
double balance_of(const Mat& codes, int K, Mat* d_codes, double weight) {
  const Eigen::VectorXd dev =
      (codes.rowwise().mean().array() - 1.0 / static_cast<double>(K)).matrix();
  if (d_codes != nullptr) {
    d_codes->colwise() += (2.0 * weight / static_cast<double>(codes.cols())) * dev;
  }
  return dev.squaredNorm();
}

}  // namespace

// Small positive bias keeps the ReLU units alive at the start; a dead fc2 group
// emits a uniform softmax row, which passes no gradient.
constexpr double kReluBiasInit = 0.1;

HashHead HashHead::init(int hidden, int code_length, int arity, Rng& rng) {
  HashHead h;
  h.w1 = uniform_matrix(kHashHidden, hidden, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  h.b1 = Mat::Constant(kHashHidden, 1, kReluBiasInit);
  h.w2 = uniform_matrix(code_length * arity, kHashHidden,
                        1.0 / std::sqrt(static_cast<double>(kHashHidden)), rng);
  h.b2 = Mat::Constant(code_length * arity, 1, kReluBiasInit);
  return h;
}

HashHead HashHead::zeros_like() const {
  return HashHead{Mat::Zero(w1.rows(), w1.cols()), Mat::Zero(b1.rows(), 1),
                  Mat::Zero(w2.rows(), w2.cols()), Mat::Zero(b2.rows(), 1)};
}

std::vector<Mat*> HashHead::tensors() { return {&w1, &b1, &w2, &b2}; }
std::vector<const Mat*> HashHead::tensors() const { return {&w1, &b1, &w2, &b2}; }

std::vector<Mat*> DirectionNet::tensors() {
  auto t = lstm.tensors();
  for (Mat* m : head.tensors()) t.push_back(m);
  return t;
}

std::vector<const Mat*> DirectionNet::tensors() const {
  auto t = lstm.tensors();
  for (const Mat* m : head.tensors()) t.push_back(m);
  return t;
}

HashNet HashNet::from_pretrained(const PretrainModel& pre, int code_length, int arity, Rng& rng) {
  HashNet n;
  n.code_length = code_length;
  n.arity = arity;
  const int H = pre.forward_lstm.hidden();
  n.forward = {pre.forward_lstm, HashHead::init(H, code_length, arity, rng)};
  n.backward = {pre.backward_lstm, HashHead::init(H, code_length, arity, rng)};
  return n;
}

HashNet HashNet::init(int hidden, int code_length, int arity, Rng& rng) {
  HashNet n;
  n.code_length = code_length;
  n.arity = arity;
  n.forward.lstm = LstmParams::init(kFeatureDim, hidden, rng);
  n.forward.head = HashHead::init(hidden, code_length, arity, rng);
  n.backward.lstm = LstmParams::init(kFeatureDim, hidden, rng);
  n.backward.head = HashHead::init(hidden, code_length, arity, rng);
  return n;
}

HashNet HashNet::zeros_like() const {
  return HashNet{code_length, arity, forward.zeros_like(), backward.zeros_like()};
}

std::vector<Mat*> HashNet::tensors() {
  auto t = forward.tensors();
  for (Mat* m : backward.tensors()) t.push_back(m);
  return t;
}

std::vector<const Mat*> HashNet::tensors() const {
  auto t = forward.tensors();
  for (const Mat* m : backward.tensors()) t.push_back(m);
  return t;
}

Mat group_softmax(const Mat& logits, int code_length, int arity) {
  Mat out(logits.rows(), logits.cols());
  for (int l = 0; l < code_length; ++l) {
    const auto z = logits.middleRows(l * arity, arity);
    const Eigen::ArrayXXd e = (z.rowwise() - z.colwise().maxCoeff()).array().exp();
    out.middleRows(l * arity, arity) = (e.rowwise() / e.colwise().sum()).matrix();
  }
  return out;
}

Mat continuous_codes(const HashNet& net, Direction direction, const SegmentStore& store,
                     const std::vector<int>& segment_ids) {
  const auto seq = make_batch(store, segment_ids, direction);
  return code_forward(pick(net, direction), seq, net.code_length, net.arity).codes;
}

ContinuousCode ContinuousCode::from_column(const Mat& codes, Eigen::Index col, int code_length,
                                           int arity) {
  ContinuousCode c{code_length, arity, {}};
  c.values.assign(codes.col(col).data(), codes.col(col).data() + codes.rows());
  return c;
}

DiscreteCode discretize(const ContinuousCode& code) {
  DiscreteCode digits(static_cast<std::size_t>(code.code_length), 0);
  for (int l = 0; l < code.code_length; ++l) {
    int best = 0;
    for (int k = 1; k < code.arity; ++k) {
      if (code.at(l, k) > code.at(l, best)) best = k;
    }
    digits[static_cast<std::size_t>(l)] = best;
  }
  return digits;
}

std::vector<DiscreteCode> discretize_columns(const Mat& codes, int code_length, int arity) {
  std::vector<DiscreteCode> out;
  out.reserve(static_cast<std::size_t>(codes.cols()));
  for (Eigen::Index c = 0; c < codes.cols(); ++c) {
    out.push_back(discretize(ContinuousCode::from_column(codes, c, code_length, arity)));
  }
  return out;
}

double pair_loss(const ContinuousCode& forward, const ContinuousCode& backward, int label) {
  if (forward.values.size() != backward.values.size()) throw ShapeMismatch("code shapes differ");
  double dot = 0.0;
  for (std::size_t k = 0; k < forward.values.size(); ++k) dot += forward.values[k] * backward.values[k];
  const double d = dot / static_cast<double>(forward.code_length) - static_cast<double>(label);
  return d * d;
}

double balance_term(const std::vector<ContinuousCode>& batch) {
  if (batch.empty()) throw ShapeMismatch("balance term of an empty batch");
  const int L = batch.front().code_length, K = batch.front().arity;
  Mat codes(L * K, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t n = 0; n < batch.size(); ++n) {
    if (batch[n].code_length != L || batch[n].arity != K) throw ShapeMismatch("mixed code shapes");
    codes.col(static_cast<Eigen::Index>(n)) =
        Eigen::Map<const Eigen::VectorXd>(batch[n].values.data(), L * K);
  }
  return balance_of(codes, K, nullptr, 0.0);
}

int digit_hamming(const DiscreteCode& a, const DiscreteCode& b) {
  if (a.size() != b.size()) throw ShapeMismatch("code lengths differ");
  int d = 0;
  for (std::size_t k = 0; k < a.size(); ++k) d += a[k] != b[k];
  return d;
}

Objective hash_objective(const HashNet& net, const SegmentStore& store,
                         const std::vector<SegmentPair>& pairs, double alpha, HashNet* grads) {
  Objective obj;
  if (pairs.empty()) return obj;
  const int L = net.code_length, K = net.arity;
  std::vector<int> is, js;
  Eigen::VectorXd labels(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t n = 0; n < pairs.size(); ++n) {
    is.push_back(pairs[n].i);
    js.push_back(pairs[n].j);
    labels(static_cast<Eigen::Index>(n)) = pairs[n].label;
  }
  const CodeTape tf = code_forward(net.forward, make_batch(store, is, Direction::kForward), L, K);
  const CodeTape tb = code_forward(net.backward, make_batch(store, js, Direction::kRetrograde), L, K);
  const double N = static_cast<double>(pairs.size());
  const double inv_l = 1.0 / static_cast<double>(L);

  const Eigen::VectorXd resid =
      (tf.codes.cwiseProduct(tb.codes).colwise().sum().transpose() * inv_l - labels);
  obj.pair_loss = resid.squaredNorm() / N;

  Mat d_f, d_b;
  Mat* df = nullptr;
  Mat* db = nullptr;
  if (grads != nullptr) {
    // d/dbF_n = (2/N) r_n (1/L) bB_n, and symmetrically
    const Eigen::RowVectorXd coef = (2.0 / N * inv_l) * resid.transpose();
    d_f = tb.codes.array().rowwise() * coef.array();
    d_b = tf.codes.array().rowwise() * coef.array();
    df = &d_f;
    db = &d_b;
  }
  obj.balance = balance_of(tf.codes, K, df, alpha) + balance_of(tb.codes, K, db, alpha);
  obj.loss = obj.pair_loss + alpha * obj.balance;

  if (grads != nullptr) {
    code_backward(net.forward, tf, d_f, L, K, grads->forward);
    code_backward(net.backward, tb, d_b, L, K, grads->backward);
  }
  return obj;
}

HashTrainer::HashTrainer(HashNet& net, double alpha, AdamConfig adam)
    : net_(net), alpha_(alpha), adam_(net.tensors(), adam) {}

Objective HashTrainer::step(const SegmentStore& store, const std::vector<SegmentPair>& pairs) {
  HashNet grads = net_.zeros_like();
  const Objective obj = hash_objective(net_, store, pairs, alpha_, &grads);
  if (!std::isfinite(obj.loss)) throw NonFiniteLoss("hash objective is not finite");
  adam_.step(std::as_const(grads).tensors());
  return obj;
}

void validate(const TrainConfig& config) {
  if (config.code_length < 1) throw ConfigError("code length L must be >= 1");
  if (config.arity < 2) throw ConfigError("arity K must be >= 2");
  if (!(config.alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (config.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (config.batch_positives < 1) throw ConfigError("batch size must be >= 1");
}

double mean_pair_hamming(const HashNet& net, const SegmentStore& store,
                         const std::vector<SegmentPair>& pairs) {
  if (pairs.empty()) return 0.0;
  constexpr std::size_t kChunk = 512;
  auto codes_for = [&](Direction dir, std::vector<int> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::map<int, DiscreteCode> out;
    for (std::size_t s = 0; s < ids.size(); s += kChunk) {
      const std::vector<int> chunk(ids.begin() + static_cast<std::ptrdiff_t>(s),
                                   ids.begin() + static_cast<std::ptrdiff_t>(std::min(ids.size(), s + kChunk)));
      const auto digits =
          discretize_columns(continuous_codes(net, dir, store, chunk), net.code_length, net.arity);
      for (std::size_t k = 0; k < chunk.size(); ++k) out.emplace(chunk[k], digits[k]);
    }
    return out;
  };
  std::vector<int> is, js;
  for (const auto& p : pairs) {
    is.push_back(p.i);
    js.push_back(p.j);
  }
  const auto fwd = codes_for(Direction::kForward, is);
  const auto bwd = codes_for(Direction::kRetrograde, js);
  double total = 0.0;
  for (const auto& p : pairs) total += digit_hamming(fwd.at(p.i), bwd.at(p.j));
  return total / static_cast<double>(pairs.size());
}

std::vector<EpochMetrics> train_hash(HashNet& net, const SegmentStore& store,
                                     const HashTrainingData& data, const TrainConfig& config,
                                     const std::function<void(const EpochMetrics&)>& on_epoch) {
  validate(config);
  if (net.code_length != config.code_length || net.arity != config.arity) {
    throw ShapeMismatch("network code shape differs from the training config");
  }
  if (data.train_pos.empty()) throw InsufficientPairs("no positive training pairs");
  Rng rng(config.seed);
  HashTrainer trainer(net, config.alpha, config.adam);
  std::vector<SegmentPair> positives = data.train_pos;
  std::vector<SegmentPair> negatives = data.train_neg;
  const auto bp = static_cast<std::size_t>(config.batch_positives);

  std::vector<EpochMetrics> history;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (epoch > 1 && data.resample) negatives = data.resample(positives.size(), rng);
    rng.shuffle(std::span<SegmentPair>(positives));
    rng.shuffle(std::span<SegmentPair>(negatives));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t s = 0; s < positives.size(); s += bp) {
      std::vector<SegmentPair> batch(positives.begin() + static_cast<std::ptrdiff_t>(s),
                                     positives.begin() + static_cast<std::ptrdiff_t>(std::min(positives.size(), s + bp)));
      if (s < negatives.size()) {
        batch.insert(batch.end(), negatives.begin() + static_cast<std::ptrdiff_t>(s),
                     negatives.begin() + static_cast<std::ptrdiff_t>(std::min(negatives.size(), s + bp)));
      }
      loss_sum += trainer.step(store, batch).loss;
      ++batches;
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(batches);
    m.ham_pos_train = mean_pair_hamming(net, store, positives);
    m.ham_neg_train = mean_pair_hamming(net, store, negatives);
    m.ham_pos_val = mean_pair_hamming(net, store, data.val_pos);
    m.ham_neg_val = mean_pair_hamming(net, store, data.val_neg);
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return history;
}

void write_metrics(std::ostream& out, const std::vector<EpochMetrics>& rows) {
  out << "# epoch train_loss ham_pos_train ham_neg_train ham_pos_val ham_neg_val\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d %.17g %.17g %.17g %.17g %.17g\n", r.epoch, r.train_loss,
                  r.ham_pos_train, r.ham_neg_train, r.ham_pos_val, r.ham_neg_val);
    out << buf;
  }
}

std::vector<EpochMetrics> read_metrics(std::istream& in) {
  std::vector<EpochMetrics> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    EpochMetrics m;
    if (!(ls >> m.epoch >> m.train_loss >> m.ham_pos_train >> m.ham_neg_train >> m.ham_pos_val >>
          m.ham_neg_val)) {
      throw FormatError("metrics line " + std::to_string(lineno) + " needs 6 columns");
    }
    std::string extra;
    if (ls >> extra) throw FormatError("metrics line " + std::to_string(lineno) + " has extra columns");
    rows.push_back(m);
  }
  return rows;
}

namespace {

void put_head(Checkpoint& c, const std::string& prefix, const HashHead& h) {
  c.put(prefix + "hash.fc1.w", h.w1);
  c.put(prefix + "hash.fc1.b", h.b1);
  c.put(prefix + "hash.fc2.w", h.w2);
  c.put(prefix + "hash.fc2.b", h.b2);
}

HashHead get_head(const Checkpoint& c, const std::string& prefix, int hidden, int lk) {
  HashHead h{c.get(prefix + "hash.fc1.w"), c.get(prefix + "hash.fc1.b"),
             c.get(prefix + "hash.fc2.w"), c.get(prefix + "hash.fc2.b")};
  if (h.w1.rows() != kHashHidden || h.w1.cols() != hidden || h.b1.rows() != kHashHidden ||
      h.w2.rows() != lk || h.w2.cols() != kHashHidden || h.b2.rows() != lk) {
    throw ShapeMismatch("inconsistent hash head shapes under " + prefix);
  }
  return h;
}

}  // namespace

Checkpoint to_checkpoint(const HashNet& net) {
  Checkpoint c;
  Mat shape(1, 2);
  shape << net.code_length, net.arity;
  c.put("hash.shape", shape);
  c.put_lstm("fwd.", net.forward.lstm);
  put_head(c, "fwd.", net.forward.head);
  c.put_lstm("bwd.", net.backward.lstm);
  put_head(c, "bwd.", net.backward.head);
  return c;
}

HashNet hash_net_from(const Checkpoint& ckpt) {
  const Mat& shape = ckpt.get("hash.shape");
  if (shape.size() != 2) throw ShapeMismatch("hash.shape must hold L and K");
  HashNet n;
  n.code_length = static_cast<int>(shape(0, 0));
  n.arity = static_cast<int>(shape(0, 1));
  if (n.code_length < 1 || n.arity < 2) throw ShapeMismatch("invalid L or K in checkpoint");
  const int lk = n.code_length * n.arity;
  n.forward.lstm = ckpt.get_lstm("fwd.");
  n.backward.lstm = ckpt.get_lstm("bwd.");
  n.forward.head = get_head(ckpt, "fwd.", n.forward.lstm.hidden(), lk);
  n.backward.head = get_head(ckpt, "bwd.", n.backward.lstm.hidden(), lk);
  return n;
}

}  // namespace dshl
