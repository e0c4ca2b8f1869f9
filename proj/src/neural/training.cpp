#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dshl/binary_io.h"
#include "dshl/errors.h"
#include "dshl/neural.h"

namespace dshl {

Adam::Adam(std::vector<Mat*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (const Mat* p : params_) {
    m_.push_back(Mat::Zero(p->rows(), p->cols()));
    v_.push_back(Mat::Zero(p->rows(), p->cols()));
  }
}

double Adam::step(const std::vector<const Mat*>& grads) {
  if (grads.size() != params_.size()) throw ShapeMismatch("optimizer gradient count");
  double sq = 0.0;
  for (const Mat* g : grads) sq += g->squaredNorm();
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NonFiniteLoss("non-finite gradient norm");
  const double clip =
      config_.clip_norm > 0.0 && norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const Mat g = *grads[k] * clip;
    m_[k] = config_.beta1 * m_[k] + (1.0 - config_.beta1) * g;
    v_[k] = config_.beta2 * v_[k] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    params_[k]->array() -= config_.learning_rate * (m_[k].array() / bc1) /
                           ((v_[k].array() / bc2).sqrt() + config_.epsilon);
  }
  return norm;
}

PretrainModel PretrainModel::init(int hidden, Rng& rng) {
  PretrainModel m;
  m.forward_lstm = LstmParams::init(kFeatureDim, hidden, rng);
  m.forward_heads = PredictionHeads::init(hidden, rng);
  m.backward_lstm = LstmParams::init(kFeatureDim, hidden, rng);
  m.backward_heads = PredictionHeads::init(hidden, rng);
  return m;
}

double pretrain_step(LstmParams& lstm, PredictionHeads& heads, const SequenceBatch& batch,
                     Adam& optimizer) {
  LstmParams lg = lstm.zeros_like();
  PredictionHeads hg = heads.zeros_like();
  const PretrainLoss loss = pretrain_loss(lstm, heads, batch, &lg, &hg);
  if (!std::isfinite(loss.loss)) throw NonFiniteLoss("pretraining loss is not finite");
  std::vector<const Mat*> grads = std::as_const(lg).tensors();
  for (const Mat* g : std::as_const(hg).tensors()) grads.push_back(g);
  optimizer.step(grads);
  return loss.loss;
}

namespace {

std::vector<Mat*> all_params(LstmParams& lstm, PredictionHeads& heads) {
  std::vector<Mat*> p = lstm.tensors();
  for (Mat* m : heads.tensors()) p.push_back(m);
  return p;
}

}  // namespace

std::vector<PretrainEpoch> pretrain(PretrainModel& model, const SegmentStore& store,
                                    const PretrainConfig& config, Rng& rng) {
  if (store.segments.empty()) throw EmptyPool("no segments to pretrain on");
  if (config.batch_size <= 0) throw ConfigError("batch size must be positive");
  Adam fwd(all_params(model.forward_lstm, model.forward_heads), config.adam);
  Adam bwd(all_params(model.backward_lstm, model.backward_heads), config.adam);

  std::vector<int> order(store.segments.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<PretrainEpoch> history;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<int>(order));
    double fsum = 0.0, bsum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::vector<int> ids(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
      const double n = static_cast<double>(ids.size());
      fsum += n * pretrain_step(model.forward_lstm, model.forward_heads,
                                make_batch(store, ids, Direction::kForward), fwd);
      bsum += n * pretrain_step(model.backward_lstm, model.backward_heads,
                                make_batch(store, ids, Direction::kRetrograde), bwd);
      seen += ids.size();
    }
    history.push_back({epoch, fsum / static_cast<double>(seen), bsum / static_cast<double>(seen)});
  }
  return history;
}

// ---- checkpoints -----------------------------------------------------------

namespace {
constexpr std::string_view kCheckpointMagic = "DSHLCKPT";
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

const Mat& Checkpoint::get(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw FormatError("checkpoint has no tensor " + name);
  return it->second;
}

void Checkpoint::write(std::ostream& out) const {
  io::write_magic(out, kCheckpointMagic);
  io::write_le<std::uint32_t>(out, kCheckpointVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors_.size()));
  for (const auto& [name, m] : tensors_) {
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    io::write_le<std::uint32_t>(out, 2);
    io::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    io::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) io::write_f64(out, m(r, c));
    }
  }
}

Checkpoint Checkpoint::read(std::istream& in) {
  io::expect_magic(in, kCheckpointMagic);
  const auto version = io::read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
  const auto count = io::read_le<std::uint32_t>(in);
  Checkpoint ckpt;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = io::read_le<std::uint32_t>(in);
    if (len > 4096) throw FormatError("tensor name too long");
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in) throw FormatError("truncated tensor name");
    if (io::read_le<std::uint32_t>(in) != 2) throw FormatError("tensor rank must be 2");
    const auto rows = io::read_le<std::uint64_t>(in);
    const auto cols = io::read_le<std::uint64_t>(in);
    if (rows > (1u << 24) || cols > (1u << 24)) throw FormatError("tensor too large");
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = io::read_f64(in);
    }
    ckpt.put(name, m);
  }
  return ckpt;
}

std::string Checkpoint::serialize() const {
  std::ostringstream out(std::ios::binary);
  write(out);
  return out.str();
}

std::uint64_t Checkpoint::checksum() const { return io::fnv1a(serialize()); }

void Checkpoint::put_lstm(const std::string& prefix, const LstmParams& p) {
  put(prefix + "lstm.wx", p.wx);
  put(prefix + "lstm.wh", p.wh);
  put(prefix + "lstm.b", p.b);
}

LstmParams Checkpoint::get_lstm(const std::string& prefix) const {
  LstmParams p{get(prefix + "lstm.wx"), get(prefix + "lstm.wh"), get(prefix + "lstm.b")};
  const auto four_h = p.wh.rows();
  if (four_h % 4 != 0 || p.wh.cols() * 4 != four_h || p.wx.rows() != four_h ||
      p.b.rows() != four_h || p.b.cols() != 1) {
    throw ShapeMismatch("inconsistent LSTM tensor shapes under " + prefix);
  }
  return p;
}

void Checkpoint::put_heads(const std::string& prefix, const PredictionHeads& h) {
  put(prefix + "pred.w", h.w);
  put(prefix + "pred.b", h.b);
}

PredictionHeads Checkpoint::get_heads(const std::string& prefix) const {
  PredictionHeads h{get(prefix + "pred.w"), get(prefix + "pred.b")};
  if (h.w.rows() != kFeatureDim || h.b.rows() != kFeatureDim || h.b.cols() != 1) {
    throw ShapeMismatch("inconsistent prediction head shapes under " + prefix);
  }
  return h;
}

Checkpoint to_checkpoint(const PretrainModel& model) {
  Checkpoint c;
  c.put_lstm("fwd.", model.forward_lstm);
  c.put_heads("fwd.", model.forward_heads);
  c.put_lstm("bwd.", model.backward_lstm);
  c.put_heads("bwd.", model.backward_heads);
  return c;
}

PretrainModel pretrain_model_from(const Checkpoint& ckpt) {
  PretrainModel m;
  m.forward_lstm = ckpt.get_lstm("fwd.");
  m.forward_heads = ckpt.get_heads("fwd.");
  m.backward_lstm = ckpt.get_lstm("bwd.");
  m.backward_heads = ckpt.get_heads("bwd.");
  if (m.forward_lstm.hidden() != m.backward_lstm.hidden()) {
    throw ShapeMismatch("forward and backward hidden sizes differ");
  }
  return m;
}

}  // namespace dshl
