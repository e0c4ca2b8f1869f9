#include <cmath>

#include "dshl/neural.h"

namespace dshl {
namespace {

Mat uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  Mat m(rows, cols);
  // Column-major fill order is part of the seed contract.
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
  }
  return m;
}

}  // namespace

SequenceBatch make_batch(const SegmentStore& store, const std::vector<int>& segment_ids,
                         Direction direction) {
  const auto batch = static_cast<Eigen::Index>(segment_ids.size());
  SequenceBatch seq(kSegmentSteps, Mat::Zero(kFeatureDim, batch));
  for (Eigen::Index k = 0; k < batch; ++k) {
    const auto& steps = store.segments[static_cast<std::size_t>(segment_ids[static_cast<std::size_t>(k)])].steps;
    for (int t = 0; t < kSegmentSteps; ++t) {
      const int src = direction == Direction::kForward ? t : kSegmentSteps - 1 - t;
      const auto& v = steps[static_cast<std::size_t>(src)];
      for (int f = 0; f < kFeatureDim; ++f) {
        if (v.test(static_cast<std::size_t>(f))) seq[static_cast<std::size_t>(t)](f, k) = 1.0;
      }
    }
  }
  return seq;
}

LstmParams LstmParams::init(int input, int hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  LstmParams p;
  p.wx = uniform_matrix(4 * hidden, input, bound, rng);
  p.wh = uniform_matrix(4 * hidden, hidden, bound, rng);
  p.b = Mat::Zero(4 * hidden, 1);
  p.b.middleRows(hidden, hidden).setOnes();
  return p;
}

LstmParams LstmParams::zeros_like() const {
  return LstmParams{Mat::Zero(wx.rows(), wx.cols()), Mat::Zero(wh.rows(), wh.cols()),
                    Mat::Zero(b.rows(), b.cols())};
}

std::vector<Mat*> LstmParams::tensors() { return {&wx, &wh, &b}; }
std::vector<const Mat*> LstmParams::tensors() const { return {&wx, &wh, &b}; }

LstmTape lstm_forward(const LstmParams& params, const SequenceBatch& sequence, Direction direction) {
  const int H = params.hidden();
  LstmTape tape;
  tape.hidden = H;
  const std::size_t T = sequence.size();
  if (T == 0) return tape;
  const Eigen::Index B = sequence.front().cols();
  Mat h = Mat::Zero(H, B);
  Mat c = Mat::Zero(H, B);
  tape.inputs.reserve(T);
  tape.gates.reserve(T);
  tape.cells.reserve(T);
  tape.hiddens.reserve(T);
  for (std::size_t step = 0; step < T; ++step) {
    const Mat& x = sequence[direction == Direction::kForward ? step : T - 1 - step];
    Mat z = params.wx * x;
    z.noalias() += params.wh * h;
    z.colwise() += params.b.col(0);
    z.topRows(3 * H) = (1.0 / (1.0 + (-z.topRows(3 * H).array()).exp())).matrix();
    z.bottomRows(H) = z.bottomRows(H).array().tanh().matrix();
    c = (z.middleRows(H, H).array() * c.array() + z.topRows(H).array() * z.bottomRows(H).array())
            .matrix();
    h = (z.middleRows(2 * H, H).array() * c.array().tanh()).matrix();
    tape.inputs.push_back(x);
    tape.gates.push_back(std::move(z));
    tape.cells.push_back(c);
    tape.hiddens.push_back(h);
  }
  return tape;
}

void lstm_backward(const LstmParams& params, const LstmTape& tape, const std::vector<Mat>& d_hidden,
                   LstmParams& grads) {
  const int H = tape.hidden;
  const std::size_t T = tape.hiddens.size();
  if (T == 0) return;
  const Eigen::Index B = tape.hiddens.front().cols();
  Mat dh_next = Mat::Zero(H, B);
  Mat dc_next = Mat::Zero(H, B);
  Mat dz(4 * H, B);
  for (std::size_t k = T; k-- > 0;) {
    Mat dh = dh_next;
    if (k < d_hidden.size() && d_hidden[k].size() != 0) dh += d_hidden[k];
    const auto& g = tape.gates[k];
    const auto i = g.topRows(H).array();
    const auto f = g.middleRows(H, H).array();
    const auto o = g.middleRows(2 * H, H).array();
    const auto cand = g.bottomRows(H).array();
    const Eigen::ArrayXXd tc = tape.cells[k].array().tanh();
    const Eigen::ArrayXXd dc = dc_next.array() + dh.array() * o * (1.0 - tc * tc);
    Eigen::ArrayXXd c_prev = Eigen::ArrayXXd::Zero(H, B);
    if (k > 0) c_prev = tape.cells[k - 1].array();

    dz.topRows(H) = (dc * cand * i * (1.0 - i)).matrix();
    dz.middleRows(H, H) = (dc * c_prev * f * (1.0 - f)).matrix();
    dz.middleRows(2 * H, H) = (dh.array() * tc * o * (1.0 - o)).matrix();
    dz.bottomRows(H) = (dc * i * (1.0 - cand * cand)).matrix();
    dc_next = (dc * f).matrix();

    grads.wx.noalias() += dz * tape.inputs[k].transpose();
    if (k > 0) grads.wh.noalias() += dz * tape.hiddens[k - 1].transpose();
    grads.b += dz.rowwise().sum();
    dh_next.noalias() = params.wh.transpose() * dz;
  }
}

PredictionHeads PredictionHeads::init(int hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  return PredictionHeads{uniform_matrix(kFeatureDim, hidden, bound, rng), Mat::Zero(kFeatureDim, 1)};
}

PredictionHeads PredictionHeads::zeros_like() const {
  return PredictionHeads{Mat::Zero(w.rows(), w.cols()), Mat::Zero(b.rows(), b.cols())};
}

std::vector<Mat*> PredictionHeads::tensors() { return {&w, &b}; }
std::vector<const Mat*> PredictionHeads::tensors() const { return {&w, &b}; }

PretrainLoss pretrain_loss(const LstmParams& lstm, const PredictionHeads& heads,
                           const SequenceBatch& sequence, LstmParams* lstm_grads,
                           PredictionHeads* head_grads) {
  PretrainLoss result;
  if (sequence.size() < 2) return result;
  const std::size_t steps = sequence.size() - 1;
  const SequenceBatch inputs(sequence.begin(), sequence.end() - 1);
  const LstmTape tape = lstm_forward(lstm, inputs);
  const Eigen::Index B = sequence.front().cols();
  result.predictions = static_cast<std::int64_t>(steps) * B;
  const double scale = 1.0 / static_cast<double>(result.predictions);
  const bool want_grads = lstm_grads != nullptr || head_grads != nullptr;

  struct Group {
    int offset;
    int size;
  };
  static constexpr Group kGroups[] = {{kOctaveBit, kOctaves},
                                      {kPitchClassBit, kPitchClasses},
                                      {kChordBit, kChordClasses}};

  std::vector<Mat> d_hidden(want_grads ? steps : 0);
  double total = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const Mat& h = tape.hiddens[t];
    const Mat& target = sequence[t + 1];
    Mat logits = heads.w * h;
    logits.colwise() += heads.b.col(0);
    Mat dlogits = Mat::Zero(kFeatureDim, B);

    for (Eigen::Index k = 0; k < B; ++k) {
      const double z = logits(kArticulationBit, k);
      const double y = target(kArticulationBit, k);
      total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
      dlogits(kArticulationBit, k) = sigmoid(z) - y;

      for (const auto& g : kGroups) {
        const auto y_g = target.block(g.offset, k, g.size, 1);
        if (y_g.sum() == 0.0) continue;  // all-zero targets are masked
        const auto z_g = logits.block(g.offset, k, g.size, 1);
        const double zmax = z_g.maxCoeff();
        const Eigen::VectorXd e = (z_g.array() - zmax).exp().matrix();
        const double sum = e.sum();
        total += zmax + std::log(sum) - (z_g.array() * y_g.array()).sum();
        dlogits.block(g.offset, k, g.size, 1) = e / sum - y_g;
      }
    }
    if (want_grads) {
      dlogits *= scale;
      if (head_grads != nullptr) {
        head_grads->w.noalias() += dlogits * h.transpose();
        head_grads->b += dlogits.rowwise().sum();
      }
      d_hidden[t] = heads.w.transpose() * dlogits;
    }
  }
  result.loss = total * scale;
  if (lstm_grads != nullptr) lstm_backward(lstm, tape, d_hidden, *lstm_grads);
  return result;
}

}  // namespace dshl
