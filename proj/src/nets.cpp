#include "imocap/nets.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "imocap/errors.hpp"

namespace imocap {

using nlohmann::json;

void NetworkSpec::validate() const {
  if (input_width <= 0 || hidden_width <= 0 || output_width <= 0)
    throw SpecMismatch("network spec: widths must be positive");
  if (input_dropout < 0 || input_dropout >= 1)
    throw SpecMismatch("network spec: dropout must be in [0, 1)");
}

NetworkSpec pose_s1_spec() { return {72, 256, 15, OutputActivation::None, true, 0.2}; }
NetworkSpec pose_s2_spec() { return {87, 64, 69, OutputActivation::None, true, 0.2}; }
NetworkSpec pose_s3_spec() { return {141, 128, 90, OutputActivation::None, true, 0.2}; }
NetworkSpec trans_b1_spec() { return {87, 64, 2, OutputActivation::Sigmoid, true, 0.2}; }
NetworkSpec trans_b2_spec() { return {141, 256, 3, OutputActivation::None, false, 0.2}; }

namespace {

constexpr int kLstmLayers = 2;

// Input width of an LSTM layer: layer 0 reads the ReLU projection (H),
// layer 1 reads the concatenated directions of layer 0 (D*H).
int layer_input_width(const NetworkSpec& spec, int layer) {
  return layer == 0 ? spec.hidden_width : spec.directions() * spec.hidden_width;
}

void fill_uniform(MatrixXd& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = dist(rng);
}

}  // namespace

NetworkParams zero_params(const NetworkSpec& spec) {
  spec.validate();
  const int h = spec.hidden_width;
  NetworkParams p;
  p.in_w = MatrixXd::Zero(h, spec.input_width);
  p.in_b = VectorXd::Zero(h);
  for (int layer = 0; layer < kLstmLayers; ++layer) {
    for (int d = 0; d < spec.directions(); ++d) {
      LstmLayerParams l;
      l.w_x = MatrixXd::Zero(4 * h, layer_input_width(spec, layer));
      l.w_h = MatrixXd::Zero(4 * h, h);
      l.bias = VectorXd::Zero(4 * h);
      p.lstm.push_back(std::move(l));
    }
  }
  p.out_w = MatrixXd::Zero(spec.output_width, spec.directions() * h);
  p.out_b = VectorXd::Zero(spec.output_width);
  return p;
}

NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
  NetworkParams p = zero_params(spec);
  std::mt19937_64 rng(seed);
  const int h = spec.hidden_width;
  fill_uniform(p.in_w, 1.0 / std::sqrt(double(spec.input_width)), rng);
  for (LstmLayerParams& l : p.lstm) {
    fill_uniform(l.w_x, 1.0 / std::sqrt(double(l.w_x.cols())), rng);
    fill_uniform(l.w_h, 1.0 / std::sqrt(double(h)), rng);
    l.bias.segment(h, h).setOnes();  // forget gate opens the cell path early
  }
  fill_uniform(p.out_w, 1.0 / std::sqrt(double(p.out_w.cols())), rng);
  return p;
}

void validate_shapes(const NetworkParams& p, const NetworkSpec& spec) {
  spec.validate();
  const int h = spec.hidden_width;
  auto fail = [](const std::string& what) { throw SpecMismatch("weights: " + what); };
  if (p.in_w.rows() != h || p.in_w.cols() != spec.input_width) fail("input projection shape");
  if (p.in_b.size() != h) fail("input bias shape");
  if (p.lstm.size() != static_cast<std::size_t>(kLstmLayers * spec.directions()))
    fail("layer count");
  for (int layer = 0; layer < kLstmLayers; ++layer)
    for (int d = 0; d < spec.directions(); ++d) {
      const LstmLayerParams& l = p.lstm[layer * spec.directions() + d];
      if (l.w_x.rows() != 4 * h || l.w_x.cols() != layer_input_width(spec, layer))
        fail("recurrent input weights shape");
      if (l.w_h.rows() != 4 * h || l.w_h.cols() != h) fail("recurrent state weights shape");
      if (l.bias.size() != 4 * h) fail("recurrent bias shape");
    }
  if (p.out_w.rows() != spec.output_width || p.out_w.cols() != spec.directions() * h)
    fail("output projection shape");
  if (p.out_b.size() != spec.output_width) fail("output bias shape");
}

namespace {

// ---- batched window engine -------------------------------------------------
//
// A batch is B equal-length windows stored frame-major in packed matrices of
// shape (dim x T*B); frame t occupies columns [t*B, (t+1)*B). The per-frame
// recurrence runs on column blocks while the input-side products run over the
// whole packed sequence in single large GEMMs.

struct BatchCache {
  int t_len = 0;
  int batch = 0;
  MatrixXd x_drop;               // L1 x TB, input after (optional) dropout
  MatrixXd relu_out;             // H x TB
  MatrixXd l1_in;                // DH x TB, layer-0 directions concatenated
  MatrixXd out_in;               // DH x TB, layer-1 directions concatenated
  MatrixXd y;                    // L5 x TB, post-activation
  std::vector<MatrixXd> gates;   // per layer-direction: 4H x TB, post-nonlinearity
  std::vector<MatrixXd> cell;    // per layer-direction: H x TB
  std::vector<MatrixXd> hidden;  // per layer-direction: H x TB
};

inline auto frame(MatrixXd& m, int t, int b) { return m.middleCols(t * b, b); }
inline auto frame(const MatrixXd& m, int t, int b) { return m.middleCols(t * b, b); }

void forward_batch(const NetworkParams& p, const NetworkSpec& spec, const MatrixXd& x,
                   bool training, std::mt19937_64* rng, BatchCache& cache) {
  const int h = spec.hidden_width;
  const int dirs = spec.directions();
  const int tb = static_cast<int>(x.cols());
  const int b = cache.batch;
  const int t_len = cache.t_len;

  cache.x_drop = x;
  if (training && spec.input_dropout > 0) {
    std::bernoulli_distribution keep(1.0 - spec.input_dropout);
    const double scale = 1.0 / (1.0 - spec.input_dropout);
    for (Eigen::Index j = 0; j < cache.x_drop.cols(); ++j)
      for (Eigen::Index i = 0; i < cache.x_drop.rows(); ++i)
        cache.x_drop(i, j) = keep(*rng) ? cache.x_drop(i, j) * scale : 0.0;
  }

  cache.relu_out.noalias() = p.in_w * cache.x_drop;
  cache.relu_out.colwise() += p.in_b;
  cache.relu_out = cache.relu_out.cwiseMax(0.0);

  cache.gates.resize(kLstmLayers * dirs);
  cache.cell.resize(kLstmLayers * dirs);
  cache.hidden.resize(kLstmLayers * dirs);
  cache.l1_in.resize(dirs * h, tb);
  cache.out_in.resize(dirs * h, tb);

  MatrixXd h_prev(h, b), c_prev(h, b);
  for (int layer = 0; layer < kLstmLayers; ++layer) {
    const MatrixXd& input = layer == 0 ? cache.relu_out : cache.l1_in;
    for (int d = 0; d < dirs; ++d) {
      const int idx = layer * dirs + d;
      const LstmLayerParams& l = p.lstm[idx];
      MatrixXd& gates = cache.gates[idx];
      MatrixXd& cell = cache.cell[idx];
      MatrixXd& hidden = cache.hidden[idx];
      gates.noalias() = l.w_x * input;  // whole-sequence product, one pass
      gates.colwise() += l.bias;
      cell.resize(h, tb);
      hidden.resize(h, tb);
      h_prev.setZero();
      c_prev.setZero();
      for (int step = 0; step < t_len; ++step) {
        const int t = d == 0 ? step : t_len - 1 - step;
        auto z = frame(gates, t, b);
        z.noalias() += l.w_h * h_prev;
        auto zi = z.topRows(h);
        auto zf = z.middleRows(h, h);
        auto zg = z.middleRows(2 * h, h);
        auto zo = z.bottomRows(h);
        zi = (1.0 + (-zi.array()).exp()).inverse().matrix();
        zf = (1.0 + (-zf.array()).exp()).inverse().matrix();
        zg = zg.array().tanh().matrix();
        zo = (1.0 + (-zo.array()).exp()).inverse().matrix();
        auto ct = frame(cell, t, b);
        ct = zf.cwiseProduct(c_prev) + zi.cwiseProduct(zg);
        auto ht = frame(hidden, t, b);
        ht = zo.cwiseProduct(ct.array().tanh().matrix());
        h_prev = ht;
        c_prev = ct;
      }
      MatrixXd& sink = layer == 0 ? cache.l1_in : cache.out_in;
      sink.middleRows(d * h, h) = hidden;
    }
  }

  cache.y.noalias() = p.out_w * cache.out_in;
  cache.y.colwise() += p.out_b;
  if (spec.activation == OutputActivation::Sigmoid)
    cache.y = (1.0 + (-cache.y.array()).exp()).inverse().matrix();
}

void zero_like(const NetworkParams& p, NetworkGrads& g) {
  g.in_w = MatrixXd::Zero(p.in_w.rows(), p.in_w.cols());
  g.in_b = VectorXd::Zero(p.in_b.size());
  g.lstm.resize(p.lstm.size());
  for (std::size_t i = 0; i < p.lstm.size(); ++i) {
    g.lstm[i].w_x = MatrixXd::Zero(p.lstm[i].w_x.rows(), p.lstm[i].w_x.cols());
    g.lstm[i].w_h = MatrixXd::Zero(p.lstm[i].w_h.rows(), p.lstm[i].w_h.cols());
    g.lstm[i].bias = VectorXd::Zero(p.lstm[i].bias.size());
  }
  g.out_w = MatrixXd::Zero(p.out_w.rows(), p.out_w.cols());
  g.out_b = VectorXd::Zero(p.out_b.size());
}

// Backpropagation through the cached forward pass. d_y arrives as the
// gradient of the summed loss w.r.t. the post-activation outputs and is
// consumed in place. Parameter gradients accumulate into g.
void backward_batch(const NetworkParams& p, const NetworkSpec& spec,
                    const BatchCache& cache, MatrixXd& d_y, NetworkGrads& g) {
  const int h = spec.hidden_width;
  const int dirs = spec.directions();
  const int b = cache.batch;
  const int t_len = cache.t_len;
  const int tb = t_len * b;

  if (spec.activation == OutputActivation::Sigmoid)
    d_y.array() *= cache.y.array() * (1.0 - cache.y.array());

  g.out_w.noalias() += d_y * cache.out_in.transpose();
  g.out_b.noalias() += d_y.rowwise().sum();

  // Gradient w.r.t. the current layer's concatenated output, starting from
  // the output projection.
  MatrixXd d_upper = p.out_w.transpose() * d_y;

  MatrixXd d_z(4 * h, tb);
  MatrixXd dh(h, b), dcell(h, b), tanh_c(h, b), dh_carry(h, b), dc_carry(h, b);
  for (int layer = kLstmLayers - 1; layer >= 0; --layer) {
    const MatrixXd& input = layer == 0 ? cache.relu_out : cache.l1_in;
    MatrixXd d_input = MatrixXd::Zero(layer_input_width(spec, layer), tb);
    for (int d = 0; d < dirs; ++d) {
      const int idx = layer * dirs + d;
      const LstmLayerParams& l = p.lstm[idx];
      const MatrixXd& gates = cache.gates[idx];
      const MatrixXd& cell = cache.cell[idx];
      const MatrixXd& hidden = cache.hidden[idx];
      auto d_out = d_upper.middleRows(d * h, h);
      dh_carry.setZero();
      dc_carry.setZero();
      for (int step = t_len - 1; step >= 0; --step) {
        const int t = d == 0 ? step : t_len - 1 - step;
        const int t_prev = d == 0 ? t - 1 : t + 1;
        const bool first = step == 0;
        auto zi = frame(gates, t, b).topRows(h);
        auto zf = frame(gates, t, b).middleRows(h, h);
        auto zg = frame(gates, t, b).middleRows(2 * h, h);
        auto zo = frame(gates, t, b).bottomRows(h);
        dh = d_out.middleCols(t * b, b) + dh_carry;
        tanh_c = frame(cell, t, b).array().tanh().matrix();
        dcell = (dc_carry.array() +
                 dh.array() * zo.array() * (1.0 - tanh_c.array().square()))
                    .matrix();
        auto dzt = frame(d_z, t, b);
        // gate-input gradients, rows in gate order i, f, g, o
        dzt.topRows(h) =
            ((dcell.array() * zg.array()) * (zi.array() * (1.0 - zi.array()))).matrix();
        if (first)
          dzt.middleRows(h, h).setZero();  // cell state starts at zero
        else
          dzt.middleRows(h, h) = ((dcell.array() * frame(cell, t_prev, b).array()) *
                                  (zf.array() * (1.0 - zf.array())))
                                     .matrix();
        dzt.middleRows(2 * h, h) =
            ((dcell.array() * zi.array()) * (1.0 - zg.array().square())).matrix();
        dzt.bottomRows(h) =
            ((dh.array() * tanh_c.array()) * (zo.array() * (1.0 - zo.array()))).matrix();
        if (!first)
          g.lstm[idx].w_h.noalias() += dzt * frame(hidden, t_prev, b).transpose();
        dh_carry.noalias() = l.w_h.transpose() * dzt;
        dc_carry = dcell.cwiseProduct(zf);
      }
      g.lstm[idx].w_x.noalias() += d_z * input.transpose();
      g.lstm[idx].bias.noalias() += d_z.rowwise().sum();
      d_input.noalias() += l.w_x.transpose() * d_z;
    }
    if (layer == 1) {
      d_upper = std::move(d_input);
    } else {
      MatrixXd d_relu = d_input.cwiseProduct(
          (cache.relu_out.array() > 0.0).cast<double>().matrix());
      g.in_w.noalias() += d_relu * cache.x_drop.transpose();
      g.in_b.noalias() += d_relu.rowwise().sum();
    }
  }
}

// ---- losses on packed batches ----------------------------------------------

constexpr double kBceEps = 1e-7;

// Returns the summed loss over all windows; fills d_y (same shape as y) with
// the gradient of that sum.
double batch_loss_and_grad(LossKind kind, const MatrixXd& y, const MatrixXd& target,
                           int t_len, int b, MatrixXd& d_y) {
  d_y.resize(y.rows(), y.cols());
  switch (kind) {
    case LossKind::Mse:
    case LossKind::VelocityL2: {
      d_y = 2.0 * (y - target);
      return 0.25 * d_y.squaredNorm();
    }
    case LossKind::Contact: {
      double loss = 0;
      for (Eigen::Index j = 0; j < y.cols(); ++j)
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
          const double raw = y(i, j);
          const double prob = std::clamp(raw, kBceEps, 1.0 - kBceEps);
          const double t = target(i, j);
          loss += -(t * std::log(prob) + (1.0 - t) * std::log1p(-prob));
          d_y(i, j) = (raw > kBceEps && raw < 1.0 - kBceEps)
                          ? (prob - t) / (prob * (1.0 - prob))
                          : 0.0;
        }
      return loss;
    }
    case LossKind::Velocity: {
      d_y.setZero();
      const MatrixXd diff = y - target;
      double loss = 0;
      MatrixXd acc(y.rows(), b);
      for (int n : {1, 3, 9, 27}) {
        const int windows = t_len / n;  // complete windows only
        for (int m = 0; m < windows; ++m) {
          acc.setZero();
          for (int t = m * n; t < (m + 1) * n; ++t) acc += frame(diff, t, b);
          loss += acc.squaredNorm();
          for (int t = m * n; t < (m + 1) * n; ++t) frame(d_y, t, b) += 2.0 * acc;
        }
      }
      return loss;
    }
  }
  throw SpecMismatch("unknown loss kind");
}

MatrixXd pack_frames(const std::vector<const std::vector<VectorXd>*>& seqs, int t_len,
                     int width, const char* what) {
  const int b = static_cast<int>(seqs.size());
  MatrixXd out(width, static_cast<Eigen::Index>(t_len) * b);
  for (int w = 0; w < b; ++w) {
    const std::vector<VectorXd>& seq = *seqs[w];
    for (int t = 0; t < t_len; ++t) {
      if (seq[t].size() != width)
        throw DimensionMismatch(std::string(what) + ": frame width " +
                                std::to_string(seq[t].size()) + ", expected " +
                                std::to_string(width));
      out.col(static_cast<Eigen::Index>(t) * b + w) = seq[t];
    }
  }
  return out;
}

// Forward+backward over equal-length windows; returns summed window losses,
// accumulates unscaled gradients when g != nullptr.
double equal_length_pass(const NetworkParams& p, const NetworkSpec& spec,
                         const std::vector<const TrainingWindow*>& windows, LossKind kind,
                         bool training, std::mt19937_64* rng, NetworkGrads* g) {
  const int t_len = static_cast<int>(windows.front()->inputs.size());
  const int b = static_cast<int>(windows.size());
  std::vector<const std::vector<VectorXd>*> ins, targs;
  for (const TrainingWindow* w : windows) {
    ins.push_back(&w->inputs);
    targs.push_back(&w->targets);
  }
  MatrixXd x = pack_frames(ins, t_len, spec.input_width, "inputs");
  MatrixXd target = pack_frames(targs, t_len, spec.output_width, "targets");
  BatchCache cache;
  cache.t_len = t_len;
  cache.batch = b;
  forward_batch(p, spec, x, training, rng, cache);
  MatrixXd d_y;
  double loss = batch_loss_and_grad(kind, cache.y, target, t_len, b, d_y);
  if (g) backward_batch(p, spec, cache, d_y, *g);
  return loss;
}

// Groups windows by length (clips vary) and runs passes of at most
// micro_batch windows each. Returns the summed loss.
double dataset_pass(const NetworkParams& p, const NetworkSpec& spec,
                    const std::vector<const TrainingWindow*>& windows, LossKind kind,
                    bool training, std::mt19937_64* rng, NetworkGrads* g, int micro_batch) {
  std::map<int, std::vector<const TrainingWindow*>> by_len;
  for (const TrainingWindow* w : windows) {
    if (w->inputs.empty()) throw EmptyInput("training window with no frames");
    if (w->inputs.size() != w->targets.size())
      throw LengthMismatch("window inputs/targets lengths differ");
    by_len[static_cast<int>(w->inputs.size())].push_back(w);
  }
  double loss = 0;
  for (auto& [len, group] : by_len) {
    (void)len;
    for (std::size_t at = 0; at < group.size(); at += micro_batch) {
      const std::size_t end = std::min(group.size(), at + static_cast<std::size_t>(micro_batch));
      std::vector<const TrainingWindow*> chunk(group.begin() + at, group.begin() + end);
      loss += equal_length_pass(p, spec, chunk, kind, training, rng, g);
    }
  }
  return loss;
}

template <class F>
void for_each_tensor(NetworkGrads& g, F&& f) {
  f(g.in_w);
  f(g.in_b);
  for (LstmLayerParams& l : g.lstm) {
    f(l.w_x);
    f(l.w_h);
    f(l.bias);
  }
  f(g.out_w);
  f(g.out_b);
}

}  // namespace

std::vector<VectorXd> forward_window(const NetworkParams& p, const NetworkSpec& spec,
                                     const std::vector<VectorXd>& inputs, bool training,
                                     std::uint64_t seed) {
  validate_shapes(p, spec);
  if (inputs.empty()) throw EmptyInput("forward_window: no frames");
  const int t_len = static_cast<int>(inputs.size());
  std::vector<const std::vector<VectorXd>*> seqs = {&inputs};
  MatrixXd x = pack_frames(seqs, t_len, spec.input_width, "inputs");
  BatchCache cache;
  cache.t_len = t_len;
  cache.batch = 1;
  std::mt19937_64 rng(seed);
  forward_batch(p, spec, x, training, &rng, cache);
  std::vector<VectorXd> out(t_len);
  for (int t = 0; t < t_len; ++t) out[t] = cache.y.col(t);
  return out;
}

void StreamState::reset() {
  for (VectorXd& v : h) v.setZero();
  for (VectorXd& v : c) v.setZero();
}

StreamState make_stream_state(const NetworkSpec& spec) {
  StreamState s;
  s.h.assign(kLstmLayers, VectorXd::Zero(spec.hidden_width));
  s.c.assign(kLstmLayers, VectorXd::Zero(spec.hidden_width));
  return s;
}

VectorXd stream_step(const NetworkParams& p, const NetworkSpec& spec, StreamState& state,
                     const VectorXd& input) {
  if (spec.bidirectional)
    throw SpecMismatch("stream_step: spec is bidirectional; streaming needs a causal net");
  validate_shapes(p, spec);
  if (input.size() != spec.input_width)
    throw DimensionMismatch("stream_step: input width " + std::to_string(input.size()) +
                            ", expected " + std::to_string(spec.input_width));
  const int h = spec.hidden_width;
  VectorXd act = p.in_w * input + p.in_b;
  act = act.cwiseMax(0.0);
  for (int layer = 0; layer < kLstmLayers; ++layer) {
    const LstmLayerParams& l = p.lstm[layer];
    VectorXd z = l.w_x * act + l.w_h * state.h[layer] + l.bias;
    auto zi = z.head(h);
    auto zf = z.segment(h, h);
    auto zg = z.segment(2 * h, h);
    auto zo = z.tail(h);
    zi = (1.0 + (-zi.array()).exp()).inverse().matrix();
    zf = (1.0 + (-zf.array()).exp()).inverse().matrix();
    zg = zg.array().tanh().matrix();
    zo = (1.0 + (-zo.array()).exp()).inverse().matrix();
    state.c[layer] = zf.cwiseProduct(state.c[layer]) + zi.cwiseProduct(zg);
    state.h[layer] = zo.cwiseProduct(state.c[layer].array().tanh().matrix());
    act = state.h[layer];
  }
  VectorXd y = p.out_w * act + p.out_b;
  if (spec.activation == OutputActivation::Sigmoid)
    y = (1.0 + (-y.array()).exp()).inverse().matrix();
  return y;
}

namespace {

MatrixXd pack_single(const std::vector<VectorXd>& seq, const char* what) {
  if (seq.empty()) throw EmptyInput(std::string(what) + ": empty sequence");
  MatrixXd out(seq[0].size(), static_cast<Eigen::Index>(seq.size()));
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (seq[t].size() != out.rows())
      throw DimensionMismatch(std::string(what) + ": ragged sequence");
    out.col(static_cast<Eigen::Index>(t)) = seq[t];
  }
  return out;
}

double public_loss(LossKind kind, const std::vector<VectorXd>& pred,
                   const std::vector<VectorXd>& target) {
  if (pred.size() != target.size()) throw LengthMismatch("loss: pred/target lengths differ");
  MatrixXd y = pack_single(pred, "pred");
  MatrixXd t = pack_single(target, "target");
  if (y.rows() != t.rows()) throw DimensionMismatch("loss: pred/target widths differ");
  MatrixXd d_y;
  return batch_loss_and_grad(kind, y, t, static_cast<int>(pred.size()), 1, d_y);
}

}  // namespace

double loss_mse(const std::vector<VectorXd>& pred, const std::vector<VectorXd>& target) {
  return public_loss(LossKind::Mse, pred, target);
}

double loss_contact(const std::vector<VectorXd>& pred, const std::vector<VectorXd>& target) {
  return public_loss(LossKind::Contact, pred, target);
}

double loss_velocity(const std::vector<VectorXd>& pred, const std::vector<VectorXd>& target) {
  return public_loss(LossKind::Velocity, pred, target);
}

double loss_velocity_l2(const std::vector<VectorXd>& pred,
                        const std::vector<VectorXd>& target) {
  return public_loss(LossKind::VelocityL2, pred, target);
}

double compute_loss(LossKind kind, const std::vector<VectorXd>& pred,
                    const std::vector<VectorXd>& target) {
  return public_loss(kind, pred, target);
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "mse") return LossKind::Mse;
  if (name == "contact") return LossKind::Contact;
  if (name == "velocity") return LossKind::Velocity;
  if (name == "velocity-l2") return LossKind::VelocityL2;
  throw ParseError("unknown loss kind: " + name);
}

std::string loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::Mse: return "mse";
    case LossKind::Contact: return "contact";
    case LossKind::Velocity: return "velocity";
    case LossKind::VelocityL2: return "velocity-l2";
  }
  return "?";
}

void TrainingConfig::validate() const {
  if (learning_rate <= 0 || batch_size <= 0 || epochs <= 0 || micro_batch <= 0 ||
      beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1 || epsilon <= 0 ||
      grad_clip_norm <= 0)
    throw SpecMismatch("training config: all values must be positive (betas in (0,1))");
}

std::pair<double, NetworkGrads> loss_and_gradients(
    const NetworkParams& params, const NetworkSpec& spec,
    const std::vector<const TrainingWindow*>& windows, LossKind loss) {
  validate_shapes(params, spec);
  if (windows.empty()) throw EmptyInput("loss_and_gradients: no windows");
  NetworkGrads g;
  zero_like(params, g);
  double sum = dataset_pass(params, spec, windows, loss, false, nullptr, &g, 16);
  const double inv = 1.0 / static_cast<double>(windows.size());
  for_each_tensor(g, [inv](auto& t) { t *= inv; });
  return {sum * inv, std::move(g)};
}

TrainReport train(NetworkParams& params, const NetworkSpec& spec,
                  const std::vector<TrainingWindow>& dataset, LossKind loss,
                  const TrainingConfig& config, const std::function<bool(int, double)>& stop) {
  config.validate();
  validate_shapes(params, spec);
  if (dataset.empty()) throw EmptyInput("train: empty dataset");

  std::mt19937_64 rng(config.seed);
  NetworkGrads g, m, v;
  zero_like(params, g);
  zero_like(params, m);
  zero_like(params, v);
  std::vector<int> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  TrainReport report;
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss_sum = 0;
    for (std::size_t at = 0; at < order.size(); at += config.batch_size) {
      const std::size_t end =
          std::min(order.size(), at + static_cast<std::size_t>(config.batch_size));
      std::vector<const TrainingWindow*> batch;
      for (std::size_t i = at; i < end; ++i) batch.push_back(&dataset[order[i]]);

      for_each_tensor(g, [](auto& t) { t.setZero(); });
      double batch_sum =
          dataset_pass(params, spec, batch, loss, true, &rng, &g, config.micro_batch);
      if (!std::isfinite(batch_sum))
        throw NonFiniteLoss("train: non-finite loss at epoch " + std::to_string(epoch) +
                            ", window offset " + std::to_string(at));
      epoch_loss_sum += batch_sum;
      const double inv = 1.0 / static_cast<double>(batch.size());
      for_each_tensor(g, [inv](auto& t) { t *= inv; });

      double sq = 0;
      for_each_tensor(g, [&sq](auto& t) { sq += t.squaredNorm(); });
      if (sq > config.grad_clip_norm * config.grad_clip_norm) {
        const double scale = config.grad_clip_norm / std::sqrt(sq);
        for_each_tensor(g, [scale](auto& t) { t *= scale; });
      }

      ++step;
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      auto adam = [&](auto& pt, auto& gt, auto& mt, auto& vt) {
        mt = config.beta1 * mt + (1.0 - config.beta1) * gt;
        vt = (config.beta2 * vt.array() + (1.0 - config.beta2) * gt.array().square())
                 .matrix();
        pt.array() -= config.learning_rate * (mt.array() / bc1) /
                      ((vt.array() / bc2).sqrt() + config.epsilon);
      };
      adam(params.in_w, g.in_w, m.in_w, v.in_w);
      adam(params.in_b, g.in_b, m.in_b, v.in_b);
      for (std::size_t i = 0; i < params.lstm.size(); ++i) {
        adam(params.lstm[i].w_x, g.lstm[i].w_x, m.lstm[i].w_x, v.lstm[i].w_x);
        adam(params.lstm[i].w_h, g.lstm[i].w_h, m.lstm[i].w_h, v.lstm[i].w_h);
        adam(params.lstm[i].bias, g.lstm[i].bias, m.lstm[i].bias, v.lstm[i].bias);
      }
      adam(params.out_w, g.out_w, m.out_w, v.out_w);
      adam(params.out_b, g.out_b, m.out_b, v.out_b);
    }
    const double epoch_loss = epoch_loss_sum / static_cast<double>(dataset.size());
    report.epoch_loss.push_back(epoch_loss);
    if (stop && stop(epoch, epoch_loss)) break;
  }
  return report;
}

// ---- weights file -----------------------------------------------------------

namespace {

json tensor_entry(const std::string& name, const MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"name", name}, {"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
}

json tensor_entry(const std::string& name, const VectorXd& v) {
  json data = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) data.push_back(v[i]);
  return {{"name", name}, {"shape", {v.size()}}, {"data", std::move(data)}};
}

std::string dir_name(const NetworkSpec& spec, int idx) {
  const int layer = idx / spec.directions();
  const int d = idx % spec.directions();
  return "lstm" + std::to_string(layer) + (d == 0 ? ".fwd" : ".bwd");
}

}  // namespace

void save_weights_json(const std::string& path, const NetworkParams& params,
                       const NetworkSpec& spec, const std::map<std::string, std::string>& meta) {
  validate_shapes(params, spec);
  json tensors = json::array();
  tensors.push_back(tensor_entry("in.w", params.in_w));
  tensors.push_back(tensor_entry("in.b", params.in_b));
  for (std::size_t i = 0; i < params.lstm.size(); ++i) {
    const std::string base = dir_name(spec, static_cast<int>(i));
    tensors.push_back(tensor_entry(base + ".w_x", params.lstm[i].w_x));
    tensors.push_back(tensor_entry(base + ".w_h", params.lstm[i].w_h));
    tensors.push_back(tensor_entry(base + ".b", params.lstm[i].bias));
  }
  tensors.push_back(tensor_entry("out.w", params.out_w));
  tensors.push_back(tensor_entry("out.b", params.out_b));
  json doc = {
      {"format", "imocap-weights"},
      {"version", 1},
      {"spec",
       {{"input", spec.input_width},
        {"hidden", spec.hidden_width},
        {"output", spec.output_width},
        {"activation", spec.activation == OutputActivation::Sigmoid ? "sigmoid" : "none"},
        {"bidirectional", spec.bidirectional},
        {"inputDropout", spec.input_dropout}}},
      {"meta", meta},
      {"tensors", std::move(tensors)}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write weights file: " + path);
  out << doc.dump() << "\n";
  if (!out) throw IoError("short write: " + path);
}

LoadedNetwork load_weights_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open weights file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  json doc;
  try {
    doc = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw ParseError(std::string("weights json: ") + e.what());
  }
  try {
    if (doc.value("format", "") != "imocap-weights")
      throw ParseError("weights json: not a weights file");
    LoadedNetwork net;
    const json& s = doc.at("spec");
    net.spec.input_width = s.at("input").get<int>();
    net.spec.hidden_width = s.at("hidden").get<int>();
    net.spec.output_width = s.at("output").get<int>();
    net.spec.activation = s.at("activation").get<std::string>() == "sigmoid"
                              ? OutputActivation::Sigmoid
                              : OutputActivation::None;
    net.spec.bidirectional = s.at("bidirectional").get<bool>();
    net.spec.input_dropout = s.value("inputDropout", 0.2);
    if (doc.contains("meta"))
      for (auto& [k, val] : doc.at("meta").items()) net.meta[k] = val.get<std::string>();

    net.params = zero_params(net.spec);
    std::map<std::string, const json*> by_name;
    for (const json& t : doc.at("tensors")) by_name[t.at("name").get<std::string>()] = &t;
    auto tensor = [&](const std::string& name) -> const json& {
      auto it = by_name.find(name);
      if (it == by_name.end()) throw ParseError("weights json: missing tensor " + name);
      return *it->second;
    };
    auto load_mat = [&](const std::string& name, MatrixXd& m) {
      const json& t = tensor(name);
      const json& shape = t.at("shape");
      if (shape.size() != 2 || shape.at(0).get<Eigen::Index>() != m.rows() ||
          shape.at(1).get<Eigen::Index>() != m.cols())
        throw SpecMismatch("weights json: bad shape for " + name);
      const json& data = t.at("data");
      if (static_cast<Eigen::Index>(data.size()) != m.size())
        throw SpecMismatch("weights json: bad data length for " + name);
      std::size_t k = 0;
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = data.at(k++).get<double>();
    };
    auto load_vec = [&](const std::string& name, VectorXd& v) {
      const json& t = tensor(name);
      const json& shape = t.at("shape");
      if (shape.size() != 1 || shape.at(0).get<Eigen::Index>() != v.size())
        throw SpecMismatch("weights json: bad shape for " + name);
      const json& data = t.at("data");
      if (static_cast<Eigen::Index>(data.size()) != v.size())
        throw SpecMismatch("weights json: bad data length for " + name);
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = data.at(i).get<double>();
    };
    load_mat("in.w", net.params.in_w);
    load_vec("in.b", net.params.in_b);
    for (std::size_t i = 0; i < net.params.lstm.size(); ++i) {
      const std::string base = dir_name(net.spec, static_cast<int>(i));
      load_mat(base + ".w_x", net.params.lstm[i].w_x);
      load_mat(base + ".w_h", net.params.lstm[i].w_h);
      load_vec(base + ".b", net.params.lstm[i].bias);
    }
    load_mat("out.w", net.params.out_w);
    load_vec("out.b", net.params.out_b);
    return net;
  } catch (const json::exception& e) {
    throw ParseError(std::string("weights json: ") + e.what());
  }
}

}  // namespace imocap
