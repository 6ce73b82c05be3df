#include <doctest.h>

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

#include "imocap/errors.hpp"
#include "imocap/nets.hpp"

using namespace imocap;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

NetworkSpec small_spec(int in, int hidden, int out, OutputActivation act, bool bi) {
  NetworkSpec s;
  s.input_width = in;
  s.hidden_width = hidden;
  s.output_width = out;
  s.activation = act;
  s.bidirectional = bi;
  return s;
}

std::vector<VectorXd> random_frames(int t_len, int width, std::mt19937_64& rng,
                                    double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<VectorXd> frames(t_len);
  for (VectorXd& f : frames) {
    f.resize(width);
    for (int i = 0; i < width; ++i) f[i] = u(rng);
  }
  return frames;
}

// ---- plain-double reference net (scalar widths only) --------------------

struct ScalarGates {
  std::array<double, 4> w_x, w_h, b;  // gate order: input, forget, cell, output
};

double sigmoid_ref(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<double> scalar_lstm(const ScalarGates& p, const std::vector<double>& xs) {
  double h = 0.0, c = 0.0;
  std::vector<double> out;
  for (double x : xs) {
    const double i = sigmoid_ref(p.w_x[0] * x + p.w_h[0] * h + p.b[0]);
    const double f = sigmoid_ref(p.w_x[1] * x + p.w_h[1] * h + p.b[1]);
    const double g = std::tanh(p.w_x[2] * x + p.w_h[2] * h + p.b[2]);
    const double o = sigmoid_ref(p.w_x[3] * x + p.w_h[3] * h + p.b[3]);
    c = f * c + i * g;
    h = o * std::tanh(c);
    out.push_back(h);
  }
  return out;
}

struct ScalarNet {
  double in_w, in_b;
  ScalarGates l0, l1;
  double out_w, out_b;
};

std::vector<double> scalar_forward(const ScalarNet& net, const std::vector<double>& xs) {
  std::vector<double> a;
  for (double x : xs) a.push_back(std::max(0.0, net.in_w * x + net.in_b));
  std::vector<double> h1 = scalar_lstm(net.l1, scalar_lstm(net.l0, a));
  std::vector<double> y;
  for (double h : h1) y.push_back(net.out_w * h + net.out_b);
  return y;
}

NetworkParams pack_scalar(const ScalarNet& net) {
  NetworkParams p;
  p.in_w = MatrixXd::Constant(1, 1, net.in_w);
  p.in_b = VectorXd::Constant(1, net.in_b);
  p.lstm.resize(2);
  for (int layer = 0; layer < 2; ++layer) {
    const ScalarGates& g = layer == 0 ? net.l0 : net.l1;
    LstmLayerParams& lp = p.lstm[layer];
    lp.w_x.resize(4, 1);
    lp.w_h.resize(4, 1);
    lp.bias.resize(4);
    for (int r = 0; r < 4; ++r) {
      lp.w_x(r, 0) = g.w_x[r];
      lp.w_h(r, 0) = g.w_h[r];
      lp.bias[r] = g.b[r];
    }
  }
  p.out_w = MatrixXd::Constant(1, 1, net.out_w);
  p.out_b = VectorXd::Constant(1, net.out_b);
  return p;
}

// brute-force multi-scale velocity loss, written independently of the library
double velocity_oracle(const std::vector<VectorXd>& pred,
                       const std::vector<VectorXd>& target) {
  const int t_len = static_cast<int>(pred.size());
  double total = 0.0;
  for (int n : {1, 3, 9, 27}) {
    for (int w = 0; w + 1 <= t_len / n; ++w) {
      VectorXd acc = VectorXd::Zero(pred[0].size());
      for (int t = w * n; t < (w + 1) * n; ++t) acc += pred[t] - target[t];
      total += acc.squaredNorm();
    }
  }
  return total;
}

}  // namespace

TEST_CASE("canonical specs") {
  NetworkSpec s1 = pose_s1_spec();
  CHECK(s1.input_width == 72);
  CHECK(s1.hidden_width == 256);
  CHECK(s1.output_width == 15);
  CHECK(s1.activation == OutputActivation::None);
  CHECK(s1.bidirectional);
  CHECK(s1.input_dropout == 0.2);

  NetworkSpec s2 = pose_s2_spec();
  CHECK(s2.input_width == 87);
  CHECK(s2.hidden_width == 64);
  CHECK(s2.output_width == 69);

  NetworkSpec s3 = pose_s3_spec();
  CHECK(s3.input_width == 141);
  CHECK(s3.hidden_width == 128);
  CHECK(s3.output_width == 90);

  NetworkSpec b1 = trans_b1_spec();
  CHECK(b1.input_width == 87);
  CHECK(b1.hidden_width == 64);
  CHECK(b1.output_width == 2);
  CHECK(b1.activation == OutputActivation::Sigmoid);
  CHECK(b1.bidirectional);

  NetworkSpec b2 = trans_b2_spec();
  CHECK(b2.input_width == 141);
  CHECK(b2.hidden_width == 256);
  CHECK(b2.output_width == 3);
  CHECK(!b2.bidirectional);

  NetworkSpec bad = small_spec(0, 4, 2, OutputActivation::None, true);
  CHECK_THROWS_AS(bad.validate(), SpecMismatch);
  bad = small_spec(3, 4, 2, OutputActivation::None, true);
  bad.input_dropout = 1.0;
  CHECK_THROWS_AS(bad.validate(), SpecMismatch);
}

TEST_CASE("zero weights pass the output bias through") {
  std::mt19937_64 rng(51);
  NetworkSpec spec = small_spec(3, 4, 2, OutputActivation::None, true);
  NetworkParams params = zero_params(spec);
  params.out_b << 0.3, -0.7;
  std::vector<VectorXd> out = forward_window(params, spec, random_frames(6, 3, rng));
  for (const VectorXd& y : out) CHECK((y - params.out_b).norm() == 0.0);

  NetworkSpec sig_spec = small_spec(3, 4, 2, OutputActivation::Sigmoid, false);
  NetworkParams sig_params = zero_params(sig_spec);
  for (const VectorXd& y : forward_window(sig_params, sig_spec, random_frames(6, 3, rng)))
    for (int i = 0; i < 2; ++i) CHECK(y[i] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("pinned scalar network values") {
  ScalarNet net;
  net.in_w = 0.5;
  net.in_b = 0.1;
  net.l0 = {{0.3, -0.2, 0.8, 0.5}, {0.1, 0.2, -0.1, 0.3}, {0.05, 1.0, -0.1, 0.2}};
  net.l1 = {{0.4, 0.1, -0.6, 0.9}, {-0.3, 0.5, 0.2, 0.1}, {-0.2, 0.7, 0.3, -0.4}};
  net.out_w = 1.25;
  net.out_b = 0.05;

  NetworkSpec spec = small_spec(1, 1, 1, OutputActivation::None, false);
  NetworkParams params = pack_scalar(net);
  CHECK_NOTHROW(validate_shapes(params, spec));

  std::vector<VectorXd> inputs = {VectorXd::Constant(1, 1.0), VectorXd::Constant(1, -0.5)};
  std::vector<VectorXd> out = forward_window(params, spec, inputs);
  REQUIRE(out.size() == 2);
  CHECK(out[0][0] == doctest::Approx(0.10473660540843775).epsilon(1e-13));
  CHECK(out[1][0] == doctest::Approx(0.14790119542856275).epsilon(1e-13));

  // the reference implementation agrees with the pinned values too
  std::vector<double> ref = scalar_forward(net, {1.0, -0.5});
  CHECK(ref[0] == doctest::Approx(0.10473660540843775).epsilon(1e-15));
  CHECK(ref[1] == doctest::Approx(0.14790119542856275).epsilon(1e-15));
}

TEST_CASE("matrix engine matches the plain-double reference") {
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  NetworkSpec spec = small_spec(1, 1, 1, OutputActivation::None, false);
  for (int trial = 0; trial < 5; ++trial) {
    ScalarNet net;
    net.in_w = u(rng);
    net.in_b = u(rng);
    for (ScalarGates* g : {&net.l0, &net.l1})
      for (int r = 0; r < 4; ++r) {
        g->w_x[r] = u(rng);
        g->w_h[r] = u(rng);
        g->b[r] = u(rng);
      }
    net.out_w = u(rng);
    net.out_b = u(rng);

    std::vector<double> xs(10);
    for (double& x : xs) x = u(rng);
    std::vector<VectorXd> inputs;
    for (double x : xs) inputs.push_back(VectorXd::Constant(1, x));

    std::vector<VectorXd> out = forward_window(pack_scalar(net), spec, inputs);
    std::vector<double> ref = scalar_forward(net, xs);
    for (int t = 0; t < 10; ++t) CHECK(out[t][0] == doctest::Approx(ref[t]).epsilon(1e-12));
  }
}

TEST_CASE("inference is deterministic, dropout is seeded") {
  std::mt19937_64 rng(53);
  NetworkSpec spec = small_spec(5, 8, 3, OutputActivation::None, true);
  NetworkParams params = init_params(spec, 11);
  std::vector<VectorXd> inputs = random_frames(20, 5, rng);

  std::vector<VectorXd> a = forward_window(params, spec, inputs);
  std::vector<VectorXd> b = forward_window(params, spec, inputs, false, 999);
  for (int t = 0; t < 20; ++t) CHECK((a[t] - b[t]).norm() == 0.0);  // seed unused

  std::vector<VectorXd> d1 = forward_window(params, spec, inputs, true, 7);
  std::vector<VectorXd> d2 = forward_window(params, spec, inputs, true, 7);
  std::vector<VectorXd> d3 = forward_window(params, spec, inputs, true, 8);
  double same = 0, diff = 0, vs_clean = 0;
  for (int t = 0; t < 20; ++t) {
    same += (d1[t] - d2[t]).norm();
    diff += (d1[t] - d3[t]).norm();
    vs_clean += (d1[t] - a[t]).norm();
  }
  CHECK(same == 0.0);
  CHECK(diff > 0.0);
  CHECK(vs_clean > 0.0);
}

TEST_CASE("streaming equals whole-window inference") {
  std::mt19937_64 rng(54);
  NetworkSpec spec = small_spec(4, 8, 2, OutputActivation::Sigmoid, false);
  NetworkParams params = init_params(spec, 12);
  std::vector<VectorXd> inputs = random_frames(50, 4, rng);
  std::vector<VectorXd> whole = forward_window(params, spec, inputs);

  StreamState state = make_stream_state(spec);
  REQUIRE(state.h.size() == 2);
  CHECK(state.h[0].size() == 8);
  for (int t = 0; t < 50; ++t) {
    VectorXd y = stream_step(params, spec, state, inputs[t]);
    CHECK((y - whole[t]).norm() < 1e-12);
  }
  state.reset();
  for (int t = 0; t < 50; ++t) {
    VectorXd y = stream_step(params, spec, state, inputs[t]);
    CHECK((y - whole[t]).norm() < 1e-12);
  }

  NetworkSpec bi = small_spec(4, 8, 2, OutputActivation::None, true);
  NetworkParams bi_params = init_params(bi, 12);
  StreamState bi_state = make_stream_state(spec);
  CHECK_THROWS_AS(stream_step(bi_params, bi, bi_state, inputs[0]), SpecMismatch);
}

TEST_CASE("time reversal maps onto direction-swapped weights") {
  // Swapping forward/backward weight blocks and reversing the input must
  // reverse the output; this pins down the direction plumbing end to end.
  std::mt19937_64 rng(55);
  const int h = 4;
  NetworkSpec spec = small_spec(3, h, 2, OutputActivation::None, true);
  NetworkParams params = init_params(spec, 13);
  std::vector<VectorXd> inputs = random_frames(12, 3, rng);
  std::vector<VectorXd> out = forward_window(params, spec, inputs);

  NetworkParams swapped = params;
  swapped.lstm[0] = params.lstm[1];
  swapped.lstm[1] = params.lstm[0];
  swapped.lstm[2] = params.lstm[3];
  swapped.lstm[3] = params.lstm[2];
  for (int k : {2, 3}) {  // layer 1 consumes [fwd; bwd], so its columns swap too
    MatrixXd wx = swapped.lstm[k].w_x;
    swapped.lstm[k].w_x.leftCols(h) = wx.rightCols(h);
    swapped.lstm[k].w_x.rightCols(h) = wx.leftCols(h);
  }
  MatrixXd ow = params.out_w;
  swapped.out_w.leftCols(h) = ow.rightCols(h);
  swapped.out_w.rightCols(h) = ow.leftCols(h);

  std::vector<VectorXd> reversed(inputs.rbegin(), inputs.rend());
  std::vector<VectorXd> back = forward_window(swapped, spec, reversed);
  for (int t = 0; t < 12; ++t) CHECK((back[t] - out[11 - t]).norm() < 1e-12);
}

TEST_CASE("loss values") {
  SUBCASE("sum of squares") {
    std::vector<VectorXd> pred(2, VectorXd(2)), target(2, VectorXd(2));
    pred[0] << 1, 2;
    pred[1] << 3, 4;
    target[0] << 0, 2;
    target[1] << 1, 1;
    CHECK(loss_mse(pred, target) == doctest::Approx(14.0).epsilon(1e-14));
    CHECK(loss_velocity_l2(pred, target) == doctest::Approx(14.0).epsilon(1e-14));
  }
  SUBCASE("coin-flip prediction costs 2 ln 2") {
    std::vector<VectorXd> pred(1, VectorXd(2)), target(1, VectorXd(2));
    pred[0] << 0.5, 0.5;
    target[0] << 1, 0;
    CHECK(loss_contact(pred, target) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("confidently wrong saturates at the clamp") {
    std::vector<VectorXd> pred(1, VectorXd(2)), target(1, VectorXd(2));
    pred[0] << 0.0, 1.0;
    target[0] << 1, 0;
    CHECK(loss_contact(pred, target) ==
          doctest::Approx(-2 * std::log(1e-7)).epsilon(1e-9));
  }
  SUBCASE("constant error accumulates across window sizes") {
    VectorXd d(3);
    d << 0.1, -0.2, 0.3;
    std::vector<VectorXd> pred(27, d), target(27, VectorXd::Zero(3));
    // m windows of size n each contribute n^2 |d|^2: (27+81+243+729)|d|^2
    CHECK(loss_velocity(pred, target) ==
          doctest::Approx(1080 * d.squaredNorm()).epsilon(1e-12));
  }
  SUBCASE("velocity loss matches brute force with ragged tails") {
    std::mt19937_64 rng(56);
    for (int t_len : {3, 20, 28}) {
      std::vector<VectorXd> pred = random_frames(t_len, 3, rng);
      std::vector<VectorXd> target = random_frames(t_len, 3, rng);
      CHECK(loss_velocity(pred, target) ==
            doctest::Approx(velocity_oracle(pred, target)).epsilon(1e-12));
    }
  }
  SUBCASE("dispatch and names") {
    for (LossKind kind : {LossKind::Mse, LossKind::Contact, LossKind::Velocity,
                          LossKind::VelocityL2})
      CHECK(loss_kind_from_name(loss_kind_name(kind)) == kind);
    CHECK_THROWS_AS(loss_kind_from_name("nope"), ParseError);
    std::mt19937_64 rng(57);
    std::vector<VectorXd> pred = random_frames(6, 2, rng);
    std::vector<VectorXd> target = random_frames(6, 2, rng);
    CHECK(compute_loss(LossKind::Mse, pred, target) == loss_mse(pred, target));
  }
  SUBCASE("shape errors") {
    std::mt19937_64 rng(58);
    std::vector<VectorXd> pred = random_frames(3, 2, rng);
    std::vector<VectorXd> target = random_frames(4, 2, rng);
    CHECK_THROWS_AS(loss_mse(pred, target), LengthMismatch);
    target = random_frames(3, 5, rng);
    CHECK_THROWS_AS(loss_mse(pred, target), DimensionMismatch);
    CHECK_THROWS_AS(loss_mse({}, {}), EmptyInput);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  std::mt19937_64 rng(59);
  struct Case {
    LossKind loss;
    OutputActivation act;
    bool bi;
    std::vector<int> lengths;
  };
  const Case cases[] = {
      {LossKind::Mse, OutputActivation::None, true, {8, 5}},
      {LossKind::Contact, OutputActivation::Sigmoid, true, {8}},
      {LossKind::Velocity, OutputActivation::None, false, {10}},
      {LossKind::VelocityL2, OutputActivation::None, false, {8}},
  };
  for (const Case& c : cases) {
    CAPTURE(loss_kind_name(c.loss));
    NetworkSpec spec = small_spec(3, 4, 2, c.act, c.bi);
    NetworkParams params = init_params(spec, 17);

    std::vector<TrainingWindow> windows(c.lengths.size());
    for (std::size_t w = 0; w < c.lengths.size(); ++w) {
      windows[w].inputs = random_frames(c.lengths[w], 3, rng);
      if (c.loss == LossKind::Contact) {
        std::bernoulli_distribution coin(0.5);
        windows[w].targets.assign(c.lengths[w], VectorXd(2));
        for (VectorXd& t : windows[w].targets) t << double(coin(rng)), double(coin(rng));
      } else {
        windows[w].targets = random_frames(c.lengths[w], 2, rng);
      }
    }
    std::vector<const TrainingWindow*> ptrs;
    for (const TrainingWindow& w : windows) ptrs.push_back(&w);

    auto [loss0, grads] = loss_and_gradients(params, spec, ptrs, c.loss);
    CHECK(std::isfinite(loss0));

    // forward-only loss evaluation, independent of the gradient path
    auto eval = [&]() {
      double sum = 0;
      for (const TrainingWindow& w : windows)
        sum += compute_loss(c.loss, forward_window(params, spec, w.inputs), w.targets);
      return sum / windows.size();
    };

    struct TensorRef {
      double* p;
      const double* g;
      Eigen::Index n;
      const char* name;
    };
    std::vector<TensorRef> refs = {
        {params.in_w.data(), grads.in_w.data(), params.in_w.size(), "in.w"},
        {params.in_b.data(), grads.in_b.data(), params.in_b.size(), "in.b"},
        {params.out_w.data(), grads.out_w.data(), params.out_w.size(), "out.w"},
        {params.out_b.data(), grads.out_b.data(), params.out_b.size(), "out.b"},
    };
    for (std::size_t l = 0; l < params.lstm.size(); ++l) {
      refs.push_back({params.lstm[l].w_x.data(), grads.lstm[l].w_x.data(),
                      params.lstm[l].w_x.size(), "w_x"});
      refs.push_back({params.lstm[l].w_h.data(), grads.lstm[l].w_h.data(),
                      params.lstm[l].w_h.size(), "w_h"});
      refs.push_back({params.lstm[l].bias.data(), grads.lstm[l].bias.data(),
                      params.lstm[l].bias.size(), "bias"});
    }

    const double step = 1e-5;
    double worst_rel = 0, worst_abs = 0;
    for (const TensorRef& ref : refs) {
      for (Eigen::Index i = 0; i < ref.n; ++i) {
        const double saved = ref.p[i];
        ref.p[i] = saved + step;
        const double up = eval();
        ref.p[i] = saved - step;
        const double down = eval();
        ref.p[i] = saved;
        const double fd = (up - down) / (2 * step);
        const double an = ref.g[i];
        const double rel = std::abs(fd - an) / std::max({1e-3, std::abs(fd), std::abs(an)});
        worst_rel = std::max(worst_rel, rel);
        worst_abs = std::max(worst_abs, std::abs(fd - an));
      }
    }
    CHECK(worst_rel < 1e-4);
    CHECK(worst_abs < 1e-6);
  }
}

TEST_CASE("training memorizes a single window") {
  std::mt19937_64 rng(60);
  NetworkSpec spec = small_spec(3, 16, 2, OutputActivation::None, true);
  std::vector<TrainingWindow> data(1);
  data[0].inputs = random_frames(10, 3, rng);
  data[0].targets = random_frames(10, 2, rng);

  NetworkParams params = init_params(spec, 21);
  TrainingConfig config;
  config.learning_rate = 0.01;
  config.batch_size = 1;
  config.epochs = 2500;
  config.seed = 21;
  TrainReport report = train(params, spec, data, LossKind::Mse, config,
                             [](int, double loss) { return loss < 1e-3; });
  CHECK(report.epoch_loss.back() < 1e-3);
  CHECK(loss_mse(forward_window(params, spec, data[0].inputs), data[0].targets) < 2e-3);
}

TEST_CASE("training reduces the loss and is reproducible") {
  std::mt19937_64 rng(61);
  NetworkSpec spec = small_spec(3, 8, 2, OutputActivation::None, false);
  std::vector<TrainingWindow> data(6);
  for (TrainingWindow& w : data) {
    w.inputs = random_frames(12, 3, rng);
    w.targets = random_frames(12, 2, rng);
  }
  TrainingConfig config;
  config.batch_size = 3;
  config.epochs = 30;
  config.seed = 4;

  NetworkParams a = init_params(spec, 33);
  NetworkParams b = init_params(spec, 33);
  TrainReport ra = train(a, spec, data, LossKind::Mse, config);
  TrainReport rb = train(b, spec, data, LossKind::Mse, config);
  CHECK(ra.epoch_loss.back() < ra.epoch_loss.front());
  REQUIRE(ra.epoch_loss.size() == 30);
  for (int e = 0; e < 30; ++e) CHECK(ra.epoch_loss[e] == rb.epoch_loss[e]);
  CHECK((a.in_w - b.in_w).norm() == 0.0);
  CHECK((a.out_w - b.out_w).norm() == 0.0);
  for (std::size_t l = 0; l < a.lstm.size(); ++l)
    CHECK((a.lstm[l].w_x - b.lstm[l].w_x).norm() == 0.0);

  // a different shuffling seed takes a different path
  TrainingConfig other = config;
  other.seed = 5;
  NetworkParams c = init_params(spec, 33);
  TrainReport rc = train(c, spec, data, LossKind::Mse, other);
  CHECK(rc.epoch_loss.back() != ra.epoch_loss.back());
}

TEST_CASE("initialization layout") {
  NetworkSpec spec = small_spec(6, 8, 3, OutputActivation::None, true);
  NetworkParams p = init_params(spec, 77);
  CHECK_NOTHROW(validate_shapes(p, spec));
  REQUIRE(p.lstm.size() == 4);
  CHECK(p.in_w.rows() == 8);
  CHECK(p.in_w.cols() == 6);
  CHECK(p.lstm[0].w_x.cols() == 8);   // layer 0 reads the projected features
  CHECK(p.lstm[2].w_x.cols() == 16);  // layer 1 reads both directions
  CHECK(p.out_w.rows() == 3);
  CHECK(p.out_w.cols() == 16);

  CHECK(p.in_b.norm() == 0.0);
  CHECK(p.out_b.norm() == 0.0);
  for (const LstmLayerParams& l : p.lstm) {
    CHECK((l.bias.segment(8, 8) - VectorXd::Ones(8)).norm() == 0.0);  // forget gate
    CHECK(l.bias.head(8).norm() == 0.0);
    CHECK(l.bias.tail(16).norm() == 0.0);
    CHECK(l.w_x.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(double(l.w_x.cols())));
    CHECK(l.w_h.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
    CHECK(l.w_x.cwiseAbs().maxCoeff() > 0.01);  // actually randomized
  }
  CHECK(p.in_w.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(6.0));
  CHECK(p.out_w.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(16.0));

  NetworkParams q = init_params(spec, 78);
  CHECK((p.in_w - q.in_w).norm() > 0.0);
  NetworkParams r = init_params(spec, 77);
  CHECK((p.in_w - r.in_w).norm() == 0.0);

  NetworkSpec other = small_spec(6, 16, 3, OutputActivation::None, true);
  CHECK_THROWS_AS(validate_shapes(p, other), SpecMismatch);
}

TEST_CASE("weights json round trip") {
  NetworkSpec spec = small_spec(5, 6, 4, OutputActivation::Sigmoid, true);
  NetworkParams params = init_params(spec, 99);
  const char* path = "test_weights_io.json";
  save_weights_json(path, params, spec, {{"net", "gate"}, {"epoch", "3"}});
  LoadedNetwork loaded = load_weights_json(path);

  CHECK(loaded.spec.input_width == 5);
  CHECK(loaded.spec.hidden_width == 6);
  CHECK(loaded.spec.output_width == 4);
  CHECK(loaded.spec.activation == OutputActivation::Sigmoid);
  CHECK(loaded.spec.bidirectional);
  CHECK(loaded.meta.at("net") == "gate");
  CHECK(loaded.meta.at("epoch") == "3");
  CHECK((loaded.params.in_w - params.in_w).norm() == 0.0);
  CHECK((loaded.params.in_b - params.in_b).norm() == 0.0);
  CHECK((loaded.params.out_w - params.out_w).norm() == 0.0);
  CHECK((loaded.params.out_b - params.out_b).norm() == 0.0);
  REQUIRE(loaded.params.lstm.size() == params.lstm.size());
  for (std::size_t l = 0; l < params.lstm.size(); ++l) {
    CHECK((loaded.params.lstm[l].w_x - params.lstm[l].w_x).norm() == 0.0);
    CHECK((loaded.params.lstm[l].w_h - params.lstm[l].w_h).norm() == 0.0);
    CHECK((loaded.params.lstm[l].bias - params.lstm[l].bias).norm() == 0.0);
  }

  // loading through saved weights must reproduce inference bit for bit
  std::mt19937_64 rng(62);
  std::vector<VectorXd> inputs = random_frames(9, 5, rng);
  std::vector<VectorXd> ya = forward_window(params, spec, inputs);
  std::vector<VectorXd> yb = forward_window(loaded.params, loaded.spec, inputs);
  for (int t = 0; t < 9; ++t) CHECK((ya[t] - yb[t]).norm() == 0.0);

  SUBCASE("missing tensor") {
    std::ifstream in(path);
    nlohmann::json doc = nlohmann::json::parse(in);
    nlohmann::json kept = nlohmann::json::array();
    for (auto& t : doc["tensors"])
      if (t["name"] != "out.w") kept.push_back(t);
    doc["tensors"] = kept;
    std::ofstream(path) << doc.dump();
    CHECK_THROWS_AS(load_weights_json(path), ParseError);
  }
  SUBCASE("shape disagrees with the spec") {
    std::ifstream in(path);
    nlohmann::json doc = nlohmann::json::parse(in);
    doc["spec"]["hidden"] = 12;
    std::ofstream(path) << doc.dump();
    CHECK_THROWS_AS(load_weights_json(path), SpecMismatch);
  }
  SUBCASE("not a weights file") {
    std::ofstream(path) << "{\"format\":\"something-else\"}";
    CHECK_THROWS_AS(load_weights_json(path), ParseError);
    std::ofstream(path) << "{nope";
    CHECK_THROWS_AS(load_weights_json(path), ParseError);
  }
  std::remove(path);
  CHECK_THROWS_AS(load_weights_json("/nonexistent/weights.json"), IoError);
}

TEST_CASE("training guards") {
  NetworkSpec spec = small_spec(2, 4, 1, OutputActivation::None, false);
  std::mt19937_64 rng(63);
  SUBCASE("non-finite data is reported, not propagated") {
    std::vector<TrainingWindow> data(1);
    data[0].inputs = random_frames(4, 2, rng);
    data[0].targets = random_frames(4, 1, rng);
    data[0].inputs[2][0] = std::numeric_limits<double>::quiet_NaN();
    NetworkParams params = init_params(spec, 1);
    TrainingConfig config;
    config.batch_size = 1;
    CHECK_THROWS_AS(train(params, spec, data, LossKind::Mse, config), NonFiniteLoss);
  }
  SUBCASE("bad config") {
    std::vector<TrainingWindow> data(1);
    data[0].inputs = random_frames(4, 2, rng);
    data[0].targets = random_frames(4, 1, rng);
    NetworkParams params = init_params(spec, 1);
    TrainingConfig config;
    config.batch_size = 0;
    CHECK_THROWS_AS(train(params, spec, data, LossKind::Mse, config), SpecMismatch);
    config = TrainingConfig{};
    config.learning_rate = -1;
    CHECK_THROWS_AS(train(params, spec, data, LossKind::Mse, config), SpecMismatch);
  }
  SUBCASE("empty dataset and windows") {
    NetworkParams params = init_params(spec, 1);
    CHECK_THROWS_AS(train(params, spec, {}, LossKind::Mse, TrainingConfig{}), EmptyInput);
    std::vector<TrainingWindow> data(1);  // window with no frames
    CHECK_THROWS_AS(train(params, spec, data, LossKind::Mse, TrainingConfig{}), EmptyInput);
  }
  SUBCASE("ragged window") {
    std::vector<TrainingWindow> data(1);
    data[0].inputs = random_frames(4, 2, rng);
    data[0].targets = random_frames(3, 1, rng);
    NetworkParams params = init_params(spec, 1);
    CHECK_THROWS_AS(train(params, spec, data, LossKind::Mse, TrainingConfig{}),
                    LengthMismatch);
  }
  SUBCASE("input width mismatch") {
    NetworkParams params = init_params(spec, 1);
    CHECK_THROWS_AS(forward_window(params, spec, random_frames(4, 3, rng)),
                    DimensionMismatch);
    CHECK_THROWS_AS(forward_window(params, spec, {}), EmptyInput);
  }
}
