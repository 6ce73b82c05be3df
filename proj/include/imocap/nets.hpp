#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace imocap {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class OutputActivation { None, Sigmoid };

// Architecture: 20% dropout on the input -> linear + ReLU to the hidden
// width -> two stacked LSTM layers (run both ways when bidirectional, with
// the directions concatenated between layers) -> linear to the output
// width, optionally through a sigmoid.
struct NetworkSpec {
  int input_width = 0;
  int hidden_width = 0;
  int output_width = 0;
  OutputActivation activation = OutputActivation::None;
  bool bidirectional = true;
  double input_dropout = 0.2;

  int directions() const { return bidirectional ? 2 : 1; }
  void validate() const;  // throws SpecMismatch on nonpositive widths
};

// The five canonical configurations.
NetworkSpec pose_s1_spec();   // 72 -> 256 -> 15, bidirectional
NetworkSpec pose_s2_spec();   // 87 -> 64 -> 69, bidirectional
NetworkSpec pose_s3_spec();   // 141 -> 128 -> 90, bidirectional
NetworkSpec trans_b1_spec();  // 87 -> 64 -> 2, sigmoid, bidirectional
NetworkSpec trans_b2_spec();  // 141 -> 256 -> 3, unidirectional

// One LSTM direction: w_x (4H x in), w_h (4H x H), bias (4H). Gate rows in
// order: input, forget, candidate, output.
struct LstmLayerParams {
  MatrixXd w_x;
  MatrixXd w_h;
  VectorXd bias;
};

struct NetworkParams {
  MatrixXd in_w;   // H x L1
  VectorXd in_b;   // H
  // Direction-major per layer: layer0 fwd, [layer0 bwd,] layer1 fwd, [layer1 bwd].
  std::vector<LstmLayerParams> lstm;
  MatrixXd out_w;  // L5 x D*H
  VectorXd out_b;  // L5
  bool empty() const { return in_w.size() == 0; }
};

// Uniform +-1/sqrt(fanIn) weights, zero biases except the LSTM forget gate
// at +1. Deterministic per seed.
NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed);
NetworkParams zero_params(const NetworkSpec& spec);
// Throws SpecMismatch when tensor shapes disagree with the spec.
void validate_shapes(const NetworkParams& params, const NetworkSpec& spec);

// Whole-window inference. Deterministic with training false (dropout off).
// With training true, input dropout is sampled from the seed.
std::vector<VectorXd> forward_window(const NetworkParams& params, const NetworkSpec& spec,
                                     const std::vector<VectorXd>& inputs,
                                     bool training = false, std::uint64_t seed = 0);

// Recurrent state for step-by-step inference of unidirectional nets.
struct StreamState {
  std::vector<VectorXd> h, c;  // one per layer
  void reset();
};

StreamState make_stream_state(const NetworkSpec& spec);

// Feeding frames one at a time matches forward_window elementwise to 1e-12.
// Throws SpecMismatch for bidirectional specs.
VectorXd stream_step(const NetworkParams& params, const NetworkSpec& spec,
                     StreamState& state, const VectorXd& input);

// Losses. All sum over dimensions and frames within one window; training
// averages whole-window losses across a batch.
double loss_mse(const std::vector<VectorXd>& pred, const std::vector<VectorXd>& target);
// Two independent binary cross-entropies per frame, predictions clamped to
// [1e-7, 1 - 1e-7].
double loss_contact(const std::vector<VectorXd>& pred,
                    const std::vector<VectorXd>& target);
// Sum over window sizes n in {1,3,9,27} of squared accumulated-difference
// norms over the complete windows [mn, mn+n-1].
double loss_velocity(const std::vector<VectorXd>& pred,
                     const std::vector<VectorXd>& target);
// Per-frame-only variant (window size 1) kept for comparison runs.
double loss_velocity_l2(const std::vector<VectorXd>& pred,
                        const std::vector<VectorXd>& target);

enum class LossKind { Mse, Contact, Velocity, VelocityL2 };
double compute_loss(LossKind kind, const std::vector<VectorXd>& pred,
                    const std::vector<VectorXd>& target);
LossKind loss_kind_from_name(const std::string& name);
std::string loss_kind_name(LossKind kind);

struct TrainingConfig {
  double learning_rate = 1e-3;
  int batch_size = 256;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 1;
  std::uint64_t seed = 0;
  double grad_clip_norm = 10.0;
  // Windows processed per matrix pass; grouping only affects speed and
  // floating-point summation order, never the math.
  int micro_batch = 16;
  void validate() const;
};

struct TrainingWindow {
  std::vector<VectorXd> inputs;
  std::vector<VectorXd> targets;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean whole-window loss per epoch
};

// BPTT + Adam. Deterministic per (config, dataset). Fine-tuning is the same
// call with params warm-started from a previous run. The optional stop
// callback sees (epoch, meanLoss) and returns true to halt early. Throws
// NonFiniteLoss when the loss leaves the reals.
TrainReport train(NetworkParams& params, const NetworkSpec& spec,
                  const std::vector<TrainingWindow>& dataset, LossKind loss,
                  const TrainingConfig& config,
                  const std::function<bool(int, double)>& stop = {});

// Gradients of the mean whole-window loss over the given windows at the
// current params (dropout off). Exposed for the finite-difference tests.
struct NetworkGrads {
  MatrixXd in_w;
  VectorXd in_b;
  std::vector<LstmLayerParams> lstm;
  MatrixXd out_w;
  VectorXd out_b;
};
std::pair<double, NetworkGrads> loss_and_gradients(
    const NetworkParams& params, const NetworkSpec& spec,
    const std::vector<const TrainingWindow*>& windows, LossKind loss);

// Weights file: JSON manifest of named tensors with shapes and flat
// row-major double data, plus the spec and free-form metadata.
void save_weights_json(const std::string& path, const NetworkParams& params,
                       const NetworkSpec& spec,
                       const std::map<std::string, std::string>& meta = {});
struct LoadedNetwork {
  NetworkParams params;
  NetworkSpec spec;
  std::map<std::string, std::string> meta;
};
LoadedNetwork load_weights_json(const std::string& path);

}  // namespace imocap
