// Copyright 2026 The ptgan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PTGAN_NN_HPP_
#define PTGAN_NN_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ptgan::nn {

// Row-major tensor of doubles; in practice always a [rows x cols] matrix.
struct RealTensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  static RealTensor matrix(std::size_t rows, std::size_t cols) {
    RealTensor t;
    t.shape = {rows, cols};
    t.values.assign(rows * cols, 0.0);
    return t;
  }

  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const {
    std::size_t c = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) c *= shape[i];
    return shape.empty() ? 0 : c;
  }
  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const {
    return values[r * cols() + c];
  }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values).subspan(r * cols(), cols());
  }
};

// Output-layer nonlinearity. Hidden layers always use tanh; the field below
// only selects the head. (Smooth hidden activations keep finite-difference
// gradient checks meaningful everywhere.)
enum class Activation { kRelu, kTanh, kSigmoid, kSoftmaxOutput };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Fully connected network. Parameters live in one flat vector, layer by
// layer: weights (input-major, [d_in x d_out]) then biases.
struct DenseNetwork {
  std::vector<std::size_t> layer_dims;
  Activation activation = Activation::kSigmoid;
  std::vector<double> params;

  std::size_t layer_count() const { return layer_dims.size() - 1; }
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t param_count() const;
  // Flat offsets of layer l's weight block / bias block.
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;
};

// Weights uniform on (-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
// Same (dims, activation, seed) always yields identical parameters.
DenseNetwork init_network(const std::vector<std::size_t>& layer_dims,
                          Activation activation, std::uint64_t seed);

RealTensor forward(const DenseNetwork& net, const RealTensor& batch);

// Forward pass with every layer's pre- and post-activation kept for
// backpropagation.
struct ForwardTrace {
  RealTensor input;
  std::vector<RealTensor> pre;   // one per layer
  std::vector<RealTensor> post;  // one per layer; post.back() is the output
};
ForwardTrace forward_trace(const DenseNetwork& net, const RealTensor& batch);

// Per-example parameter gradients: grads[i] has param_count() entries and is
// the gradient of example i's loss alone.
struct PerExampleGrads {
  std::size_t batch_size = 0;
  std::size_t param_count = 0;
  std::vector<std::vector<double>> grads;
};

// Loss definitions the trainer needs. All log() arguments are clamped to
// [1e-7, 1 - 1e-7]; the reported gradients are the exact derivatives of the
// clamped expressions (zero where a clamp is active).
struct LossSpec {
  enum class Kind {
    // l_i = r_i * log(s_i) + off_weight * (1 - r_i) * log(1 - s_i)
    // for a single sigmoid output s_i and target r_i in {0, 1}.
    kWeightedBinaryLog,
    // l_i = -log(p_{i, label_i}) over a softmax head.
    kCrossEntropy,
    // l_i = sum_y p_{i,y} * c_{i,y}: expectation of fixed per-class
    // coefficients under the softmax head.
    kSoftmaxExpectation,
  };

  Kind kind = Kind::kWeightedBinaryLog;
  std::vector<double> binary_targets;  // kWeightedBinaryLog
  double off_weight = 1.0;             // kWeightedBinaryLog
  std::vector<std::int64_t> class_labels;  // kCrossEntropy
  RealTensor coefficients;                 // kSoftmaxExpectation

  static LossSpec weighted_binary_log(std::vector<double> targets,
                                      double off_weight);
  static LossSpec cross_entropy(std::vector<std::int64_t> labels);
  static LossSpec softmax_expectation(RealTensor coefficients);
};

std::vector<double> per_example_loss(const DenseNetwork& net,
                                     const RealTensor& batch,
                                     const LossSpec& spec);
// Sum over the batch of the per-example losses.
double loss_value(const DenseNetwork& net, const RealTensor& batch,
                  const LossSpec& spec);

// Gradient of each example's loss with respect to the parameters.
PerExampleGrads per_example_backward(const DenseNetwork& net,
                                     const RealTensor& batch,
                                     const LossSpec& spec);

// Gradient of the summed loss; same math as summing per_example_backward
// but with a single accumulator.
std::vector<double> batch_gradient(const DenseNetwork& net,
                                   const RealTensor& batch,
                                   const LossSpec& spec);

// Generic entry for composed objectives: given dLoss/dOutput for each
// example, returns per-example parameter gradients and the gradient with
// respect to the input batch (used to chain one network through another).
struct BackpropResult {
  PerExampleGrads param_grads;
  RealTensor input_grads;
};
BackpropResult backward_from_output(const DenseNetwork& net,
                                    const ForwardTrace& trace,
                                    const RealTensor& dloss_doutput);

// params <- params - lr * grad.
void apply_update(DenseNetwork& net, std::span<const double> grad, double lr);

// Checkpointing: JSON {layer_dims, activation, params}. Parameter doubles
// survive a save/load round trip bit for bit.
void save_network(const DenseNetwork& net, const std::string& path);
DenseNetwork load_network(const std::string& path);
std::string network_to_json(const DenseNetwork& net);
DenseNetwork network_from_json(const std::string& text);

double l2_norm(std::span<const double> v);

// The clamp shared by every loss here: log arguments restricted to
// [1e-7, 1 - 1e-7]. clamped_dlog is the exact derivative of clamped_log
// (zero where the clamp is active), so finite differences of any objective
// built from these match the analytic gradients.
double clamped_log(double x);
double clamped_dlog(double x);

}  // namespace ptgan::nn

#endif  // PTGAN_NN_HPP_
