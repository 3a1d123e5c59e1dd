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

#include "ptgan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "ptgan/rng.hpp"

namespace ptgan::nn {
namespace {

constexpr double kLogFloor = 1e-7;  // log arguments clamped to [1e-7, 1-1e-7]

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_batch(const DenseNetwork& net, const RealTensor& batch) {
  if (batch.shape.size() != 2) {
    throw std::invalid_argument("batch must be a [rows x cols] tensor");
  }
  if (batch.cols() != net.input_dim()) {
    std::ostringstream msg;
    msg << "batch width " << batch.cols() << " does not match network input "
        << net.input_dim();
    throw std::invalid_argument(msg.str());
  }
  if (batch.values.size() != batch.rows() * batch.cols()) {
    throw std::invalid_argument("tensor value count does not match its shape");
  }
}

void check_network(const DenseNetwork& net) {
  if (net.layer_dims.size() < 2) {
    throw std::invalid_argument("network needs at least one layer");
  }
  for (std::size_t d : net.layer_dims) {
    if (d == 0) throw std::invalid_argument("layer dimensions must be >= 1");
  }
  if (net.params.size() != net.param_count()) {
    throw std::invalid_argument("parameter vector length mismatch");
  }
}

// dLoss/dPre for the output layer, given dLoss/dPost, for one example row.
void head_chain(Activation act, std::span<const double> pre,
                std::span<const double> post, std::span<const double> dpost,
                std::span<double> dpre) {
  const std::size_t n = post.size();
  switch (act) {
    case Activation::kRelu:
      for (std::size_t i = 0; i < n; ++i) {
        dpre[i] = pre[i] > 0.0 ? dpost[i] : 0.0;
      }
      break;
    case Activation::kTanh:
      for (std::size_t i = 0; i < n; ++i) {
        dpre[i] = dpost[i] * (1.0 - post[i] * post[i]);
      }
      break;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < n; ++i) {
        dpre[i] = dpost[i] * post[i] * (1.0 - post[i]);
      }
      break;
    case Activation::kSoftmaxOutput: {
      // J^T v for the softmax Jacobian: p .* (v - <v, p>).
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += dpost[i] * post[i];
      for (std::size_t i = 0; i < n; ++i) {
        dpre[i] = post[i] * (dpost[i] - dot);
      }
      break;
    }
  }
}

void check_spec(const DenseNetwork& net, const RealTensor& batch,
                const LossSpec& spec) {
  const std::size_t n = batch.rows();
  switch (spec.kind) {
    case LossSpec::Kind::kWeightedBinaryLog:
      if (net.output_dim() != 1 || net.activation != Activation::kSigmoid) {
        throw std::invalid_argument(
            "weighted binary log loss needs a single sigmoid output");
      }
      if (spec.binary_targets.size() != n) {
        throw std::invalid_argument("target count does not match batch");
      }
      break;
    case LossSpec::Kind::kCrossEntropy:
      if (net.activation != Activation::kSoftmaxOutput) {
        throw std::invalid_argument("cross entropy needs a softmax head");
      }
      if (spec.class_labels.size() != n) {
        throw std::invalid_argument("label count does not match batch");
      }
      for (std::int64_t y : spec.class_labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= net.output_dim()) {
          throw std::invalid_argument("class label out of range");
        }
      }
      break;
    case LossSpec::Kind::kSoftmaxExpectation:
      if (net.activation != Activation::kSoftmaxOutput) {
        throw std::invalid_argument("softmax expectation needs a softmax head");
      }
      if (spec.coefficients.rows() != n ||
          spec.coefficients.cols() != net.output_dim()) {
        throw std::invalid_argument("coefficient shape does not match batch");
      }
      break;
  }
}

// dLoss/dOutput rows for a spec; losses optionally collected alongside.
RealTensor output_gradient(const RealTensor& out, const LossSpec& spec,
                           std::vector<double>* losses) {
  const std::size_t n = out.rows();
  const std::size_t m = out.cols();
  RealTensor d = RealTensor::matrix(n, m);
  if (losses != nullptr) losses->assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    switch (spec.kind) {
      case LossSpec::Kind::kWeightedBinaryLog: {
        const double s = out.at(i, 0);
        const double r = spec.binary_targets[i];
        const double w = spec.off_weight;
        if (losses != nullptr) {
          (*losses)[i] = r * clamped_log(s) + w * (1.0 - r) * clamped_log(1.0 - s);
        }
        d.at(i, 0) = r * clamped_dlog(s) - w * (1.0 - r) * clamped_dlog(1.0 - s);
        break;
      }
      case LossSpec::Kind::kCrossEntropy: {
        const auto y = static_cast<std::size_t>(spec.class_labels[i]);
        if (losses != nullptr) (*losses)[i] = -clamped_log(out.at(i, y));
        d.at(i, y) = -clamped_dlog(out.at(i, y));
        break;
      }
      case LossSpec::Kind::kSoftmaxExpectation: {
        double l = 0.0;
        for (std::size_t y = 0; y < m; ++y) {
          l += out.at(i, y) * spec.coefficients.at(i, y);
          d.at(i, y) = spec.coefficients.at(i, y);
        }
        if (losses != nullptr) (*losses)[i] = l;
        break;
      }
    }
  }
  return d;
}

// Core reverse pass for one example. Writes the parameter gradient into
// `grad` (accumulating) and, if `dinput` is non-null, the input gradient.
void backward_one(const DenseNetwork& net, const ForwardTrace& trace,
                  std::size_t i, std::span<const double> dout,
                  std::span<double> grad, std::span<double> dinput) {
  const std::size_t layers = net.layer_count();
  std::vector<double> dpost(dout.begin(), dout.end());
  std::vector<double> dpre;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t din = net.layer_dims[l];
    const std::size_t dout_dim = net.layer_dims[l + 1];
    const auto pre = trace.pre[l].row(i);
    const auto post = trace.post[l].row(i);
    dpre.assign(dout_dim, 0.0);
    if (l == layers - 1) {
      head_chain(net.activation, pre, post, dpost, dpre);
    } else {
      for (std::size_t j = 0; j < dout_dim; ++j) {
        dpre[j] = dpost[j] * (1.0 - post[j] * post[j]);  // hidden tanh
      }
    }
    const auto below =
        l == 0 ? trace.input.row(i) : trace.post[l - 1].row(i);
    double* w_grad = grad.data() + net.weight_offset(l);
    double* b_grad = grad.data() + net.bias_offset(l);
    for (std::size_t a = 0; a < din; ++a) {
      const double x = below[a];
      if (x != 0.0) {
        for (std::size_t j = 0; j < dout_dim; ++j) {
          w_grad[a * dout_dim + j] += x * dpre[j];
        }
      }
    }
    for (std::size_t j = 0; j < dout_dim; ++j) b_grad[j] += dpre[j];
    // Propagate to the layer below (or the input).
    const double* w = net.params.data() + net.weight_offset(l);
    if (l == 0) {
      if (!dinput.empty()) {
        for (std::size_t a = 0; a < din; ++a) {
          double acc = 0.0;
          for (std::size_t j = 0; j < dout_dim; ++j) {
            acc += w[a * dout_dim + j] * dpre[j];
          }
          dinput[a] = acc;
        }
      }
    } else {
      dpost.assign(din, 0.0);
      for (std::size_t a = 0; a < din; ++a) {
        double acc = 0.0;
        for (std::size_t j = 0; j < dout_dim; ++j) {
          acc += w[a * dout_dim + j] * dpre[j];
        }
        dpost[a] = acc;
      }
    }
  }
}

}  // namespace

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kSoftmaxOutput: return "softmax";
  }
  throw std::invalid_argument("unknown activation");
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "softmax") return Activation::kSoftmaxOutput;
  throw std::invalid_argument("unknown activation name: " + name);
}

std::size_t DenseNetwork::param_count() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    count += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
  }
  return count;
}

std::size_t DenseNetwork::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) {
    off += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
  }
  return off;
}

std::size_t DenseNetwork::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + layer_dims[layer] * layer_dims[layer + 1];
}

DenseNetwork init_network(const std::vector<std::size_t>& layer_dims,
                          Activation activation, std::uint64_t seed) {
  DenseNetwork net;
  net.layer_dims = layer_dims;
  net.activation = activation;
  if (layer_dims.size() < 2) {
    throw std::invalid_argument("network needs at least one layer");
  }
  for (std::size_t d : layer_dims) {
    if (d == 0) throw std::invalid_argument("layer dimensions must be >= 1");
  }
  net.params.assign(net.param_count(), 0.0);
  RngStream rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer_dims[l]));
    double* w = net.params.data() + net.weight_offset(l);
    const std::size_t n = layer_dims[l] * layer_dims[l + 1];
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = (2.0 * rng.uniform() - 1.0) * bound;
    }
    // biases stay zero
  }
  return net;
}

ForwardTrace forward_trace(const DenseNetwork& net, const RealTensor& batch) {
  check_network(net);
  check_batch(net, batch);
  const std::size_t n = batch.rows();
  ForwardTrace trace;
  trace.input = batch;
  const std::size_t layers = net.layer_count();
  trace.pre.reserve(layers);
  trace.post.reserve(layers);
  const RealTensor* below = &trace.input;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t din = net.layer_dims[l];
    const std::size_t dout = net.layer_dims[l + 1];
    RealTensor pre = RealTensor::matrix(n, dout);
    const double* w = net.params.data() + net.weight_offset(l);
    const double* b = net.params.data() + net.bias_offset(l);
    for (std::size_t i = 0; i < n; ++i) {
      double* z = pre.values.data() + i * dout;
      for (std::size_t j = 0; j < dout; ++j) z[j] = b[j];
      const double* x = below->values.data() + i * din;
      for (std::size_t a = 0; a < din; ++a) {
        const double xa = x[a];
        if (xa != 0.0) {
          const double* wrow = w + a * dout;
          for (std::size_t j = 0; j < dout; ++j) z[j] += xa * wrow[j];
        }
      }
    }
    RealTensor post = RealTensor::matrix(n, dout);
    if (l + 1 < layers) {
      for (std::size_t i = 0; i < pre.values.size(); ++i) {
        post.values[i] = std::tanh(pre.values[i]);
      }
    } else {
      switch (net.activation) {
        case Activation::kRelu:
          for (std::size_t i = 0; i < pre.values.size(); ++i) {
            post.values[i] = std::max(0.0, pre.values[i]);
          }
          break;
        case Activation::kTanh:
          for (std::size_t i = 0; i < pre.values.size(); ++i) {
            post.values[i] = std::tanh(pre.values[i]);
          }
          break;
        case Activation::kSigmoid:
          for (std::size_t i = 0; i < pre.values.size(); ++i) {
            post.values[i] = sigmoid(pre.values[i]);
          }
          break;
        case Activation::kSoftmaxOutput:
          for (std::size_t i = 0; i < n; ++i) {
            const double* z = pre.values.data() + i * dout;
            double* p = post.values.data() + i * dout;
            double zmax = z[0];
            for (std::size_t j = 1; j < dout; ++j) zmax = std::max(zmax, z[j]);
            double sum = 0.0;
            for (std::size_t j = 0; j < dout; ++j) {
              p[j] = std::exp(z[j] - zmax);
              sum += p[j];
            }
            for (std::size_t j = 0; j < dout; ++j) p[j] /= sum;
          }
          break;
      }
    }
    trace.pre.push_back(std::move(pre));
    trace.post.push_back(std::move(post));
    below = &trace.post.back();
  }
  return trace;
}

RealTensor forward(const DenseNetwork& net, const RealTensor& batch) {
  return forward_trace(net, batch).post.back();
}

LossSpec LossSpec::weighted_binary_log(std::vector<double> targets,
                                       double off_weight) {
  LossSpec spec;
  spec.kind = Kind::kWeightedBinaryLog;
  spec.binary_targets = std::move(targets);
  spec.off_weight = off_weight;
  return spec;
}

LossSpec LossSpec::cross_entropy(std::vector<std::int64_t> labels) {
  LossSpec spec;
  spec.kind = Kind::kCrossEntropy;
  spec.class_labels = std::move(labels);
  return spec;
}

LossSpec LossSpec::softmax_expectation(RealTensor coefficients) {
  LossSpec spec;
  spec.kind = Kind::kSoftmaxExpectation;
  spec.coefficients = std::move(coefficients);
  return spec;
}

std::vector<double> per_example_loss(const DenseNetwork& net,
                                     const RealTensor& batch,
                                     const LossSpec& spec) {
  check_network(net);
  check_batch(net, batch);
  check_spec(net, batch, spec);
  const RealTensor out = forward(net, batch);
  std::vector<double> losses;
  output_gradient(out, spec, &losses);
  return losses;
}

double loss_value(const DenseNetwork& net, const RealTensor& batch,
                  const LossSpec& spec) {
  double total = 0.0;
  for (double l : per_example_loss(net, batch, spec)) total += l;
  return total;
}

PerExampleGrads per_example_backward(const DenseNetwork& net,
                                     const RealTensor& batch,
                                     const LossSpec& spec) {
  check_network(net);
  check_batch(net, batch);
  check_spec(net, batch, spec);
  const ForwardTrace trace = forward_trace(net, batch);
  const RealTensor dout =
      output_gradient(trace.post.back(), spec, nullptr);
  PerExampleGrads result;
  result.batch_size = batch.rows();
  result.param_count = net.param_count();
  result.grads.assign(result.batch_size,
                      std::vector<double>(result.param_count, 0.0));
  for (std::size_t i = 0; i < result.batch_size; ++i) {
    backward_one(net, trace, i, dout.row(i), result.grads[i], {});
  }
  return result;
}

std::vector<double> batch_gradient(const DenseNetwork& net,
                                   const RealTensor& batch,
                                   const LossSpec& spec) {
  check_network(net);
  check_batch(net, batch);
  check_spec(net, batch, spec);
  const ForwardTrace trace = forward_trace(net, batch);
  const RealTensor dout =
      output_gradient(trace.post.back(), spec, nullptr);
  std::vector<double> grad(net.param_count(), 0.0);
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    backward_one(net, trace, i, dout.row(i), grad, {});
  }
  return grad;
}

BackpropResult backward_from_output(const DenseNetwork& net,
                                    const ForwardTrace& trace,
                                    const RealTensor& dloss_doutput) {
  check_network(net);
  const std::size_t n = trace.input.rows();
  if (dloss_doutput.rows() != n || dloss_doutput.cols() != net.output_dim()) {
    throw std::invalid_argument("output-gradient shape mismatch");
  }
  BackpropResult result;
  result.param_grads.batch_size = n;
  result.param_grads.param_count = net.param_count();
  result.param_grads.grads.assign(
      n, std::vector<double>(net.param_count(), 0.0));
  result.input_grads = RealTensor::matrix(n, net.input_dim());
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> dinput(
        result.input_grads.values.data() + i * net.input_dim(),
        net.input_dim());
    backward_one(net, trace, i, dloss_doutput.row(i),
                 result.param_grads.grads[i], dinput);
  }
  return result;
}

void apply_update(DenseNetwork& net, std::span<const double> grad, double lr) {
  if (grad.size() != net.params.size()) {
    throw std::invalid_argument("gradient length does not match parameters");
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    net.params[i] -= lr * grad[i];
  }
}

std::string network_to_json(const DenseNetwork& net) {
  nlohmann::json j;
  j["layer_dims"] = net.layer_dims;
  j["activation"] = activation_name(net.activation);
  j["params"] = net.params;
  return j.dump();
}

DenseNetwork network_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  DenseNetwork net;
  net.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
  net.activation = activation_from_name(j.at("activation").get<std::string>());
  net.params = j.at("params").get<std::vector<double>>();
  check_network(net);
  return net;
}

void save_network(const DenseNetwork& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << network_to_json(net) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

DenseNetwork load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return network_from_json(buffer.str());
}

double clamped_log(double x) {
  return std::log(std::clamp(x, kLogFloor, 1.0 - kLogFloor));
}

double clamped_dlog(double x) {
  if (x < kLogFloor || x > 1.0 - kLogFloor) return 0.0;
  return 1.0 / x;
}

double l2_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

}  // namespace ptgan::nn
