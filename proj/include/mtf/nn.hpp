#pragma once

// Dense multilayer perceptrons with exact backpropagation, Adam, and soft
// target updates. Batches are column-major: one column per sample.

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "mtf/rng.hpp"

namespace mtf::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { relu, linear, tanh };

std::string to_string(Activation a);
Activation parse_activation(std::string_view name);

struct NetworkSpec {
  std::vector<int> layer_sizes;
  Activation hidden_activation = Activation::relu;
  Activation output_activation = Activation::linear;

  static NetworkSpec mlp(int input, const std::vector<int>& hidden, int output,
                         Activation output_activation);

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  int affine_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }

  // Throws std::invalid_argument on fewer than two sizes or a size < 1.
  void validate() const;

  bool operator==(const NetworkSpec&) const = default;
};

// weights[l] is (layer_sizes[l+1] x layer_sizes[l]); biases[l] has
// layer_sizes[l+1] entries.
struct NetworkParams {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static NetworkParams zeros(const NetworkSpec& spec);
  // Uniform in +-sqrt(6 / (fan_in + fan_out)) per layer, zero biases.
  static NetworkParams glorot(const NetworkSpec& spec, Rng& rng);

  bool matches(const NetworkSpec& spec) const;
  bool same_shape(const NetworkParams& other) const;
  bool all_finite() const;
  std::size_t parameter_count() const;

  bool operator==(const NetworkParams& other) const;
};

struct ForwardCache {
  // activations[0] is the input batch, activations[l + 1] the output of
  // affine layer l after its activation function.
  std::vector<Matrix> activations;
};

struct Gradients {
  NetworkParams params;
  Matrix input;  // d loss / d input, same shape as the input batch
};

Vector forward(const NetworkParams& params, const NetworkSpec& spec, const Vector& input);
Matrix forward_batch(const NetworkParams& params, const NetworkSpec& spec, const Matrix& inputs);
Matrix forward_batch(const NetworkParams& params, const NetworkSpec& spec, const Matrix& inputs,
                     ForwardCache& cache);

// Backpropagates `output_adjoint` (d loss / d output, one column per sample)
// through the cached forward pass. Gradients are summed over the batch.
Gradients backward(const NetworkParams& params, const NetworkSpec& spec, const ForwardCache& cache,
                   const Matrix& output_adjoint);

// Forward + backward in one call.
Gradients gradients(const NetworkParams& params, const NetworkSpec& spec, const Matrix& inputs,
                    const Matrix& output_adjoint);

struct AdamState {
  NetworkParams first_moment;
  NetworkParams second_moment;
  long step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const NetworkSpec& spec, double learning_rate);
};

// Bias-corrected Adam update. Non-finite gradients throw and leave both
// `params` and `state` untouched.
void adam_step(AdamState& state, NetworkParams& params, const NetworkParams& grads);

// target <- rate * source + (1 - rate) * target, rate in [0, 1].
void soft_update(NetworkParams& target, const NetworkParams& source, double rate);

// A network with its optimizer; the unit every learner is built from.
struct Trainable {
  NetworkSpec spec;
  NetworkParams params;
  AdamState optimizer;

  Trainable() = default;
  Trainable(NetworkSpec spec, double learning_rate, Rng& rng);

  Matrix operator()(const Matrix& inputs) const { return forward_batch(params, spec, inputs); }
  Matrix operator()(const Matrix& inputs, ForwardCache& cache) const {
    return forward_batch(params, spec, inputs, cache);
  }
  Gradients backward(const ForwardCache& cache, const Matrix& adjoint) const {
    return nn::backward(params, spec, cache, adjoint);
  }
  void step(const NetworkParams& grads) { adam_step(optimizer, params, grads); }
};

// Text checkpoint: a header line
//   network layers=36,128,128,1 hidden=relu output=linear
// followed by one line per tensor, weights row-major:
//   W0 128 36 <values...>
//   b0 128 <values...>
// Values use the shortest round-trip form so reads reproduce writes bit-exactly.
void write_network(std::ostream& out, const NetworkSpec& spec, const NetworkParams& params);
void read_network(std::istream& in, NetworkSpec& spec, NetworkParams& params);

}  // namespace mtf::nn
