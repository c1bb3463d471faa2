#include "mtf/nn.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "mtf/text.hpp"

namespace mtf::nn {

namespace {

std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void apply_activation(Activation a, Matrix& z) {
  switch (a) {
    case Activation::relu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::tanh:
      z = z.array().tanh().matrix();
      break;
    case Activation::linear:
      break;
  }
}

// Multiplies `delta` in place by the activation derivative, expressed through
// the post-activation values.
void scale_by_derivative(Activation a, const Matrix& post, Matrix& delta) {
  switch (a) {
    case Activation::relu:
      delta.array() *= (post.array() > 0.0).cast<double>();
      break;
    case Activation::tanh:
      delta.array() *= 1.0 - post.array().square();
      break;
    case Activation::linear:
      break;
  }
}

Activation activation_of_layer(const NetworkSpec& spec, int layer) {
  return layer + 1 == spec.affine_layers() ? spec.output_activation : spec.hidden_activation;
}

void check_input(const NetworkParams& params, const NetworkSpec& spec, const Matrix& inputs) {
  if (!params.matches(spec)) throw std::invalid_argument("network parameters do not match spec");
  if (inputs.rows() != spec.input_size()) {
    throw std::invalid_argument("forward: input has " + std::to_string(inputs.rows()) +
                                " rows, network expects " + std::to_string(spec.input_size()));
  }
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::linear: return "linear";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "linear") return Activation::linear;
  if (name == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

NetworkSpec NetworkSpec::mlp(int input, const std::vector<int>& hidden, int output,
                             Activation output_activation) {
  NetworkSpec spec;
  spec.layer_sizes.push_back(input);
  spec.layer_sizes.insert(spec.layer_sizes.end(), hidden.begin(), hidden.end());
  spec.layer_sizes.push_back(output);
  spec.output_activation = output_activation;
  spec.validate();
  return spec;
}

void NetworkSpec::validate() const {
  if (layer_sizes.size() < 2) throw std::invalid_argument("network needs at least input and output sizes");
  for (int s : layer_sizes) {
    if (s < 1) throw std::invalid_argument("network layer sizes must be >= 1");
  }
  if (hidden_activation != Activation::relu) throw std::invalid_argument("hidden activation must be relu");
  if (output_activation == Activation::relu) throw std::invalid_argument("output activation must be linear or tanh");
}

NetworkParams NetworkParams::zeros(const NetworkSpec& spec) {
  spec.validate();
  NetworkParams p;
  for (int l = 0; l < spec.affine_layers(); ++l) {
    p.weights.push_back(Matrix::Zero(spec.layer_sizes[l + 1], spec.layer_sizes[l]));
    p.biases.push_back(Vector::Zero(spec.layer_sizes[l + 1]));
  }
  return p;
}

NetworkParams NetworkParams::glorot(const NetworkSpec& spec, Rng& rng) {
  NetworkParams p = zeros(spec);
  for (int l = 0; l < spec.affine_layers(); ++l) {
    const double limit = std::sqrt(6.0 / (spec.layer_sizes[l] + spec.layer_sizes[l + 1]));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix& w = p.weights[l];
    // Row-major fill so the draw order is independent of Eigen's storage order.
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
  }
  return p;
}

bool NetworkParams::matches(const NetworkSpec& spec) const {
  if (static_cast<int>(weights.size()) != spec.affine_layers() || biases.size() != weights.size()) return false;
  for (int l = 0; l < spec.affine_layers(); ++l) {
    if (weights[l].rows() != spec.layer_sizes[l + 1] || weights[l].cols() != spec.layer_sizes[l]) return false;
    if (biases[l].size() != spec.layer_sizes[l + 1]) return false;
  }
  return true;
}

bool NetworkParams::same_shape(const NetworkParams& other) const {
  if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != other.weights[l].rows() || weights[l].cols() != other.weights[l].cols()) return false;
    if (biases[l].size() != other.biases[l].size()) return false;
  }
  return true;
}

bool NetworkParams::all_finite() const {
  for (const auto& w : weights)
    if (!w.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return true;
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

bool NetworkParams::operator==(const NetworkParams& other) const {
  if (!same_shape(other)) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l] != other.weights[l] || biases[l] != other.biases[l]) return false;
  }
  return true;
}

Vector forward(const NetworkParams& params, const NetworkSpec& spec, const Vector& input) {
  return forward_batch(params, spec, Matrix(input)).col(0);
}

Matrix forward_batch(const NetworkParams& params, const NetworkSpec& spec, const Matrix& inputs) {
  check_input(params, spec, inputs);
  Matrix a = inputs;
  for (int l = 0; l < spec.affine_layers(); ++l) {
    Matrix z = params.weights[l] * a;
    z.colwise() += params.biases[l];
    apply_activation(activation_of_layer(spec, l), z);
    a = std::move(z);
  }
  return a;
}

Matrix forward_batch(const NetworkParams& params, const NetworkSpec& spec, const Matrix& inputs,
                     ForwardCache& cache) {
  check_input(params, spec, inputs);
  cache.activations.resize(spec.layer_sizes.size());
  cache.activations[0] = inputs;
  for (int l = 0; l < spec.affine_layers(); ++l) {
    Matrix& z = cache.activations[l + 1];
    z.noalias() = params.weights[l] * cache.activations[l];
    z.colwise() += params.biases[l];
    apply_activation(activation_of_layer(spec, l), z);
  }
  return cache.activations.back();
}

Gradients backward(const NetworkParams& params, const NetworkSpec& spec, const ForwardCache& cache,
                   const Matrix& output_adjoint) {
  if (cache.activations.size() != spec.layer_sizes.size()) throw std::invalid_argument("backward: stale forward cache");
  const Matrix& out = cache.activations.back();
  if (output_adjoint.rows() != out.rows() || output_adjoint.cols() != out.cols()) {
    throw std::invalid_argument("backward: adjoint is " + shape_of(output_adjoint) + ", output is " + shape_of(out));
  }
  if (!output_adjoint.allFinite()) throw std::invalid_argument("backward: non-finite loss adjoint");

  Gradients g;
  g.params = NetworkParams::zeros(spec);
  Matrix delta = output_adjoint;
  for (int l = spec.affine_layers() - 1; l >= 0; --l) {
    scale_by_derivative(activation_of_layer(spec, l), cache.activations[l + 1], delta);
    g.params.weights[l].noalias() = delta * cache.activations[l].transpose();
    g.params.biases[l] = delta.rowwise().sum();
    Matrix prev = params.weights[l].transpose() * delta;
    delta = std::move(prev);
  }
  g.input = std::move(delta);
  return g;
}

Gradients gradients(const NetworkParams& params, const NetworkSpec& spec, const Matrix& inputs,
                    const Matrix& output_adjoint) {
  ForwardCache cache;
  forward_batch(params, spec, inputs, cache);
  return backward(params, spec, cache, output_adjoint);
}

AdamState AdamState::for_params(const NetworkSpec& spec, double learning_rate) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("Adam learning rate must be positive");
  AdamState s;
  s.first_moment = NetworkParams::zeros(spec);
  s.second_moment = NetworkParams::zeros(spec);
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(AdamState& state, NetworkParams& params, const NetworkParams& grads) {
  if (!grads.same_shape(params) || !state.first_moment.same_shape(params)) {
    throw std::invalid_argument("adam_step: gradient/parameter shape mismatch");
  }
  if (!grads.all_finite()) throw std::invalid_argument("adam_step: non-finite gradients");

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1, b2 = state.beta2, lr = state.learning_rate, eps = state.epsilon;

  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    update(params.weights[l], state.first_moment.weights[l], state.second_moment.weights[l], grads.weights[l]);
    update(params.biases[l], state.first_moment.biases[l], state.second_moment.biases[l], grads.biases[l]);
  }
}

void soft_update(NetworkParams& target, const NetworkParams& source, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("soft_update: rate must lie in [0, 1]");
  if (!target.same_shape(source)) throw std::invalid_argument("soft_update: shape mismatch");
  for (std::size_t l = 0; l < target.weights.size(); ++l) {
    target.weights[l] = rate * source.weights[l] + (1.0 - rate) * target.weights[l];
    target.biases[l] = rate * source.biases[l] + (1.0 - rate) * target.biases[l];
  }
}

Trainable::Trainable(NetworkSpec s, double learning_rate, Rng& rng)
    : spec(std::move(s)), params(NetworkParams::glorot(spec, rng)),
      optimizer(AdamState::for_params(spec, learning_rate)) {}

void write_network(std::ostream& out, const NetworkSpec& spec, const NetworkParams& params) {
  if (!params.matches(spec)) throw std::invalid_argument("write_network: parameters do not match spec");
  std::string line = "network layers=";
  for (std::size_t i = 0; i < spec.layer_sizes.size(); ++i) {
    if (i) line += ',';
    line += std::to_string(spec.layer_sizes[i]);
  }
  line += " hidden=" + to_string(spec.hidden_activation) + " output=" + to_string(spec.output_activation) + "\n";
  out << line;
  for (int l = 0; l < spec.affine_layers(); ++l) {
    const Matrix& w = params.weights[l];
    line = "W" + std::to_string(l) + " " + std::to_string(w.rows()) + " " + std::to_string(w.cols());
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        line += ' ';
        text::append_double(line, w(r, c));
      }
    }
    out << line << '\n';
    const Vector& b = params.biases[l];
    line = "b" + std::to_string(l) + " " + std::to_string(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      line += ' ';
      text::append_double(line, b(i));
    }
    out << line << '\n';
  }
}

namespace {

std::vector<std::string_view> tokens_of(std::string_view line) {
  std::vector<std::string_view> out;
  for (auto t : text::split(line, ' '))
    if (!t.empty()) out.push_back(t);
  return out;
}

long long expect_int(std::string_view token, const char* what) {
  auto v = text::parse_int(token);
  if (!v) throw std::runtime_error(std::string("checkpoint: bad ") + what + " '" + std::string(token) + "'");
  return *v;
}

double expect_double(std::string_view token) {
  auto v = text::parse_double(token);
  if (!v) throw std::runtime_error("checkpoint: bad value '" + std::string(token) + "'");
  return *v;
}

}  // namespace

void read_network(std::istream& in, NetworkSpec& spec, NetworkParams& params) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("checkpoint: missing network header");
  auto head = tokens_of(line);
  if (head.size() != 4 || head[0] != "network") throw std::runtime_error("checkpoint: malformed header '" + line + "'");
  NetworkSpec s;
  for (std::size_t i = 1; i < head.size(); ++i) {
    const auto eq = head[i].find('=');
    if (eq == std::string_view::npos) throw std::runtime_error("checkpoint: malformed header field");
    const auto key = head[i].substr(0, eq);
    const auto value = head[i].substr(eq + 1);
    if (key == "layers") {
      for (auto t : text::split(value, ',')) s.layer_sizes.push_back(static_cast<int>(expect_int(t, "layer size")));
    } else if (key == "hidden") {
      s.hidden_activation = parse_activation(value);
    } else if (key == "output") {
      s.output_activation = parse_activation(value);
    } else {
      throw std::runtime_error("checkpoint: unknown header field '" + std::string(key) + "'");
    }
  }
  s.validate();
  NetworkParams p = NetworkParams::zeros(s);
  for (int l = 0; l < s.affine_layers(); ++l) {
    if (!std::getline(in, line)) throw std::runtime_error("checkpoint: truncated network");
    auto w = tokens_of(line);
    Matrix& mw = p.weights[l];
    if (w.size() < 3 || w[0] != "W" + std::to_string(l) || expect_int(w[1], "rows") != mw.rows() ||
        expect_int(w[2], "cols") != mw.cols() || static_cast<Eigen::Index>(w.size()) != 3 + mw.size()) {
      throw std::runtime_error("checkpoint: malformed weight tensor W" + std::to_string(l));
    }
    std::size_t idx = 3;
    for (Eigen::Index r = 0; r < mw.rows(); ++r)
      for (Eigen::Index c = 0; c < mw.cols(); ++c) mw(r, c) = expect_double(w[idx++]);

    if (!std::getline(in, line)) throw std::runtime_error("checkpoint: truncated network");
    auto b = tokens_of(line);
    Vector& vb = p.biases[l];
    if (b.size() < 2 || b[0] != "b" + std::to_string(l) || expect_int(b[1], "length") != vb.size() ||
        static_cast<Eigen::Index>(b.size()) != 2 + vb.size()) {
      throw std::runtime_error("checkpoint: malformed bias tensor b" + std::to_string(l));
    }
    for (Eigen::Index i = 0; i < vb.size(); ++i) vb(i) = expect_double(b[2 + i]);
  }
  spec = std::move(s);
  params = std::move(p);
}

}  // namespace mtf::nn
