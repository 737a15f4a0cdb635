#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

// Minimal dense feedforward network with backpropagation through both
// weights and inputs, Adam, and log-cosh loss. The Q function is a map
// (state, action) -> [0, 1], so the head is a single sigmoid unit.

namespace dqs {

enum class Activation { Tanh, Relu, Sigmoid };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
  }
  throw std::logic_error("unreachable");
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw std::invalid_argument("unknown activation: " + s);
}

namespace detail {

inline Eigen::ArrayXXd activate(const Eigen::ArrayXXd& z, Activation act) {
  switch (act) {
    case Activation::Tanh: return z.tanh();
    case Activation::Relu: return z.max(0.0);
    case Activation::Sigmoid: return 0.5 * (0.5 * z).tanh() + 0.5;
  }
  throw std::logic_error("unreachable");
}

// Derivative in terms of pre-activation z and activation value a.
// The relu subgradient at exactly 0 is 0.
inline Eigen::ArrayXXd activate_grad(const Eigen::ArrayXXd& z,
                                     const Eigen::ArrayXXd& a, Activation act) {
  switch (act) {
    case Activation::Tanh: return 1.0 - a.square();
    case Activation::Relu: return (z > 0.0).cast<double>();
    case Activation::Sigmoid: return a * (1.0 - a);
  }
  throw std::logic_error("unreachable");
}

// Allocation-free variants for preallocated workspaces.

inline void activate_into(const Eigen::MatrixXd& z, Activation act,
                          Eigen::MatrixXd& a) {
  a.resize(z.rows(), z.cols());
  switch (act) {
    case Activation::Tanh: a.array() = z.array().tanh(); return;
    case Activation::Relu: a.array() = z.array().max(0.0); return;
    case Activation::Sigmoid:
      a.array() = 0.5 * (0.5 * z.array()).tanh() + 0.5;
      return;
  }
  throw std::logic_error("unreachable");
}

// out = f'(z, a); `out` must not alias z or a.
inline void activate_grad_into(const Eigen::MatrixXd& z,
                               const Eigen::MatrixXd& a, Activation act,
                               Eigen::MatrixXd& out) {
  out.resize(z.rows(), z.cols());
  switch (act) {
    case Activation::Tanh: out.array() = 1.0 - a.array().square(); return;
    case Activation::Relu:
      out.array() = (z.array() > 0.0).cast<double>();
      return;
    case Activation::Sigmoid: out.array() = a.array() * (1.0 - a.array()); return;
  }
  throw std::logic_error("unreachable");
}

// delta = back .* f'(z, a); `delta` must not alias the inputs.
inline void backprop_through_activation(const Eigen::MatrixXd& z,
                                        const Eigen::MatrixXd& a,
                                        Activation act,
                                        const Eigen::MatrixXd& back,
                                        Eigen::MatrixXd& delta) {
  delta.resize(back.rows(), back.cols());
  switch (act) {
    case Activation::Tanh:
      delta.array() = back.array() * (1.0 - a.array().square());
      return;
    case Activation::Relu:
      delta.array() = back.array() * (z.array() > 0.0).cast<double>();
      return;
    case Activation::Sigmoid:
      delta.array() = back.array() * a.array() * (1.0 - a.array());
      return;
  }
  throw std::logic_error("unreachable");
}

}  // namespace detail

/// log cosh, stable for large arguments: |d| + log1p(e^{-2|d|}) - log 2.
inline double logcosh(double d) {
  const double a = std::abs(d);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

class Mlp {
 public:
  struct Layer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd bias;
    Activation act;
  };

  /// Glorot-uniform weights, zero biases. dims = {input, h1, ..., 1};
  /// the final layer must be a single sigmoid.
  static Mlp make(const std::vector<int>& dims,
                  const std::vector<Activation>& acts, std::mt19937_64& rng) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1) {
      throw std::invalid_argument("Mlp::make: dims/activations mismatch");
    }
    if (dims.back() != 1 || acts.back() != Activation::Sigmoid) {
      throw std::invalid_argument(
          "Mlp::make: final layer must be one sigmoid unit");
    }
    Mlp net;
    net.input_dim_ = dims.front();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      Layer layer;
      const int fan_in = dims[l];
      const int fan_out = dims[l + 1];
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> u(-bound, bound);
      layer.weights.resize(fan_out, fan_in);
      for (Eigen::Index r = 0; r < fan_out; ++r) {
        for (Eigen::Index c = 0; c < fan_in; ++c) layer.weights(r, c) = u(rng);
      }
      layer.bias = Eigen::VectorXd::Zero(fan_out);
      layer.act = acts[l];
      net.layers_.push_back(std::move(layer));
    }
    return net;
  }

  int input_dim() const { return input_dim_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  double forward(const Eigen::VectorXd& x) const {
    if (x.size() != input_dim_) {
      throw std::invalid_argument("Mlp::forward: input size mismatch");
    }
    Eigen::VectorXd a = x;
    for (const Layer& layer : layers_) {
      const Eigen::VectorXd z = layer.weights * a + layer.bias;
      a = detail::activate(z.array(), layer.act).matrix();
    }
    return a(0);
  }

  /// Batched evaluation; rows of x are samples.
  Eigen::VectorXd forward_batch(const Eigen::MatrixXd& x) const {
    if (x.cols() != input_dim_) {
      throw std::invalid_argument("Mlp::forward_batch: input size mismatch");
    }
    Eigen::MatrixXd a = x;
    for (const Layer& layer : layers_) {
      Eigen::MatrixXd z = a * layer.weights.transpose();
      z.rowwise() += layer.bias.transpose();
      a = detail::activate(z.array(), layer.act).matrix();
    }
    return a.col(0);
  }

  struct BackwardResult {
    double output = 0.0;
    double loss = 0.0;
    Gradients gradients;
    Eigen::VectorXd input_gradient;
  };

  /// Gradients of logcosh(output - target) with respect to every
  /// parameter and every input coordinate.
  BackwardResult backward(const Eigen::VectorXd& x, double target) const {
    BackwardResult result = backprop(x, 0.0, &target);
    return result;
  }

  struct ValueGrad {
    double value = 0.0;
    Eigen::VectorXd input_gradient;
  };

  /// d(output)/d(input), no loss attached.
  ValueGrad value_and_input_gradient(const Eigen::VectorXd& x) const {
    BackwardResult r = backprop(x, 1.0, nullptr);
    return ValueGrad{r.output, std::move(r.input_gradient)};
  }

  /// Batched output values and input gradients; rows are samples.
  void batch_value_and_input_gradient(const Eigen::MatrixXd& x,
                                      Eigen::VectorXd& values,
                                      Eigen::MatrixXd& input_grads) const {
    if (x.cols() != input_dim_) {
      throw std::invalid_argument("Mlp::batch gradient: input size mismatch");
    }
    const std::size_t depth = layers_.size();
    std::vector<Eigen::MatrixXd> zs(depth);
    std::vector<Eigen::MatrixXd> as(depth + 1);
    as[0] = x;
    for (std::size_t l = 0; l < depth; ++l) {
      zs[l] = as[l] * layers_[l].weights.transpose();
      zs[l].rowwise() += layers_[l].bias.transpose();
      as[l + 1] =
          detail::activate(zs[l].array(), layers_[l].act).matrix();
    }
    values = as[depth].col(0);
    // seed d(out)/d(out) = 1 per row and pull back
    Eigen::MatrixXd delta =
        detail::activate_grad(zs[depth - 1].array(), as[depth].array(),
                              layers_[depth - 1].act)
            .matrix();
    for (std::size_t l = depth - 1; l > 0; --l) {
      Eigen::MatrixXd back = delta * layers_[l].weights;
      delta = (back.array() * detail::activate_grad(zs[l - 1].array(),
                                                    as[l].array(),
                                                    layers_[l - 1].act))
                  .matrix();
    }
    input_grads = delta * layers_[0].weights;
  }

 private:
  BackwardResult backprop(const Eigen::VectorXd& x, double seed,
                          const double* target) const {
    if (x.size() != input_dim_) {
      throw std::invalid_argument("Mlp::backward: input size mismatch");
    }
    const std::size_t depth = layers_.size();
    std::vector<Eigen::VectorXd> zs(depth);
    std::vector<Eigen::VectorXd> as(depth + 1);
    as[0] = x;
    for (std::size_t l = 0; l < depth; ++l) {
      zs[l] = layers_[l].weights * as[l] + layers_[l].bias;
      as[l + 1] = detail::activate(zs[l].array(), layers_[l].act).matrix();
    }
    BackwardResult result;
    result.output = as[depth](0);
    double upstream = seed;
    if (target != nullptr) {
      const double diff = result.output - *target;
      result.loss = logcosh(diff);
      upstream = std::tanh(diff);  // d logcosh
    }
    result.gradients.weights.resize(depth);
    result.gradients.biases.resize(depth);
    Eigen::VectorXd delta =
        upstream * detail::activate_grad(zs[depth - 1].array(),
                                         as[depth].array(),
                                         layers_[depth - 1].act)
                       .matrix();
    for (std::size_t l = depth; l-- > 0;) {
      result.gradients.weights[l] = delta * as[l].transpose();
      result.gradients.biases[l] = delta;
      if (l > 0) {
        const Eigen::VectorXd back = layers_[l].weights.transpose() * delta;
        delta = (back.array() * detail::activate_grad(zs[l - 1].array(),
                                                      as[l].array(),
                                                      layers_[l - 1].act))
                    .matrix();
      } else {
        result.input_gradient = layers_[0].weights.transpose() * delta;
      }
    }
    return result;
  }

  int input_dim_ = 0;
  std::vector<Layer> layers_;
};

struct AdamState {
  std::vector<Eigen::MatrixXd> m_weights, v_weights;
  std::vector<Eigen::VectorXd> m_biases, v_biases;
  long step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState init(const Mlp& net, double learning_rate = 1e-3) {
    AdamState s;
    s.learning_rate = learning_rate;
    for (const auto& layer : net.layers()) {
      s.m_weights.emplace_back(
          Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
      s.v_weights.emplace_back(
          Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
      s.m_biases.emplace_back(Eigen::VectorXd::Zero(layer.bias.size()));
      s.v_biases.emplace_back(Eigen::VectorXd::Zero(layer.bias.size()));
    }
    return s;
  }
};

/// One Adam update with bias correction.
inline void adam_step(Mlp& net, AdamState& state, const Gradients& grads) {
  auto& layers = net.layers();
  if (grads.weights.size() != layers.size() ||
      grads.biases.size() != layers.size()) {
    throw std::invalid_argument("adam_step: gradient shape mismatch");
  }
  state.step += 1;
  const double correction1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double correction2 = 1.0 - std::pow(state.beta2, double(state.step));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (grads.weights[l].rows() != layers[l].weights.rows() ||
        grads.weights[l].cols() != layers[l].weights.cols()) {
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    }
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
      m = state.beta1 * m + (1.0 - state.beta1) * g;
      v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
      const auto m_hat = m.array() / correction1;
      const auto v_hat = v.array() / correction2;
      param.array() -=
          state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    };
    update(layers[l].weights, state.m_weights[l], state.v_weights[l],
           grads.weights[l]);
    update(layers[l].bias, state.m_biases[l], state.v_biases[l],
           grads.biases[l]);
  }
}

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index rows = Eigen::Index(j.size());
  const Eigen::Index cols = rows > 0 ? Eigen::Index(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(Eigen::Index(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

}  // namespace detail

/// Write `content` to `path` atomically (temp file in the same directory,
/// then rename).
inline void atomic_write_file(const std::filesystem::path& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path dir = path.has_parent_path() ? path.parent_path() : ".";
  const fs::path tmp = dir / (path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    }
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

/// Checkpoint of a network plus optimizer and an opaque RNG state string.
inline void save_checkpoint(const Mlp& net, const AdamState& adam,
                            const std::string& rng_state,
                            const std::filesystem::path& path) {
  nlohmann::json j;
  j["dims"] = nlohmann::json::array();
  j["dims"].push_back(net.input_dim());
  for (const auto& layer : net.layers()) {
    j["dims"].push_back(int(layer.weights.rows()));
  }
  j["activations"] = nlohmann::json::array();
  j["weights"] = nlohmann::json::array();
  j["biases"] = nlohmann::json::array();
  for (const auto& layer : net.layers()) {
    j["activations"].push_back(to_string(layer.act));
    j["weights"].push_back(detail::matrix_to_json(layer.weights));
    j["biases"].push_back(detail::vector_to_json(layer.bias));
  }
  nlohmann::json a;
  a["step"] = adam.step;
  a["learning_rate"] = adam.learning_rate;
  a["beta1"] = adam.beta1;
  a["beta2"] = adam.beta2;
  a["epsilon"] = adam.epsilon;
  a["m_weights"] = nlohmann::json::array();
  a["v_weights"] = nlohmann::json::array();
  a["m_biases"] = nlohmann::json::array();
  a["v_biases"] = nlohmann::json::array();
  for (std::size_t l = 0; l < adam.m_weights.size(); ++l) {
    a["m_weights"].push_back(detail::matrix_to_json(adam.m_weights[l]));
    a["v_weights"].push_back(detail::matrix_to_json(adam.v_weights[l]));
    a["m_biases"].push_back(detail::vector_to_json(adam.m_biases[l]));
    a["v_biases"].push_back(detail::vector_to_json(adam.v_biases[l]));
  }
  j["adam"] = std::move(a);
  j["rng_state"] = rng_state;
  atomic_write_file(path, j.dump(2) + "\n");
}

struct Checkpoint {
  Mlp net;
  AdamState adam;
  std::string rng_state;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json j = nlohmann::json::parse(in);

  const auto dims = j.at("dims").get<std::vector<int>>();
  std::vector<Activation> acts;
  for (const auto& s : j.at("activations")) {
    acts.push_back(activation_from_string(s.get<std::string>()));
  }
  std::mt19937_64 dummy(0);
  Checkpoint ckpt{Mlp::make(dims, acts, dummy), AdamState{}, {}};
  auto& layers = ckpt.net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weights = detail::matrix_from_json(j.at("weights").at(l));
    layers[l].bias = detail::vector_from_json(j.at("biases").at(l));
  }
  const auto& a = j.at("adam");
  ckpt.adam.step = a.at("step").get<long>();
  ckpt.adam.learning_rate = a.at("learning_rate").get<double>();
  ckpt.adam.beta1 = a.at("beta1").get<double>();
  ckpt.adam.beta2 = a.at("beta2").get<double>();
  ckpt.adam.epsilon = a.at("epsilon").get<double>();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    ckpt.adam.m_weights.push_back(detail::matrix_from_json(a.at("m_weights").at(l)));
    ckpt.adam.v_weights.push_back(detail::matrix_from_json(a.at("v_weights").at(l)));
    ckpt.adam.m_biases.push_back(detail::vector_from_json(a.at("m_biases").at(l)));
    ckpt.adam.v_biases.push_back(detail::vector_from_json(a.at("v_biases").at(l)));
  }
  ckpt.rng_state = j.value("rng_state", std::string{});
  return ckpt;
}

}  // namespace dqs
