// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sepred/errors.hpp"

namespace sepred {

enum class Activation { Selu, Sigmoid, Linear };
enum class InitScheme { LecunNormal, GlorotNormal };

// SeLU constants from the self-normalizing-networks defaults.
inline constexpr double kSeluAlpha = 1.6732632423543772;
inline constexpr double kSeluLambda = 1.0507009873554805;

inline double selu(double x) {
  return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
}

inline double selu_derivative(double x) {
  return x > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double apply_activation(Activation act, double x) {
  switch (act) {
    case Activation::Selu: return selu(x);
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Linear: return x;
  }
  return x;
}

inline double activation_derivative(Activation act, double pre) {
  switch (act) {
    case Activation::Selu: return selu_derivative(pre);
    case Activation::Sigmoid: {
      double s = sigmoid(pre);
      return s * (1.0 - s);
    }
    case Activation::Linear: return 1.0;
  }
  return 1.0;
}

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::Linear;
};

struct MlpParams {
  std::vector<Layer> layers;

  int input_dim() const { return static_cast<int>(layers.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().weight.rows()); }
};

/// Draws a weight matrix with the given variance scheme; biases are zeroed
/// by make_mlp.
inline Eigen::MatrixXd init_weights(int rows, int cols, InitScheme scheme,
                                    std::mt19937_64& rng) {
  if (rows <= 0 || cols <= 0)
    throw DataError("init_weights: non-positive dimensions");
  const int fan_in = cols;
  const int fan_out = rows;
  double variance = scheme == InitScheme::LecunNormal
                        ? 1.0 / fan_in
                        : 2.0 / (fan_in + fan_out);
  std::normal_distribution<double> dist(0.0, std::sqrt(variance));
  Eigen::MatrixXd w(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = dist(rng);
  return w;
}

/// Builds an MLP from a dimension chain [in, h1, ..., out]; every layer uses
/// `hidden` activation except the last, which uses `output`.
inline MlpParams make_mlp(const std::vector<int>& dims, Activation hidden,
                          Activation output, InitScheme scheme,
                          std::mt19937_64& rng) {
  if (dims.size() < 2) throw DataError("make_mlp: need at least two dims");
  MlpParams mlp;
  for (size_t t = 0; t + 1 < dims.size(); ++t) {
    Layer layer;
    layer.weight = init_weights(dims[t + 1], dims[t], scheme, rng);
    layer.bias = Eigen::VectorXd::Zero(dims[t + 1]);
    layer.activation = (t + 2 == dims.size()) ? output : hidden;
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

// Forward cache: per-layer inputs and pre-activations, batch rows.
struct MlpCache {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> preacts;
};

inline Eigen::MatrixXd mlp_forward(const MlpParams& mlp,
                                   const Eigen::MatrixXd& input,
                                   MlpCache* cache = nullptr) {
  if (input.cols() != mlp.input_dim())
    throw DataError("mlp_forward: input dim " + std::to_string(input.cols()) +
                    " does not match first layer " +
                    std::to_string(mlp.input_dim()));
  Eigen::MatrixXd x = input;
  if (cache) {
    cache->inputs.clear();
    cache->preacts.clear();
  }
  for (const auto& layer : mlp.layers) {
    if (cache) cache->inputs.push_back(x);
    Eigen::MatrixXd z =
        (x * layer.weight.transpose()).rowwise() + layer.bias.transpose();
    if (cache) cache->preacts.push_back(z);
    x = z.unaryExpr([&](double v) { return apply_activation(layer.activation, v); });
  }
  return x;
}

struct MlpGrads {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  static MlpGrads zeros_like(const MlpParams& mlp) {
    MlpGrads g;
    for (const auto& layer : mlp.layers) {
      g.weight.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(),
                                               layer.weight.cols()));
      g.bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
    }
    return g;
  }

  MlpGrads& operator+=(const MlpGrads& other) {
    for (size_t i = 0; i < weight.size(); ++i) {
      weight[i] += other.weight[i];
      bias[i] += other.bias[i];
    }
    return *this;
  }

  MlpGrads& operator*=(double s) {
    for (size_t i = 0; i < weight.size(); ++i) {
      weight[i] *= s;
      bias[i] *= s;
    }
    return *this;
  }
};

/// Reverse pass; accumulates parameter gradients into `grads` and returns
/// the gradient with respect to the layer-stack input.
inline Eigen::MatrixXd mlp_backward(const MlpParams& mlp, const MlpCache& cache,
                                    const Eigen::MatrixXd& upstream,
                                    MlpGrads& grads) {
  if (cache.inputs.size() != mlp.layers.size())
    throw DataError("mlp_backward: cache does not match parameters");
  Eigen::MatrixXd d = upstream;
  for (int t = static_cast<int>(mlp.layers.size()) - 1; t >= 0; --t) {
    const Layer& layer = mlp.layers[t];
    const Eigen::MatrixXd& z = cache.preacts[t];
    Eigen::MatrixXd dz =
        d.array() * z.unaryExpr([&](double v) {
                       return activation_derivative(layer.activation, v);
                     }).array();
    grads.weight[t] += dz.transpose() * cache.inputs[t];
    grads.bias[t] += dz.colwise().sum().transpose();
    d = dz * layer.weight;
  }
  return d;
}

inline constexpr double kBceClip = 1e-7;

/// Mean binary cross-entropy over all entries, with the gradient w.r.t. the
/// (clipped) predictions.
inline std::pair<double, Eigen::VectorXd> bce_loss(const Eigen::VectorXd& pred,
                                                   const Eigen::VectorXd& target) {
  if (pred.size() != target.size())
    throw DataError("bce_loss: shape mismatch");
  const auto n = pred.size();
  double loss = 0.0;
  Eigen::VectorXd grad(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = std::clamp(pred[i], kBceClip, 1.0 - kBceClip);
    double t = target[i];
    loss += -(t * std::log(p) + (1.0 - t) * std::log1p(-p));
    grad[i] = (-t / p + (1.0 - t) / (1.0 - p)) / static_cast<double>(n);
  }
  return {loss / static_cast<double>(n), grad};
}

// Named view over one contiguous parameter (or gradient) tensor.
struct TensorRef {
  std::string name;
  double* data = nullptr;
  Eigen::Index size = 0;
};

inline void collect_tensor_refs(MlpParams& mlp, const std::string& prefix,
                                std::vector<TensorRef>& out) {
  for (size_t t = 0; t < mlp.layers.size(); ++t) {
    auto& layer = mlp.layers[t];
    out.push_back({prefix + ".layer" + std::to_string(t) + ".weight",
                   layer.weight.data(), layer.weight.size()});
    out.push_back({prefix + ".layer" + std::to_string(t) + ".bias",
                   layer.bias.data(), layer.bias.size()});
  }
}

inline void collect_tensor_refs(MlpGrads& grads, const std::string& prefix,
                                std::vector<TensorRef>& out) {
  for (size_t t = 0; t < grads.weight.size(); ++t) {
    out.push_back({prefix + ".layer" + std::to_string(t) + ".weight",
                   grads.weight[t].data(), grads.weight[t].size()});
    out.push_back({prefix + ".layer" + std::to_string(t) + ".bias",
                   grads.bias[t].data(), grads.bias[t].size()});
  }
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

// Bias-corrected Adam over a fixed list of parameter tensors.
class AdamState {
public:
  explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

  long step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  void step(const std::vector<TensorRef>& params,
            const std::vector<TensorRef>& grads) {
    if (params.size() != grads.size())
      throw DataError("adam_step: parameter/gradient list mismatch");
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(Eigen::ArrayXd::Zero(p.size));
        v_.emplace_back(Eigen::ArrayXd::Zero(p.size));
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
      Eigen::Map<Eigen::ArrayXd> theta(params[i].data, params[i].size);
      Eigen::Map<const Eigen::ArrayXd> g(grads[i].data, grads[i].size);
      if (!g.isFinite().all())
        throw NumericalError("non-finite gradient in " + grads[i].name);
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.square();
      theta -= cfg_.learning_rate * (m_[i] / bc1) /
               ((v_[i] / bc2).sqrt() + cfg_.epsilon);
    }
  }

private:
  AdamConfig cfg_;
  std::vector<Eigen::ArrayXd> m_, v_;
  long t_ = 0;
};

}  // namespace sepred
