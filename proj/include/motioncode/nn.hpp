#pragma once

// Dense networks with manual backprop, softmax/cross-entropy, Adam and a
// central-difference gradient checker. Everything is double precision and
// batches are stored column-wise (features x batch).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "motioncode/error.hpp"

namespace motioncode::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class Activation { Identity, RectifiedLinear };

inline const char* to_string(Activation a) {
  return a == Activation::RectifiedLinear ? "relu" : "identity";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::RectifiedLinear;
  if (s == "identity") return Activation::Identity;
  throw Error(ErrorKind::ParseError, "unknown activation '" + s + "'");
}

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::Identity;

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.activation == b.activation && a.weight.rows() == b.weight.rows() &&
           a.weight.cols() == b.weight.cols() && a.weight == b.weight && a.bias == b.bias;
  }
};

struct DenseParams {
  std::vector<DenseLayer> layers;

  Index input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
  Index output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  /// Adjacent layers chain and every value is finite.
  void validate() const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.bias.size() != l.weight.rows()) {
        throw Error(ErrorKind::ShapeMismatch, "layer " + std::to_string(i) + " bias size");
      }
      if (i > 0 && layers[i - 1].weight.rows() != l.weight.cols()) {
        throw Error(ErrorKind::ShapeMismatch, "layer " + std::to_string(i) + " input size");
      }
      if (!l.weight.allFinite() || !l.bias.allFinite()) {
        throw Error(ErrorKind::ShapeMismatch, "layer " + std::to_string(i) + " has non-finite values");
      }
    }
  }

  /// Same shapes, all zeros.
  DenseParams zeros_like() const {
    DenseParams out = *this;
    for (auto& l : out.layers) {
      l.weight.setZero();
      l.bias.setZero();
    }
    return out;
  }

  friend bool operator==(const DenseParams&, const DenseParams&) = default;
};

inline bool same_shape(const DenseParams& a, const DenseParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].weight.rows() != b.layers[i].weight.rows() ||
        a.layers[i].weight.cols() != b.layers[i].weight.cols() ||
        a.layers[i].bias.size() != b.layers[i].bias.size()) {
      return false;
    }
  }
  return true;
}

/// Layers of sizes dims[0] -> dims[1] -> ... ; hidden layers use `hidden`,
/// the last one `output`. Weights are Glorot-uniform, biases zero.
inline DenseParams make_dense(std::span<const std::size_t> dims, std::mt19937_64& rng,
                              Activation hidden = Activation::RectifiedLinear,
                              Activation output = Activation::Identity) {
  if (dims.size() < 2) throw Error(ErrorKind::ShapeMismatch, "need at least input and output sizes");
  DenseParams params;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const auto fan_in = static_cast<Index>(dims[i]);
    const auto fan_out = static_cast<Index>(dims[i + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer;
    layer.weight.resize(fan_out, fan_in);
    // Row-major fill so the draw order does not depend on storage order.
    for (Index r = 0; r < fan_out; ++r) {
      for (Index c = 0; c < fan_in; ++c) layer.weight(r, c) = dist(rng);
    }
    layer.bias = Vector::Zero(fan_out);
    layer.activation = (i + 2 == dims.size()) ? output : hidden;
    params.layers.push_back(std::move(layer));
  }
  return params;
}

inline DenseParams make_dense(std::initializer_list<std::size_t> dims, std::mt19937_64& rng,
                              Activation hidden = Activation::RectifiedLinear,
                              Activation output = Activation::Identity) {
  return make_dense(std::span<const std::size_t>(dims.begin(), dims.size()), rng, hidden, output);
}

struct ForwardCache {
  std::vector<Matrix> inputs;          // input to each layer
  std::vector<Matrix> pre_activations;  // affine output of each layer
};

/// `input` is (input_dim x batch). Returns (output_dim x batch).
inline Matrix forward(const DenseParams& params, const Matrix& input, ForwardCache* cache = nullptr) {
  if (params.layers.empty()) return input;
  if (input.rows() != params.input_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "input has " + std::to_string(input.rows()) +
                                                  " rows, network expects " +
                                                  std::to_string(params.input_dim()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre_activations.clear();
  }
  Matrix x = input;
  for (const auto& layer : params.layers) {
    Matrix z = layer.weight * x;
    z.colwise() += layer.bias;
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->pre_activations.push_back(z);
    }
    x = layer.activation == Activation::RectifiedLinear ? Matrix(z.cwiseMax(0.0)) : std::move(z);
  }
  return x;
}

inline Vector forward(const DenseParams& params, const Vector& input) {
  return forward(params, Matrix(input)).col(0);
}

struct BackwardResult {
  DenseParams grads;
  Matrix input_grad;
};

/// `output_grad` is dLoss/d(output of the last layer), same shape as the
/// forward output. Gradients are summed over the batch columns.
inline BackwardResult backward(const DenseParams& params, const ForwardCache& cache,
                               const Matrix& output_grad) {
  BackwardResult result{params.zeros_like(), Matrix()};
  if (cache.inputs.size() != params.layers.size()) {
    throw Error(ErrorKind::ShapeMismatch, "forward cache does not match the network");
  }
  Matrix delta = output_grad;
  for (std::size_t i = params.layers.size(); i-- > 0;) {
    const auto& layer = params.layers[i];
    if (layer.activation == Activation::RectifiedLinear) {
      delta = delta.cwiseProduct((cache.pre_activations[i].array() > 0.0).cast<double>().matrix());
    }
    result.grads.layers[i].weight.noalias() = delta * cache.inputs[i].transpose();
    result.grads.layers[i].bias = delta.rowwise().sum();
    delta = layer.weight.transpose() * delta;
  }
  result.input_grad = std::move(delta);
  return result;
}

/// Stable softmax (max-subtracted).
inline Vector softmax(const Vector& logits) {
  const double shift = logits.maxCoeff();
  Vector e = (logits.array() - shift).exp();
  return e / e.sum();
}

/// Column-wise softmax of (classes x batch).
inline Matrix softmax_columns(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index c = 0; c < logits.cols(); ++c) out.col(c) = softmax(logits.col(c));
  return out;
}

inline constexpr double kProbabilityClip = 1e-12;

inline double cross_entropy(const Vector& probs, std::size_t target) {
  if (target >= static_cast<std::size_t>(probs.size())) {
    throw Error(ErrorKind::TargetOutOfRange,
                std::to_string(target) + " >= " + std::to_string(probs.size()));
  }
  return -std::log(std::max(probs(static_cast<Index>(target)), kProbabilityClip));
}

/// Lowest index wins ties.
inline std::size_t argmax(const Vector& v) {
  std::size_t best = 0;
  for (Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(static_cast<Index>(best))) best = static_cast<std::size_t>(i);
  }
  return best;
}

/// Per-input affine standardisation fitted on training inputs:
/// x' = (x - mean) * scale, scale = 1 / std (1 where std is 0).
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer identity(Index dim) { return {Vector::Zero(dim), Vector::Ones(dim)}; }

  /// `inputs` is (dim x N).
  static Standardizer fit(const Matrix& inputs) {
    const Index dim = inputs.rows();
    if (inputs.cols() == 0) return identity(dim);
    Standardizer s{inputs.rowwise().mean(), Vector::Ones(dim)};
    const Matrix centered = inputs.colwise() - s.mean;
    const Vector var = centered.rowwise().squaredNorm() / static_cast<double>(inputs.cols());
    for (Index i = 0; i < dim; ++i) {
      if (var(i) > 0.0) s.scale(i) = 1.0 / std::sqrt(var(i));
    }
    return s;
  }

  Index dim() const { return mean.size(); }

  Matrix apply(const Matrix& inputs) const {
    if (inputs.rows() != dim()) {
      throw Error(ErrorKind::DimensionMismatch, "standardizer expects " + std::to_string(dim()) +
                                                    " inputs, got " + std::to_string(inputs.rows()));
    }
    return (inputs.colwise() - mean).array().colwise() * scale.array();
  }

  friend bool operator==(const Standardizer& a, const Standardizer& b) {
    return a.mean.size() == b.mean.size() && a.mean == b.mean && a.scale == b.scale;
  }
};

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  DenseParams first_moment;
  DenseParams second_moment;
  std::uint64_t step = 0;
  AdamConfig config;

  static AdamState for_params(const DenseParams& params, AdamConfig config = {}) {
    return AdamState{params.zeros_like(), params.zeros_like(), 0, config};
  }

  friend bool operator==(const AdamState& a, const AdamState& b) {
    return a.step == b.step && a.first_moment == b.first_moment &&
           a.second_moment == b.second_moment && a.config.beta1 == b.config.beta1 &&
           a.config.beta2 == b.config.beta2 && a.config.epsilon == b.config.epsilon;
  }
};

namespace detail {

template <typename Derived>
void adam_update(Eigen::MatrixBase<Derived>& param, const Eigen::MatrixBase<Derived>& grad,
                 Eigen::MatrixBase<Derived>& m, Eigen::MatrixBase<Derived>& v, double lr,
                 double correction1, double correction2, const AdamConfig& cfg) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  param.array() -= lr * (m.array() / correction1) /
                   ((v.array() / correction2).sqrt() + cfg.epsilon);
}

}  // namespace detail

/// One bias-corrected Adam update, in place.
inline void adam_step(DenseParams& params, const DenseParams& grads, AdamState& state, double lr) {
  if (!same_shape(params, grads) || !same_shape(params, state.first_moment) ||
      !same_shape(params, state.second_moment)) {
    throw Error(ErrorKind::ShapeMismatch, "adam_step: parameter, gradient and moment shapes differ");
  }
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.config.beta1, t);
  const double c2 = 1.0 - std::pow(state.config.beta2, t);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    auto& p = params.layers[i];
    auto& m = state.first_moment.layers[i];
    auto& v = state.second_moment.layers[i];
    const auto& g = grads.layers[i];
    detail::adam_update(p.weight, g.weight, m.weight, v.weight, lr, c1, c2, state.config);
    detail::adam_update(p.bias, g.bias, m.bias, v.bias, lr, c1, c2, state.config);
  }
}

/// base * factor^(epoch / every), epochs counted from 0.
inline double step_decay(double base, double factor, std::size_t every, std::size_t epoch) {
  if (every == 0) return base;
  return base * std::pow(factor, static_cast<double>(epoch / every));
}

// ---------------------------------------------------------------------------
// Flat views, used by the gradient checker and checkpoint diffs.

inline std::vector<double> flatten(const DenseParams& params) {
  std::vector<double> out;
  out.reserve(params.parameter_count());
  for (const auto& l : params.layers) {
    for (Index r = 0; r < l.weight.rows(); ++r)
      for (Index c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
    for (Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias(r));
  }
  return out;
}

/// Inverse of flatten; returns the number of values consumed.
inline std::size_t unflatten(DenseParams& params, std::span<const double> values) {
  if (values.size() < params.parameter_count()) {
    throw Error(ErrorKind::ShapeMismatch, "not enough values to fill the network");
  }
  std::size_t k = 0;
  for (auto& l : params.layers) {
    for (Index r = 0; r < l.weight.rows(); ++r)
      for (Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = values[k++];
    for (Index r = 0; r < l.bias.size(); ++r) l.bias(r) = values[k++];
  }
  return k;
}

// ---------------------------------------------------------------------------
// Gradient check

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::vector<double> numeric;
};

/// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps coordinates
/// whose true gradient is ~0 from amplifying finite-difference roundoff.
inline constexpr double kGradCheckFloor = 1e-4;

inline GradCheckResult grad_check(const std::function<double(std::span<const double>)>& loss,
                                  std::span<const double> params, std::span<const double> analytic,
                                  double eps = 1e-5, double floor = kGradCheckFloor) {
  if (params.size() != analytic.size()) {
    throw Error(ErrorKind::ShapeMismatch, "analytic gradient size differs from parameter count");
  }
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidConfig, "eps must be positive");
  GradCheckResult result;
  result.numeric.resize(params.size());
  std::vector<double> w(params.begin(), params.end());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double saved = w[i];
    w[i] = saved + eps;
    const double up = loss(w);
    w[i] = saved - eps;
    const double down = loss(w);
    w[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error(ErrorKind::NonFiniteLoss, "at coordinate " + std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * eps);
    result.numeric[i] = numeric;
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_index = i;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// JSON (row-major arrays)

inline nlohmann::json to_json(const DenseParams& params) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : params.layers) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weight.size()));
    for (Index r = 0; r < l.weight.rows(); ++r)
      for (Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
    layers.push_back({{"in", l.weight.cols()},
                      {"out", l.weight.rows()},
                      {"activation", to_string(l.activation)},
                      {"weight", std::move(w)},
                      {"bias", std::move(b)}});
  }
  return {{"layers", std::move(layers)}};
}

inline DenseParams dense_from_json(const nlohmann::json& j) {
  DenseParams params;
  for (const auto& jl : j.at("layers")) {
    const auto in = jl.at("in").get<Index>();
    const auto out = jl.at("out").get<Index>();
    const auto w = jl.at("weight").get<std::vector<double>>();
    const auto b = jl.at("bias").get<std::vector<double>>();
    if (static_cast<Index>(w.size()) != in * out || static_cast<Index>(b.size()) != out) {
      throw Error(ErrorKind::ShapeMismatch, "checkpoint layer arrays do not match in/out");
    }
    DenseLayer layer;
    layer.weight.resize(out, in);
    for (Index r = 0; r < out; ++r)
      for (Index c = 0; c < in; ++c) layer.weight(r, c) = w[static_cast<std::size_t>(r * in + c)];
    layer.bias = Eigen::Map<const Vector>(b.data(), out);
    layer.activation = activation_from_string(jl.at("activation").get<std::string>());
    params.layers.push_back(std::move(layer));
  }
  params.validate();
  return params;
}

inline nlohmann::json to_json(const Standardizer& s) {
  return {{"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
          {"scale", std::vector<double>(s.scale.data(), s.scale.data() + s.scale.size())}};
}

inline Standardizer standardizer_from_json(const nlohmann::json& j) {
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto scale = j.at("scale").get<std::vector<double>>();
  if (mean.size() != scale.size()) throw Error(ErrorKind::ShapeMismatch, "standardizer arrays differ in size");
  const auto n = static_cast<Index>(mean.size());
  return {Eigen::Map<const Vector>(mean.data(), n), Eigen::Map<const Vector>(scale.data(), n)};
}

inline nlohmann::json to_json(const AdamState& state) {
  return {{"step", state.step},
          {"beta1", state.config.beta1},
          {"beta2", state.config.beta2},
          {"epsilon", state.config.epsilon},
          {"first_moment", to_json(state.first_moment)},
          {"second_moment", to_json(state.second_moment)}};
}

inline AdamState adam_from_json(const nlohmann::json& j) {
  AdamState s;
  s.step = j.at("step").get<std::uint64_t>();
  s.config.beta1 = j.at("beta1").get<double>();
  s.config.beta2 = j.at("beta2").get<double>();
  s.config.epsilon = j.at("epsilon").get<double>();
  s.first_moment = dense_from_json(j.at("first_moment"));
  s.second_moment = dense_from_json(j.at("second_moment"));
  return s;
}

}  // namespace motioncode::nn
