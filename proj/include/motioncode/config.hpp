#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "motioncode/error.hpp"
#include "motioncode/nn.hpp"
#include "motioncode/taxonomy.hpp"

namespace motioncode {

using LambdaWeights = ComponentWeights;

/// Optimisation settings shared by every trainer. Defaults are the embedding
/// and verb-classifier schedule: 3e-4, x0.6 every 5 epochs, 50 epochs.
struct TrainConfig {
  std::uint64_t seed = 1;
  std::size_t hidden_dim = 128;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  double learning_rate = 3e-4;
  double lr_decay = 0.6;
  std::size_t decay_every = 5;
  LambdaWeights lambda = kUnitWeights;
  nn::AdamConfig adam;

  static TrainConfig embedding_defaults() { return {}; }
  static TrainConfig verb_defaults() { return {}; }

  /// Two-layer fusion MLP: 200 epochs at a constant 5e-4.
  static TrainConfig fusion_defaults() {
    TrainConfig c;
    c.hidden_dim = 64;
    c.epochs = 200;
    c.learning_rate = 5e-4;
    c.lr_decay = 1.0;
    c.decay_every = 0;
    return c;
  }

  double learning_rate_at(std::size_t epoch) const {
    return nn::step_decay(learning_rate, lr_decay, decay_every, epoch);
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::InvalidConfig, m); };
    if (hidden_dim == 0) fail("hidden_dim must be positive");
    if (batch_size == 0) fail("batch_size must be positive");
    if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
    if (!(lr_decay > 0.0)) fail("lr_decay must be positive");
    for (double l : lambda) {
      if (l < 0.0) throw Error(ErrorKind::NegativeWeight, "lambda " + std::to_string(l));
    }
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
      fail("adam betas must be in [0, 1)");
    }
    if (!(adam.epsilon > 0.0)) fail("adam epsilon must be positive");
  }

  nlohmann::json to_json() const {
    return {{"seed", seed},
            {"hidden_dim", hidden_dim},
            {"batch_size", batch_size},
            {"epochs", epochs},
            {"learning_rate", learning_rate},
            {"lr_decay", lr_decay},
            {"decay_every", decay_every},
            {"lambda", lambda},
            {"beta1", adam.beta1},
            {"beta2", adam.beta2},
            {"epsilon", adam.epsilon}};
  }

  static TrainConfig from_json(const nlohmann::json& j) { return from_json(j, TrainConfig{}); }

  /// Overlays `j` on `base`; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j, const TrainConfig& base) {
    static const std::set<std::string> known{"seed",          "hidden_dim", "batch_size",
                                             "epochs",        "learning_rate", "lr_decay",
                                             "decay_every",   "lambda",     "beta1",
                                             "beta2",         "epsilon"};
    if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, "training section must be an object");
    for (const auto& [key, value] : j.items()) {
      if (!known.contains(key)) throw Error(ErrorKind::InvalidConfig, "unknown key '" + key + "'");
    }
    try {
      TrainConfig c = base;
      c.seed = j.value("seed", c.seed);
      c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
      c.batch_size = j.value("batch_size", c.batch_size);
      c.epochs = j.value("epochs", c.epochs);
      c.learning_rate = j.value("learning_rate", c.learning_rate);
      c.lr_decay = j.value("lr_decay", c.lr_decay);
      c.decay_every = j.value("decay_every", c.decay_every);
      c.lambda = j.value("lambda", c.lambda);
      c.adam.beta1 = j.value("beta1", c.adam.beta1);
      c.adam.beta2 = j.value("beta2", c.adam.beta2);
      c.adam.epsilon = j.value("epsilon", c.adam.epsilon);
      c.validate();
      return c;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::InvalidConfig, e.what());
    }
  }
};

/// 64-bit FNV-1a of the canonical (sorted-key) JSON dump, as 16 hex digits.
inline std::string config_hash(const nlohmann::json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline constexpr int kCheckpointFormatVersion = 1;

}  // namespace motioncode
