#pragma once

// Motion code embedding model: shared trunk followed by five softmax heads,
// one per taxonomy component. The concatenated head distributions form a
// 15-wide motion embedding.

#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "motioncode/config.hpp"
#include "motioncode/data.hpp"
#include "motioncode/error.hpp"
#include "motioncode/nn.hpp"
#include "motioncode/taxonomy.hpp"

namespace motioncode {

using ComponentBlocks = std::array<nn::Vector, kComponentCount>;

struct MotionModel {
  nn::Standardizer input_norm;  // fitted on the training inputs
  nn::DenseParams trunk;
  std::array<nn::DenseParams, kComponentCount> heads;
  std::size_t feature_dim = 0;
  std::size_t noun_dim = 0;  // 0 unless uses_nouns
  bool uses_nouns = false;

  std::size_t input_dim() const { return feature_dim + noun_dim; }

  /// Trunk: input -> hidden (ReLU); heads: hidden -> C_k logits.
  static MotionModel create(std::size_t feature_dim, std::size_t noun_dim, std::size_t hidden_dim,
                            std::mt19937_64& rng) {
    MotionModel m;
    m.feature_dim = feature_dim;
    m.noun_dim = noun_dim;
    m.uses_nouns = noun_dim > 0;
    m.input_norm = nn::Standardizer::identity(static_cast<nn::Index>(feature_dim + noun_dim));
    m.trunk = nn::make_dense({feature_dim + noun_dim, hidden_dim}, rng, nn::Activation::RectifiedLinear,
                             nn::Activation::RectifiedLinear);
    for (std::size_t k = 0; k < kComponentCount; ++k) {
      m.heads[k] = nn::make_dense({hidden_dim, kComponentClasses[k]}, rng);
    }
    return m;
  }

  void validate() const {
    trunk.validate();
    if (static_cast<std::size_t>(trunk.input_dim()) != input_dim() ||
        static_cast<std::size_t>(input_norm.dim()) != input_dim()) {
      throw Error(ErrorKind::DimensionMismatch, "trunk input does not match feature_dim + noun_dim");
    }
    for (std::size_t k = 0; k < kComponentCount; ++k) {
      heads[k].validate();
      if (heads[k].input_dim() != trunk.output_dim()) {
        throw Error(ErrorKind::DimensionMismatch, "head input does not match trunk output");
      }
      if (static_cast<std::size_t>(heads[k].output_dim()) != kComponentClasses[k]) {
        throw Error(ErrorKind::DimensionMismatch, std::string(kComponentNames[k]) +
                                                      " head must have " +
                                                      std::to_string(kComponentClasses[k]) + " outputs");
      }
    }
  }

  friend bool operator==(const MotionModel&, const MotionModel&) = default;
};

namespace detail {

/// Concatenates features and the optional noun vector, checking the model's
/// noun contract.
inline nn::Vector model_input(std::size_t feature_dim, std::size_t noun_dim, bool uses_nouns,
                              std::span<const double> features,
                              std::optional<std::span<const double>> noun) {
  if (uses_nouns && !noun) throw Error(ErrorKind::NounRequired, "model was trained with nouns");
  if (!uses_nouns && noun) throw Error(ErrorKind::NounUnexpected, "model was trained without nouns");
  if (features.size() != feature_dim) {
    throw Error(ErrorKind::DimensionMismatch, std::to_string(features.size()) +
                                                  " features, model expects " +
                                                  std::to_string(feature_dim));
  }
  if (noun && noun->size() != noun_dim) {
    throw Error(ErrorKind::DimensionMismatch, "noun vector has " + std::to_string(noun->size()) +
                                                  " values, model expects " + std::to_string(noun_dim));
  }
  nn::Vector x(static_cast<nn::Index>(feature_dim + (noun ? noun->size() : 0)));
  for (std::size_t i = 0; i < features.size(); ++i) x(static_cast<nn::Index>(i)) = features[i];
  if (noun) {
    for (std::size_t i = 0; i < noun->size(); ++i) x(static_cast<nn::Index>(feature_dim + i)) = (*noun)[i];
  }
  return x;
}

inline void check_noun_table(bool uses_nouns, std::size_t noun_dim, const WordVectorTable* nouns) {
  if (uses_nouns && !nouns) throw Error(ErrorKind::NounRequired, "noun vectors required");
  if (!uses_nouns && nouns) throw Error(ErrorKind::NounUnexpected, "model takes no noun vectors");
  if (nouns && nouns->dim() != noun_dim) {
    throw Error(ErrorKind::DimensionMismatch, "word vectors have dimension " +
                                                  std::to_string(nouns->dim()) + ", model expects " +
                                                  std::to_string(noun_dim));
  }
}

}  // namespace detail

/// Per-head probabilities for a batch of inputs (input_dim x N).
inline std::array<nn::Matrix, kComponentCount> predict_batch(const MotionModel& model,
                                                            const nn::Matrix& inputs) {
  const nn::Matrix hidden = nn::forward(model.trunk, model.input_norm.apply(inputs));
  std::array<nn::Matrix, kComponentCount> out;
  for (std::size_t k = 0; k < kComponentCount; ++k) {
    out[k] = nn::softmax_columns(nn::forward(model.heads[k], hidden));
  }
  return out;
}

inline ComponentBlocks predict_components(const MotionModel& model, std::span<const double> features,
                                          std::optional<std::span<const double>> noun = std::nullopt) {
  const nn::Vector x =
      detail::model_input(model.feature_dim, model.noun_dim, model.uses_nouns, features, noun);
  const auto probs = predict_batch(model, x);
  ComponentBlocks blocks;
  for (std::size_t k = 0; k < kComponentCount; ++k) blocks[k] = probs[k].col(0);
  return blocks;
}

/// Blocks concatenated in component order.
inline nn::Vector concat_blocks(const ComponentBlocks& blocks) {
  nn::Vector out(static_cast<nn::Index>(kEmbeddingDim));
  for (std::size_t k = 0; k < kComponentCount; ++k) {
    out.segment(static_cast<nn::Index>(kBlockOffsets[k]), static_cast<nn::Index>(kComponentClasses[k])) =
        blocks[k];
  }
  return out;
}

inline ComponentBlocks split_blocks(std::span<const double> embedding) {
  if (embedding.size() != kEmbeddingDim) {
    throw Error(ErrorKind::DimensionMismatch, "embedding must have 15 entries");
  }
  ComponentBlocks blocks;
  for (std::size_t k = 0; k < kComponentCount; ++k) {
    blocks[k] = Eigen::Map<const nn::Vector>(embedding.data() + kBlockOffsets[k],
                                             static_cast<nn::Index>(kComponentClasses[k]));
  }
  return blocks;
}

inline nn::Vector embed(const MotionModel& model, std::span<const double> features,
                        std::optional<std::span<const double>> noun = std::nullopt) {
  return concat_blocks(predict_components(model, features, noun));
}

/// Embeddings for a whole dataset (15 x N).
inline nn::Matrix embed_dataset(const MotionModel& model, const Dataset& ds,
                                const WordVectorTable* nouns) {
  detail::check_noun_table(model.uses_nouns, model.noun_dim, nouns);
  if (!ds.empty() && ds.feature_dim() != model.feature_dim) {
    throw Error(ErrorKind::DimensionMismatch, "dataset feature_dim differs from the model");
  }
  const auto probs = predict_batch(model, input_matrix(ds, nouns));
  nn::Matrix out(static_cast<nn::Index>(kEmbeddingDim), static_cast<nn::Index>(ds.size()));
  for (std::size_t k = 0; k < kComponentCount; ++k) {
    out.middleRows(static_cast<nn::Index>(kBlockOffsets[k]), static_cast<nn::Index>(kComponentClasses[k])) =
        probs[k];
  }
  return out;
}

/// Argmax per block (lowest index on ties).
inline MotionCode infer_code(const ComponentBlocks& blocks) {
  ClassIndices idx{};
  for (std::size_t k = 0; k < kComponentCount; ++k) {
    if (static_cast<std::size_t>(blocks[k].size()) != kComponentClasses[k]) {
      throw Error(ErrorKind::DimensionMismatch, std::string(kComponentNames[k]) + " block size");
    }
    idx[k] = nn::argmax(blocks[k]);
  }
  return class_indices_to_code(idx);
}

inline MotionCode infer_code(std::span<const double> embedding) {
  return infer_code(split_blocks(embedding));
}

/// Sum_k lambda_k * CE(block_k, gt_k).
inline double loss_LM(const ComponentBlocks& blocks, const MotionCode& gt,
                      const LambdaWeights& lambda = kUnitWeights) {
  const auto idx = code_to_class_indices(gt);
  double total = 0.0;
  for (std::size_t k = 0; k < kComponentCount; ++k) {
    if (lambda[k] < 0.0) throw Error(ErrorKind::NegativeWeight, std::to_string(lambda[k]));
    total += lambda[k] * nn::cross_entropy(blocks[k], idx[k]);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Gradients

struct MotionGrads {
  nn::DenseParams trunk;
  std::array<nn::DenseParams, kComponentCount> heads;
};

/// Mean L_M over the batch columns; fills `grads` when given.
inline double motion_loss(const MotionModel& model, const nn::Matrix& inputs,
                          std::span<const ClassIndices> targets, const LambdaWeights& lambda,
                          MotionGrads* grads = nullptr) {
  if (static_cast<std::size_t>(inputs.cols()) != targets.size()) {
    throw Error(ErrorKind::LengthMismatch, "inputs and targets differ in count");
  }
  const auto n = static_cast<double>(targets.size());
  nn::ForwardCache trunk_cache;
  const nn::Matrix hidden =
      nn::forward(model.trunk, model.input_norm.apply(inputs), grads ? &trunk_cache : nullptr);
  nn::Matrix hidden_grad;
  if (grads) hidden_grad = nn::Matrix::Zero(hidden.rows(), hidden.cols());
  double loss = 0.0;
  for (std::size_t k = 0; k < kComponentCount; ++k) {
    nn::ForwardCache head_cache;
    const nn::Matrix logits = nn::forward(model.heads[k], hidden, grads ? &head_cache : nullptr);
    nn::Matrix probs = nn::softmax_columns(logits);
    for (std::size_t i = 0; i < targets.size(); ++i) {
      loss += lambda[k] * nn::cross_entropy(probs.col(static_cast<nn::Index>(i)), targets[i][k]);
    }
    if (grads) {
      // d(CE)/d(logits) = p - onehot
      for (std::size_t i = 0; i < targets.size(); ++i) {
        probs(static_cast<nn::Index>(targets[i][k]), static_cast<nn::Index>(i)) -= 1.0;
      }
      probs *= lambda[k] / n;
      auto back = nn::backward(model.heads[k], head_cache, probs);
      grads->heads[k] = std::move(back.grads);
      hidden_grad += back.input_grad;
    }
  }
  if (grads) grads->trunk = nn::backward(model.trunk, trunk_cache, hidden_grad).grads;
  return loss / n;
}

inline std::vector<double> flatten(const MotionModel& m) {
  std::vector<double> out = nn::flatten(m.trunk);
  for (const auto& h : m.heads) {
    const auto v = nn::flatten(h);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

inline std::vector<double> flatten(const MotionGrads& g) {
  std::vector<double> out = nn::flatten(g.trunk);
  for (const auto& h : g.heads) {
    const auto v = nn::flatten(h);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

inline void unflatten(MotionModel& m, std::span<const double> values) {
  std::size_t used = nn::unflatten(m.trunk, values);
  for (auto& h : m.heads) used += nn::unflatten(h, values.subspan(used));
}

// ---------------------------------------------------------------------------
// Training

struct ComponentAccuracy {
  std::array<double, kComponentCount> per_component{};
  double exact = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  std::optional<ComponentAccuracy> val;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  /// epoch,lr,train_loss,val_exact_acc,val_<component>_acc...
  std::string to_csv() const {
    std::ostringstream out;
    out << "epoch,lr,train_loss,val_exact_acc";
    for (auto name : kComponentNames) out << ",val_" << name << "_acc";
    out << '\n';
    for (const auto& e : epochs) {
      out << e.epoch << ',' << nlohmann::json(e.learning_rate).dump() << ','
          << nlohmann::json(e.train_loss).dump();
      if (e.val) {
        out << ',' << nlohmann::json(e.val->exact).dump();
        for (double a : e.val->per_component) out << ',' << nlohmann::json(a).dump();
      } else {
        out << std::string(1 + kComponentCount, ',');
      }
      out << '\n';
    }
    return out.str();
  }
};

/// Labels for every example; missing codes are an error.
inline std::vector<ClassIndices> code_targets(const Dataset& ds) {
  std::vector<ClassIndices> out;
  out.reserve(ds.size());
  for (const auto& ex : ds.examples()) {
    if (!ex.code) throw Error(ErrorKind::MissingCode, "example '" + ex.id + "' has no motion code");
    out.push_back(code_to_class_indices(*ex.code));
  }
  return out;
}

inline ComponentAccuracy eval_embedding(const MotionModel& model, const Dataset& ds,
                                        const WordVectorTable* nouns) {
  if (ds.empty()) throw Error(ErrorKind::EmptyDataset, "evaluation set is empty");
  const auto targets = code_targets(ds);
  const nn::Matrix emb = embed_dataset(model, ds, nouns);
  ComponentAccuracy acc;
  std::array<std::size_t, kComponentCount> hits{};
  std::size_t exact = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const nn::Vector col = emb.col(static_cast<nn::Index>(i));
    const auto idx = code_to_class_indices(infer_code(std::span<const double>(col.data(), kEmbeddingDim)));
    bool all = true;
    for (std::size_t k = 0; k < kComponentCount; ++k) {
      if (idx[k] == targets[i][k]) {
        ++hits[k];
      } else {
        all = false;
      }
    }
    if (all) ++exact;
  }
  const auto n = static_cast<double>(ds.size());
  for (std::size_t k = 0; k < kComponentCount; ++k) acc.per_component[k] = static_cast<double>(hits[k]) / n;
  acc.exact = static_cast<double>(exact) / n;
  return acc;
}

struct MotionOptimizer {
  nn::AdamState trunk;
  std::array<nn::AdamState, kComponentCount> heads;

  static MotionOptimizer for_model(const MotionModel& m, nn::AdamConfig cfg) {
    MotionOptimizer o{nn::AdamState::for_params(m.trunk, cfg), {}};
    for (std::size_t k = 0; k < kComponentCount; ++k) o.heads[k] = nn::AdamState::for_params(m.heads[k], cfg);
    return o;
  }

  void step(MotionModel& m, const MotionGrads& g, double lr) {
    nn::adam_step(m.trunk, g.trunk, trunk, lr);
    for (std::size_t k = 0; k < kComponentCount; ++k) nn::adam_step(m.heads[k], g.heads[k], heads[k], lr);
  }

  friend bool operator==(const MotionOptimizer&, const MotionOptimizer&) = default;
};

struct EmbeddingRun {
  MotionModel model;
  MotionOptimizer optimizer;
  TrainHistory history;
};

namespace detail {

inline std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

inline nn::Matrix gather_columns(const nn::Matrix& m, std::span<const std::size_t> cols) {
  nn::Matrix out(m.rows(), static_cast<nn::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<nn::Index>(i)) = m.col(static_cast<nn::Index>(cols[i]));
  return out;
}

}  // namespace detail

/// Mini-batch Adam on L_M. Noun conditioning is enabled by passing `nouns`.
/// `val` (optional) is evaluated after every epoch.
inline EmbeddingRun train_embedding(const Dataset& train, const TrainConfig& config,
                                    const WordVectorTable* nouns = nullptr,
                                    const Dataset* val = nullptr) {
  config.validate();
  if (train.empty()) throw Error(ErrorKind::EmptyDataset, "training set is empty");
  const auto targets = code_targets(train);
  if (val && !val->empty() && val->feature_dim() != train.feature_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "validation feature_dim differs from training");
  }
  if (val && val->empty()) val = nullptr;
  if (val) (void)code_targets(*val);

  std::mt19937_64 rng(config.seed);
  const std::size_t noun_dim = nouns ? nouns->dim() : 0;
  EmbeddingRun run{MotionModel::create(train.feature_dim(), noun_dim, config.hidden_dim, rng), {}, {}};
  run.optimizer = MotionOptimizer::for_model(run.model, config.adam);

  const nn::Matrix inputs = input_matrix(train, nouns);
  run.model.input_norm = nn::Standardizer::fit(inputs);
  auto order = detail::iota_indices(train.size());
  std::vector<ClassIndices> batch_targets;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.learning_rate_at(epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::span<const std::size_t> batch(order.data() + start,
                                               std::min(config.batch_size, order.size() - start));
      batch_targets.clear();
      for (std::size_t i : batch) batch_targets.push_back(targets[i]);
      MotionGrads grads;
      const double loss = motion_loss(run.model, detail::gather_columns(inputs, batch), batch_targets,
                                      config.lambda, &grads);
      loss_sum += loss * static_cast<double>(batch.size());
      run.optimizer.step(run.model, grads, lr);
    }
    EpochRecord rec{epoch, lr, loss_sum / static_cast<double>(train.size()), std::nullopt};
    if (val) rec.val = eval_embedding(run.model, *val, nouns);
    run.history.epochs.push_back(rec);
  }
  return run;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline nlohmann::json checkpoint_json(const MotionModel& model, const MotionOptimizer* optimizer,
                                      const nlohmann::json& config) {
  nlohmann::json heads = nlohmann::json::array();
  for (const auto& h : model.heads) heads.push_back(nn::to_json(h));
  nlohmann::json j{{"format_version", kCheckpointFormatVersion},
                   {"kind", "motion_model"},
                   {"config", config},
                   {"config_hash", config_hash(config)},
                   {"feature_dim", model.feature_dim},
                   {"noun_dim", model.noun_dim},
                   {"uses_nouns", model.uses_nouns},
                   {"input_norm", nn::to_json(model.input_norm)},
                   {"trunk", nn::to_json(model.trunk)},
                   {"heads", std::move(heads)}};
  if (optimizer) {
    nlohmann::json opt_heads = nlohmann::json::array();
    for (const auto& h : optimizer->heads) opt_heads.push_back(nn::to_json(h));
    j["optimizer"] = {{"trunk", nn::to_json(optimizer->trunk)}, {"heads", std::move(opt_heads)}};
  }
  return j;
}

inline MotionModel motion_model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion ||
        j.at("kind").get<std::string>() != "motion_model") {
      throw Error(ErrorKind::ParseError, "not a motion_model checkpoint of a supported version");
    }
    MotionModel m;
    m.feature_dim = j.at("feature_dim").get<std::size_t>();
    m.noun_dim = j.at("noun_dim").get<std::size_t>();
    m.uses_nouns = j.at("uses_nouns").get<bool>();
    m.input_norm = nn::standardizer_from_json(j.at("input_norm"));
    m.trunk = nn::dense_from_json(j.at("trunk"));
    const auto& heads = j.at("heads");
    if (heads.size() != kComponentCount) throw Error(ErrorKind::ShapeMismatch, "expected five heads");
    for (std::size_t k = 0; k < kComponentCount; ++k) m.heads[k] = nn::dense_from_json(heads[k]);
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
}

}  // namespace motioncode
