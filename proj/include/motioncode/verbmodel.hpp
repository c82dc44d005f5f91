#pragma once

// Baseline verb classifier, motion embedding sources and the two-layer fusion
// MLP over [verb probabilities ; motion embedding].

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "motioncode/config.hpp"
#include "motioncode/data.hpp"
#include "motioncode/embedding.hpp"
#include "motioncode/error.hpp"
#include "motioncode/nn.hpp"
#include "motioncode/taxonomy.hpp"

namespace motioncode {

namespace detail {

inline void check_vocabulary(const std::vector<std::string>& vocab) {
  if (vocab.empty()) throw Error(ErrorKind::EmptyDataset, "empty verb vocabulary");
  std::vector<std::string> sorted = vocab;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error(ErrorKind::DuplicateId, "verb vocabulary has duplicates");
  }
}

inline std::size_t vocab_index(const std::vector<std::string>& vocab, const std::string& verb) {
  const auto it = std::find(vocab.begin(), vocab.end(), verb);
  if (it == vocab.end()) throw Error(ErrorKind::UnknownVerbLabel, "'" + verb + "'");
  return static_cast<std::size_t>(it - vocab.begin());
}

}  // namespace detail

struct VerbClassifier {
  nn::Standardizer input_norm;  // fitted on the training inputs
  nn::DenseParams net;
  std::vector<std::string> vocabulary;
  std::size_t feature_dim = 0;
  std::size_t noun_dim = 0;
  bool uses_nouns = false;

  std::size_t index_of(const std::string& verb) const { return detail::vocab_index(vocabulary, verb); }

  static VerbClassifier create(std::vector<std::string> vocabulary, std::size_t feature_dim,
                               std::size_t noun_dim, std::size_t hidden_dim, std::mt19937_64& rng) {
    detail::check_vocabulary(vocabulary);
    VerbClassifier c;
    c.input_norm = nn::Standardizer::identity(static_cast<nn::Index>(feature_dim + noun_dim));
    c.net = nn::make_dense({feature_dim + noun_dim, hidden_dim, vocabulary.size()}, rng);
    c.vocabulary = std::move(vocabulary);
    c.feature_dim = feature_dim;
    c.noun_dim = noun_dim;
    c.uses_nouns = noun_dim > 0;
    return c;
  }

  void validate() const {
    detail::check_vocabulary(vocabulary);
    net.validate();
    if (static_cast<std::size_t>(net.output_dim()) != vocabulary.size()) {
      throw Error(ErrorKind::DimensionMismatch, "classifier output size differs from vocabulary size");
    }
    if (static_cast<std::size_t>(net.input_dim()) != feature_dim + noun_dim ||
        static_cast<std::size_t>(input_norm.dim()) != feature_dim + noun_dim) {
      throw Error(ErrorKind::DimensionMismatch, "classifier input size differs from feature_dim + noun_dim");
    }
  }

  friend bool operator==(const VerbClassifier&, const VerbClassifier&) = default;
};

/// Exactly two dense layers: (|verbs| + 15) -> hidden (ReLU) -> |verbs|.
struct FusionMLP {
  nn::DenseParams net;
  std::vector<std::string> vocabulary;

  static FusionMLP create(std::vector<std::string> vocabulary, std::size_t hidden_dim,
                          std::mt19937_64& rng) {
    detail::check_vocabulary(vocabulary);
    FusionMLP f;
    f.net = nn::make_dense({vocabulary.size() + kEmbeddingDim, hidden_dim, vocabulary.size()}, rng);
    f.vocabulary = std::move(vocabulary);
    return f;
  }

  void validate() const {
    detail::check_vocabulary(vocabulary);
    net.validate();
    if (net.layers.size() != 2) throw Error(ErrorKind::ShapeMismatch, "fusion MLP must have 2 layers");
    if (static_cast<std::size_t>(net.input_dim()) != vocabulary.size() + kEmbeddingDim ||
        static_cast<std::size_t>(net.output_dim()) != vocabulary.size()) {
      throw Error(ErrorKind::DimensionMismatch, "fusion MLP must map |verbs| + 15 -> |verbs|");
    }
  }

  friend bool operator==(const FusionMLP&, const FusionMLP&) = default;
};

// ---------------------------------------------------------------------------
// Motion embedding sources

struct PredictedMotion {
  std::shared_ptr<const MotionModel> model;
  std::shared_ptr<const WordVectorTable> nouns;  // required iff model->uses_nouns
};
struct GroundTruthMotion {};
/// Each component independently replaced, with probability p, by a uniformly
/// drawn different class. Draws depend only on (seed, example id).
struct CorruptedMotion {
  double p = 0.0;
  std::uint64_t seed = 0;
};

using MotionSource = std::variant<PredictedMotion, GroundTruthMotion, CorruptedMotion>;

inline std::string describe(const MotionSource& source) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PredictedMotion>) {
          return s.model && s.model->uses_nouns ? "predicted(M_xz)" : "predicted(M_x)";
        } else if constexpr (std::is_same_v<T, GroundTruthMotion>) {
          return "ground_truth";
        } else {
          return "corrupted(p=" + nlohmann::json(s.p).dump() + ")";
        }
      },
      source);
}

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline ClassIndices corrupt(const ClassIndices& gt, double p, std::uint64_t seed, std::string_view id) {
  const std::uint64_t h = fnv1a(id);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ClassIndices out = gt;
  for (std::size_t k = 0; k < kComponentCount; ++k) {
    if (unit(rng) < p) {
      std::uniform_int_distribution<std::size_t> other(0, kComponentClasses[k] - 2);
      const std::size_t r = other(rng);
      out[k] = r < gt[k] ? r : r + 1;
    }
  }
  return out;
}

inline nn::Vector one_hot_vector(const ClassIndices& idx) {
  nn::Vector v = nn::Vector::Zero(static_cast<nn::Index>(kEmbeddingDim));
  for (std::size_t k = 0; k < kComponentCount; ++k) v(static_cast<nn::Index>(kBlockOffsets[k] + idx[k])) = 1.0;
  return v;
}

inline void check_source(const MotionSource& source) {
  if (const auto* c = std::get_if<CorruptedMotion>(&source)) {
    if (!(c->p >= 0.0 && c->p <= 1.0)) throw Error(ErrorKind::InvalidConfig, "corruption rate must be in [0, 1]");
  }
  if (const auto* pm = std::get_if<PredictedMotion>(&source)) {
    if (!pm->model) throw Error(ErrorKind::InvalidConfig, "predicted source without a model");
    check_noun_table(pm->model->uses_nouns, pm->model->noun_dim, pm->nouns.get());
  }
}

}  // namespace detail

inline nn::Vector motion_features(const MotionSource& source, const Example& ex) {
  detail::check_source(source);
  if (const auto* pm = std::get_if<PredictedMotion>(&source)) {
    std::optional<std::span<const double>> noun;
    if (pm->model->uses_nouns) noun = std::span<const double>(pm->nouns->lookup(ex.noun));
    return embed(*pm->model, ex.features, noun);
  }
  if (!ex.code) throw Error(ErrorKind::MissingCode, "example '" + ex.id + "' has no motion code");
  const auto gt = code_to_class_indices(*ex.code);
  if (const auto* c = std::get_if<CorruptedMotion>(&source)) {
    return detail::one_hot_vector(detail::corrupt(gt, c->p, c->seed, ex.id));
  }
  return detail::one_hot_vector(gt);
}

/// (15 x N) for a whole dataset.
inline nn::Matrix motion_features(const MotionSource& source, const Dataset& ds) {
  detail::check_source(source);
  if (const auto* pm = std::get_if<PredictedMotion>(&source)) {
    return embed_dataset(*pm->model, ds, pm->nouns.get());
  }
  nn::Matrix out(static_cast<nn::Index>(kEmbeddingDim), static_cast<nn::Index>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) out.col(static_cast<nn::Index>(i)) = motion_features(source, ds[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Prediction

inline nn::Vector predict_verb(const VerbClassifier& c, std::span<const double> features,
                               std::optional<std::span<const double>> noun = std::nullopt) {
  const nn::Vector x = detail::model_input(c.feature_dim, c.noun_dim, c.uses_nouns, features, noun);
  return nn::softmax(nn::forward(c.net, c.input_norm.apply(x)).col(0));
}

/// (|verbs| x N).
inline nn::Matrix verb_probabilities(const VerbClassifier& c, const Dataset& ds,
                                     const WordVectorTable* nouns) {
  detail::check_noun_table(c.uses_nouns, c.noun_dim, nouns);
  if (!ds.empty() && ds.feature_dim() != c.feature_dim) {
    throw Error(ErrorKind::DimensionMismatch, "dataset feature_dim differs from the classifier");
  }
  return nn::softmax_columns(nn::forward(c.net, c.input_norm.apply(input_matrix(ds, nouns))));
}

/// Rows [verb probabilities ; motion embedding] per example.
inline nn::Matrix fusion_inputs(const VerbClassifier& baseline, const WordVectorTable* baseline_nouns,
                                const MotionSource& source, const Dataset& ds) {
  const nn::Matrix verbs = verb_probabilities(baseline, ds, baseline_nouns);
  const nn::Matrix motion = motion_features(source, ds);
  nn::Matrix out(verbs.rows() + motion.rows(), verbs.cols());
  out.topRows(verbs.rows()) = verbs;
  out.bottomRows(motion.rows()) = motion;
  return out;
}

inline nn::Vector predict_fused(const FusionMLP& fusion, const VerbClassifier& baseline,
                                const WordVectorTable* baseline_nouns, const MotionSource& source,
                                const Example& ex) {
  if (fusion.vocabulary != baseline.vocabulary) {
    throw Error(ErrorKind::VocabularyMismatch, "fusion and baseline vocabularies differ");
  }
  std::optional<std::span<const double>> noun;
  if (baseline.uses_nouns) {
    if (!baseline_nouns) throw Error(ErrorKind::NounRequired, "baseline needs noun vectors");
    noun = std::span<const double>(baseline_nouns->lookup(ex.noun));
  }
  const nn::Vector verbs = predict_verb(baseline, ex.features, noun);
  const nn::Vector motion = motion_features(source, ex);
  nn::Vector x(verbs.size() + motion.size());
  x << verbs, motion;
  if (x.size() != fusion.net.input_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "fusion input length differs from |verbs| + 15");
  }
  return nn::softmax(nn::forward(fusion.net, x));
}

inline nn::Matrix fused_probabilities(const FusionMLP& fusion, const VerbClassifier& baseline,
                                      const WordVectorTable* baseline_nouns, const MotionSource& source,
                                      const Dataset& ds) {
  if (fusion.vocabulary != baseline.vocabulary) {
    throw Error(ErrorKind::VocabularyMismatch, "fusion and baseline vocabularies differ");
  }
  return nn::softmax_columns(nn::forward(fusion.net, fusion_inputs(baseline, baseline_nouns, source, ds)));
}

/// Argmax per column, lowest index on ties.
inline std::vector<std::size_t> argmax_columns(const nn::Matrix& probs) {
  std::vector<std::size_t> out(static_cast<std::size_t>(probs.cols()));
  for (nn::Index c = 0; c < probs.cols(); ++c) out[static_cast<std::size_t>(c)] = nn::argmax(probs.col(c));
  return out;
}

inline std::vector<std::size_t> verb_labels(const std::vector<std::string>& vocab, const Dataset& ds) {
  std::vector<std::size_t> out;
  out.reserve(ds.size());
  for (const auto& ex : ds.examples()) out.push_back(detail::vocab_index(vocab, ex.verb));
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct ClassifierEpoch {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  std::optional<double> val_top1;
};

struct ClassifierHistory {
  std::vector<ClassifierEpoch> epochs;

  std::string to_csv() const {
    std::ostringstream out;
    out << "epoch,lr,train_loss,val_top1\n";
    for (const auto& e : epochs) {
      out << e.epoch << ',' << nlohmann::json(e.learning_rate).dump() << ','
          << nlohmann::json(e.train_loss).dump() << ','
          << (e.val_top1 ? nlohmann::json(*e.val_top1).dump() : std::string()) << '\n';
    }
    return out.str();
  }
};

inline double top1_from_probs(const nn::Matrix& probs, std::span<const std::size_t> labels) {
  if (labels.empty()) throw Error(ErrorKind::Empty, "no labels");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (nn::argmax(probs.col(static_cast<nn::Index>(i))) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

/// Mean softmax cross-entropy over the batch; fills `grads` when given.
inline double softmax_loss(const nn::DenseParams& net, const nn::Matrix& inputs,
                           std::span<const std::size_t> labels, nn::DenseParams* grads = nullptr) {
  if (static_cast<std::size_t>(inputs.cols()) != labels.size()) {
    throw Error(ErrorKind::LengthMismatch, "inputs and labels differ in count");
  }
  nn::ForwardCache cache;
  nn::Matrix probs = nn::softmax_columns(nn::forward(net, inputs, grads ? &cache : nullptr));
  const auto n = static_cast<double>(labels.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) loss += nn::cross_entropy(probs.col(static_cast<nn::Index>(i)), labels[i]);
  if (grads) {
    for (std::size_t i = 0; i < labels.size(); ++i) probs(static_cast<nn::Index>(labels[i]), static_cast<nn::Index>(i)) -= 1.0;
    probs /= n;
    *grads = nn::backward(net, cache, probs).grads;
  }
  return loss / n;
}

namespace detail {

/// Shared mini-batch Adam loop for single-network softmax classifiers.
inline ClassifierHistory train_softmax(nn::DenseParams& net, nn::AdamState& state, const nn::Matrix& inputs,
                                       const std::vector<std::size_t>& labels, const TrainConfig& config,
                                       std::mt19937_64& rng, const nn::Matrix* val_inputs,
                                       const std::vector<std::size_t>* val_labels) {
  ClassifierHistory history;
  auto order = iota_indices(labels.size());
  std::vector<std::size_t> batch_labels;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.learning_rate_at(epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::span<const std::size_t> batch(order.data() + start,
                                               std::min(config.batch_size, order.size() - start));
      batch_labels.clear();
      for (std::size_t i : batch) batch_labels.push_back(labels[i]);
      nn::DenseParams grads;
      loss_sum += softmax_loss(net, gather_columns(inputs, batch), batch_labels, &grads) *
                  static_cast<double>(batch.size());
      nn::adam_step(net, grads, state, lr);
    }
    ClassifierEpoch rec{epoch, lr, loss_sum / static_cast<double>(labels.size()), std::nullopt};
    if (val_inputs) rec.val_top1 = top1_from_probs(nn::softmax_columns(nn::forward(net, *val_inputs)), *val_labels);
    history.epochs.push_back(rec);
  }
  return history;
}

}  // namespace detail

struct VerbRun {
  VerbClassifier classifier;
  nn::AdamState optimizer;
  ClassifierHistory history;
};

/// Vocabulary is the sorted verb set of `train`. Nouns enabled by `nouns`.
inline VerbRun train_baseline(const Dataset& train, const TrainConfig& config,
                              const WordVectorTable* nouns = nullptr, const Dataset* val = nullptr) {
  config.validate();
  if (train.empty()) throw Error(ErrorKind::EmptyDataset, "training set is empty");
  if (val && val->empty()) val = nullptr;
  std::mt19937_64 rng(config.seed);
  VerbRun run;
  run.classifier = VerbClassifier::create(train.verbs(), train.feature_dim(), nouns ? nouns->dim() : 0,
                                          config.hidden_dim, rng);
  run.optimizer = nn::AdamState::for_params(run.classifier.net, config.adam);
  const nn::Matrix raw = input_matrix(train, nouns);
  run.classifier.input_norm = nn::Standardizer::fit(raw);
  const nn::Matrix inputs = run.classifier.input_norm.apply(raw);
  const auto labels = verb_labels(run.classifier.vocabulary, train);
  std::optional<nn::Matrix> val_inputs;
  std::vector<std::size_t> val_labels;
  if (val) {
    if (val->feature_dim() != train.feature_dim()) {
      throw Error(ErrorKind::DimensionMismatch, "validation feature_dim differs from training");
    }
    val_inputs = run.classifier.input_norm.apply(input_matrix(*val, nouns));
    val_labels = verb_labels(run.classifier.vocabulary, *val);
  }
  run.history = detail::train_softmax(run.classifier.net, run.optimizer, inputs, labels, config, rng,
                                      val_inputs ? &*val_inputs : nullptr, &val_labels);
  return run;
}

struct FusionRun {
  FusionMLP fusion;
  nn::AdamState optimizer;
  ClassifierHistory history;
};

/// Trains only the fusion MLP; `baseline` and `source` are read-only inputs.
inline FusionRun train_fusion(const VerbClassifier& baseline, const WordVectorTable* baseline_nouns,
                              const MotionSource& source, const Dataset& train, const TrainConfig& config,
                              const Dataset* val = nullptr) {
  config.validate();
  if (train.empty()) throw Error(ErrorKind::EmptyDataset, "training set is empty");
  if (val && val->empty()) val = nullptr;
  std::mt19937_64 rng(config.seed);
  FusionRun run;
  run.fusion = FusionMLP::create(baseline.vocabulary, config.hidden_dim, rng);
  run.optimizer = nn::AdamState::for_params(run.fusion.net, config.adam);
  const nn::Matrix inputs = fusion_inputs(baseline, baseline_nouns, source, train);
  const auto labels = verb_labels(baseline.vocabulary, train);
  std::optional<nn::Matrix> val_inputs;
  std::vector<std::size_t> val_labels;
  if (val) {
    val_inputs = fusion_inputs(baseline, baseline_nouns, source, *val);
    val_labels = verb_labels(baseline.vocabulary, *val);
  }
  run.history = detail::train_softmax(run.fusion.net, run.optimizer, inputs, labels, config, rng,
                                      val_inputs ? &*val_inputs : nullptr, &val_labels);
  return run;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline nlohmann::json checkpoint_json(const VerbClassifier& c, const nn::AdamState* optimizer,
                                      const nlohmann::json& config) {
  nlohmann::json j{{"format_version", kCheckpointFormatVersion},
                   {"kind", "verb_classifier"},
                   {"config", config},
                   {"config_hash", config_hash(config)},
                   {"vocabulary", c.vocabulary},
                   {"feature_dim", c.feature_dim},
                   {"noun_dim", c.noun_dim},
                   {"uses_nouns", c.uses_nouns},
                   {"input_norm", nn::to_json(c.input_norm)},
                   {"net", nn::to_json(c.net)}};
  if (optimizer) j["optimizer"] = nn::to_json(*optimizer);
  return j;
}

inline nlohmann::json checkpoint_json(const FusionMLP& f, const nn::AdamState* optimizer,
                                      const nlohmann::json& config) {
  nlohmann::json j{{"format_version", kCheckpointFormatVersion},
                   {"kind", "fusion_mlp"},
                   {"config", config},
                   {"config_hash", config_hash(config)},
                   {"vocabulary", f.vocabulary},
                   {"net", nn::to_json(f.net)}};
  if (optimizer) j["optimizer"] = nn::to_json(*optimizer);
  return j;
}

namespace detail {

inline void check_kind(const nlohmann::json& j, const char* kind) {
  if (j.at("format_version").get<int>() != kCheckpointFormatVersion || j.at("kind").get<std::string>() != kind) {
    throw Error(ErrorKind::ParseError, std::string("not a ") + kind + " checkpoint of a supported version");
  }
}

}  // namespace detail

inline VerbClassifier verb_classifier_from_json(const nlohmann::json& j) {
  try {
    detail::check_kind(j, "verb_classifier");
    VerbClassifier c;
    c.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    c.feature_dim = j.at("feature_dim").get<std::size_t>();
    c.noun_dim = j.at("noun_dim").get<std::size_t>();
    c.uses_nouns = j.at("uses_nouns").get<bool>();
    c.input_norm = nn::standardizer_from_json(j.at("input_norm"));
    c.net = nn::dense_from_json(j.at("net"));
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
}

inline FusionMLP fusion_from_json(const nlohmann::json& j) {
  try {
    detail::check_kind(j, "fusion_mlp");
    FusionMLP f;
    f.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    f.net = nn::dense_from_json(j.at("net"));
    f.validate();
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
}

}  // namespace motioncode
