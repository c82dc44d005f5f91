#pragma once

// Config-driven experiment runs. One RunConfig names the datasets, the model
// variants and the motion source; every entry point writes its artifacts to
// output_dir under names derived from those choices.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "motioncode/config.hpp"
#include "motioncode/data.hpp"
#include "motioncode/embedding.hpp"
#include "motioncode/error.hpp"
#include "motioncode/eval.hpp"
#include "motioncode/verbmodel.hpp"

namespace motioncode {

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorKind::InvalidConfig, "unknown key '" + key + "' in " + where);
  }
}

}  // namespace detail

inline nlohmann::json to_json(const SynthConfig& c) {
  return {{"n_train", c.n_train},
          {"n_val", c.n_val},
          {"feature_dim", c.feature_dim},
          {"noise_sigma", c.noise_sigma},
          {"verb_count", c.verb_count},
          {"codes_per_verb", c.codes_per_verb},
          {"code_count", c.code_count},
          {"noun_informativeness", c.noun_informativeness},
          {"noun_dim", c.noun_dim},
          {"seed", c.seed}};
}

inline SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig c = {}) {
  detail::reject_unknown(j,
                         {"n_train", "n_val", "feature_dim", "noise_sigma", "verb_count", "codes_per_verb",
                          "code_count", "noun_informativeness", "noun_dim", "seed"},
                         "synth");
  try {
    c.n_train = j.value("n_train", c.n_train);
    c.n_val = j.value("n_val", c.n_val);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.verb_count = j.value("verb_count", c.verb_count);
    c.codes_per_verb = j.value("codes_per_verb", c.codes_per_verb);
    c.code_count = j.value("code_count", c.code_count);
    c.noun_informativeness = j.value("noun_informativeness", c.noun_informativeness);
    c.noun_dim = j.value("noun_dim", c.noun_dim);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, e.what());
  }
  c.validate();
  return c;
}

enum class SourceKind { Predicted, GroundTruth, Corrupted };

struct SourceSpec {
  SourceKind kind = SourceKind::GroundTruth;
  double p = 0.0;
  std::uint64_t seed = 1;

  nlohmann::json to_json() const {
    switch (kind) {
      case SourceKind::Predicted: return {{"kind", "predicted"}};
      case SourceKind::GroundTruth: return {{"kind", "ground_truth"}};
      case SourceKind::Corrupted: return {{"kind", "corrupted"}, {"p", p}, {"seed", seed}};
    }
    return {};
  }
};

struct SweepSpec {
  std::vector<double> p_grid{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path train = "train.jsonl";
  std::filesystem::path val = "val.jsonl";
  std::optional<std::filesystem::path> word_vectors;
  std::filesystem::path output_dir = "runs";
  bool verb_uses_nouns = false;
  bool motion_uses_nouns = false;
  SourceSpec motion_source;
  TrainConfig embedding = TrainConfig::embedding_defaults();
  TrainConfig verb = TrainConfig::verb_defaults();
  TrainConfig fusion = TrainConfig::fusion_defaults();
  SweepSpec sweep;
  SynthConfig synth;
  /// Directory relative paths are resolved against (the config file's).
  std::filesystem::path base_dir = ".";

  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return (p.is_absolute() ? p : base_dir / p).lexically_normal();
  }
  std::filesystem::path out(const std::string& name) const { return resolve(output_dir) / name; }

  /// Canonical form; base_dir is excluded so hashes do not depend on cwd.
  nlohmann::json to_json() const {
    nlohmann::json j{{"seed", seed},
                     {"train", train.generic_string()},
                     {"val", val.generic_string()},
                     {"word_vectors", word_vectors ? nlohmann::json(word_vectors->generic_string()) : nlohmann::json()},
                     {"output_dir", output_dir.generic_string()},
                     {"verb_uses_nouns", verb_uses_nouns},
                     {"motion_uses_nouns", motion_uses_nouns},
                     {"motion_source", motion_source.to_json()},
                     {"embedding", embedding.to_json()},
                     {"verb", verb.to_json()},
                     {"fusion", fusion.to_json()},
                     {"sweep", {{"p_grid", sweep.p_grid}, {"seeds", sweep.seeds}}},
                     {"synth", motioncode::to_json(synth)}};
    return j;
  }

  std::string hash() const { return config_hash(to_json()); }

  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".") {
    detail::reject_unknown(j,
                           {"seed", "train", "val", "word_vectors", "output_dir", "verb_uses_nouns",
                            "motion_uses_nouns", "motion_source", "embedding", "verb", "fusion", "sweep", "synth"},
                           "run config");
    RunConfig c;
    c.base_dir = base_dir;
    try {
      c.seed = j.value("seed", c.seed);
      c.motion_source.seed = c.seed;
      c.train = j.value("train", c.train.string());
      c.val = j.value("val", c.val.string());
      if (j.contains("word_vectors") && !j["word_vectors"].is_null()) {
        c.word_vectors = j["word_vectors"].get<std::string>();
      }
      c.output_dir = j.value("output_dir", c.output_dir.string());
      c.verb_uses_nouns = j.value("verb_uses_nouns", c.verb_uses_nouns);
      c.motion_uses_nouns = j.value("motion_uses_nouns", c.motion_uses_nouns);

      // section seeds default to the top-level seed
      auto section = [&](const char* key, TrainConfig base) {
        base.seed = c.seed;
        return j.contains(key) ? TrainConfig::from_json(j[key], base) : base;
      };
      c.embedding = section("embedding", TrainConfig::embedding_defaults());
      c.verb = section("verb", TrainConfig::verb_defaults());
      c.fusion = section("fusion", TrainConfig::fusion_defaults());

      if (j.contains("motion_source")) {
        const auto& s = j["motion_source"];
        detail::reject_unknown(s, {"kind", "p", "seed"}, "motion_source");
        const auto kind = s.at("kind").get<std::string>();
        if (kind == "predicted") {
          c.motion_source.kind = SourceKind::Predicted;
        } else if (kind == "ground_truth") {
          c.motion_source.kind = SourceKind::GroundTruth;
        } else if (kind == "corrupted") {
          c.motion_source.kind = SourceKind::Corrupted;
        } else {
          throw Error(ErrorKind::InvalidConfig, "motion_source.kind must be predicted, ground_truth or corrupted");
        }
        c.motion_source.p = s.value("p", 0.0);
        c.motion_source.seed = s.value("seed", c.seed);
        if (!(c.motion_source.p >= 0.0 && c.motion_source.p <= 1.0)) {
          throw Error(ErrorKind::InvalidConfig, "motion_source.p must be in [0, 1]");
        }
      }
      if (j.contains("sweep")) {
        detail::reject_unknown(j["sweep"], {"p_grid", "seeds"}, "sweep");
        c.sweep.p_grid = j["sweep"].value("p_grid", c.sweep.p_grid);
        c.sweep.seeds = j["sweep"].value("seeds", c.sweep.seeds);
      }
      if (j.contains("synth")) {
        SynthConfig base;
        base.seed = c.seed;
        c.synth = synth_config_from_json(j["synth"], base);
      } else {
        c.synth.seed = c.seed;
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::InvalidConfig, e.what());
    }
    if ((c.verb_uses_nouns || c.motion_uses_nouns) && !c.word_vectors) {
      throw Error(ErrorKind::InvalidConfig, "noun conditioning needs word_vectors");
    }
    return c;
  }

  static RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::ParseError, std::string("config: ") + e.what());
    }
    return from_json(j, path.parent_path().empty() ? "." : path.parent_path());
  }
};

// ---------------------------------------------------------------------------
// Artifact names

inline std::string variant_tag(bool uses_nouns) { return uses_nouns ? "xz" : "x"; }

inline std::string embedding_name(const RunConfig& c) { return "embedding_" + variant_tag(c.motion_uses_nouns); }
inline std::string verb_name(const RunConfig& c) { return "verb_" + variant_tag(c.verb_uses_nouns); }

inline std::string source_tag(const RunConfig& c) {
  switch (c.motion_source.kind) {
    case SourceKind::Predicted: return "m" + variant_tag(c.motion_uses_nouns);
    case SourceKind::GroundTruth: return "gt";
    case SourceKind::Corrupted: {
      std::ostringstream s;
      s << "corrupt_p" << nlohmann::json(c.motion_source.p).dump() << "_s" << c.motion_source.seed;
      return s.str();
    }
  }
  return "";
}

inline std::string fusion_name(const RunConfig& c) {
  return "fusion_v" + variant_tag(c.verb_uses_nouns) + "_" + source_tag(c);
}

// ---------------------------------------------------------------------------
// IO helpers

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed on " + path.string());
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

struct RunInputs {
  Dataset train;
  Dataset val;
  std::shared_ptr<const WordVectorTable> nouns;

  const WordVectorTable* verb_nouns(const RunConfig& c) const { return c.verb_uses_nouns ? nouns.get() : nullptr; }
  const WordVectorTable* motion_nouns(const RunConfig& c) const {
    return c.motion_uses_nouns ? nouns.get() : nullptr;
  }
};

inline RunInputs load_inputs(const RunConfig& c, bool need_train = true) {
  RunInputs in;
  if (need_train) in.train = load_dataset(c.resolve(c.train), Split::Train);
  in.val = load_dataset(c.resolve(c.val), Split::Val);
  if (c.word_vectors && (c.verb_uses_nouns || c.motion_uses_nouns)) {
    in.nouns = std::make_shared<const WordVectorTable>(load_word_vectors(c.resolve(*c.word_vectors)));
  }
  return in;
}

inline VerbClassifier load_baseline(const RunConfig& c) {
  const auto path = c.out(verb_name(c) + ".ckpt.json");
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::Io, path.string() + " missing; run 'train verb' first");
  return verb_classifier_from_json(read_json_file(path));
}

inline MotionSource make_source(const RunConfig& c, const RunInputs& in) {
  switch (c.motion_source.kind) {
    case SourceKind::GroundTruth: return GroundTruthMotion{};
    case SourceKind::Corrupted: return CorruptedMotion{c.motion_source.p, c.motion_source.seed};
    case SourceKind::Predicted: {
      const auto path = c.out(embedding_name(c) + ".ckpt.json");
      if (!std::filesystem::exists(path)) {
        throw Error(ErrorKind::Io, path.string() + " missing; run 'train embed' first");
      }
      auto model = std::make_shared<const MotionModel>(motion_model_from_json(read_json_file(path)));
      return PredictedMotion{model, c.motion_uses_nouns ? in.nouns : nullptr};
    }
  }
  return GroundTruthMotion{};
}

// ---------------------------------------------------------------------------
// Entry points. Each returns the paths it wrote.

inline std::vector<std::filesystem::path> run_synth(const RunConfig& c) {
  const SynthData data = synth_generate(c.synth);
  std::vector<std::filesystem::path> written{c.resolve(c.train), c.resolve(c.val)};
  for (const auto& p : written) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  }
  save_dataset(written[0], data.train);
  save_dataset(written[1], data.val);
  if (c.word_vectors) {
    written.push_back(c.resolve(*c.word_vectors));
    if (written.back().has_parent_path()) std::filesystem::create_directories(written.back().parent_path());
    save_word_vectors(written.back(), data.nouns);
  }
  return written;
}

inline std::vector<std::filesystem::path> run_train_embed(const RunConfig& c) {
  const RunInputs in = load_inputs(c);
  const auto run = train_embedding(in.train, c.embedding, in.motion_nouns(c), &in.val);
  const nlohmann::json meta{{"train", c.train.generic_string()},
                            {"uses_nouns", c.motion_uses_nouns},
                            {"training", c.embedding.to_json()}};
  const auto ckpt = c.out(embedding_name(c) + ".ckpt.json");
  const auto hist = c.out(embedding_name(c) + "_history.csv");
  write_text(ckpt, checkpoint_json(run.model, &run.optimizer, meta).dump());
  write_text(hist, run.history.to_csv());
  return {ckpt, hist};
}

inline std::vector<std::filesystem::path> run_train_verb(const RunConfig& c) {
  const RunInputs in = load_inputs(c);
  const auto run = train_baseline(in.train, c.verb, in.verb_nouns(c), &in.val);
  const nlohmann::json meta{{"train", c.train.generic_string()},
                            {"uses_nouns", c.verb_uses_nouns},
                            {"training", c.verb.to_json()}};
  const auto ckpt = c.out(verb_name(c) + ".ckpt.json");
  const auto hist = c.out(verb_name(c) + "_history.csv");
  write_text(ckpt, checkpoint_json(run.classifier, &run.optimizer, meta).dump());
  write_text(hist, run.history.to_csv());
  return {ckpt, hist};
}

inline std::vector<std::filesystem::path> run_train_fusion(const RunConfig& c) {
  const RunInputs in = load_inputs(c);
  const VerbClassifier baseline = load_baseline(c);
  const MotionSource source = make_source(c, in);
  const auto run = train_fusion(baseline, in.verb_nouns(c), source, in.train, c.fusion, &in.val);
  const nlohmann::json meta{{"train", c.train.generic_string()},
                            {"baseline", verb_name(c)},
                            {"motion_source", c.motion_source.to_json()},
                            {"training", c.fusion.to_json()}};
  const auto ckpt = c.out(fusion_name(c) + ".ckpt.json");
  const auto hist = c.out(fusion_name(c) + "_history.csv");
  write_text(ckpt, checkpoint_json(run.fusion, &run.optimizer, meta).dump());
  write_text(hist, run.history.to_csv());
  return {ckpt, hist};
}

/// Scores the fused model and its baseline on the validation split.
inline std::vector<std::filesystem::path> run_eval_report(const RunConfig& c) {
  const RunInputs in = load_inputs(c, false);
  const VerbClassifier baseline = load_baseline(c);
  const MotionSource source = make_source(c, in);
  const auto fusion_path = c.out(fusion_name(c) + ".ckpt.json");
  if (!std::filesystem::exists(fusion_path)) {
    throw Error(ErrorKind::Io, fusion_path.string() + " missing; run 'train fusion' first");
  }
  const FusionMLP fusion = fusion_from_json(read_json_file(fusion_path));
  if (fusion.vocabulary != baseline.vocabulary) {
    throw Error(ErrorKind::VocabularyMismatch, "fusion and baseline checkpoints disagree on verbs");
  }

  const auto truths = verb_labels(baseline.vocabulary, in.val);
  const auto base_preds = argmax_columns(verb_probabilities(baseline, in.val, in.verb_nouns(c)));
  const auto fused_preds = argmax_columns(fused_probabilities(fusion, baseline, in.verb_nouns(c), source, in.val));

  EvalReport report = make_report(baseline.vocabulary, fused_preds, truths);
  report.baseline_top1 = top1_accuracy(base_preds, truths);
  if (const auto* p = std::get_if<PredictedMotion>(&source)) {
    bool labeled = true;
    for (const auto& ex : in.val.examples()) labeled = labeled && ex.code.has_value();
    if (labeled) report.motion = eval_embedding(*p->model, in.val, p->nouns.get());
  }
  const std::vector<std::uint64_t> seeds{c.seed};
  report.metadata = {{"config_hash", c.hash()},
                     {"seeds", seeds},
                     {"baseline", verb_name(c)},
                     {"fusion", fusion_name(c)},
                     {"motion_source", describe(source)},
                     {"val", c.val.generic_string()},
                     {"examples", in.val.size()}};

  const Predictions a{baseline.vocabulary, fused_preds};
  const Predictions b{baseline.vocabulary, base_preds};
  const Predictions t{baseline.vocabulary, truths};
  nlohmann::json j = report.to_json();
  j["per_class_delta"] = to_json(per_class_delta(a, b, t));

  const std::string stem = "report_" + c.hash() + "_" + seed_tag(seeds);
  const auto json_path = c.out(stem + ".json");
  const auto csv_path = c.out(stem + ".csv");
  write_text(json_path, j.dump(2) + "\n");
  write_text(csv_path, report.to_csv());
  return {json_path, csv_path};
}

/// Corruption sweep against the configured baseline. Fusion seeds follow the
/// sweep seeds; everything else comes from the fusion section.
inline std::vector<std::filesystem::path> run_eval_sweep(const RunConfig& c, SweepResult* out = nullptr) {
  const RunInputs in = load_inputs(c);
  const VerbClassifier baseline = load_baseline(c);
  const WordVectorTable* nouns = in.verb_nouns(c);
  const FusionTrainer trainer = [&](const MotionSource& source, std::uint64_t seed) {
    TrainConfig cfg = c.fusion;
    cfg.seed = seed;
    return train_fusion(baseline, nouns, source, in.train, cfg).fusion;
  };
  SweepResult result = corruption_sweep(baseline, nouns, trainer, in.val, c.sweep.p_grid, c.sweep.seeds);

  const std::string stem = "sweep_" + c.hash() + "_" + seed_tag(c.sweep.seeds);
  const auto csv_path = c.out(stem + ".csv");
  const auto json_path = c.out(stem + ".json");
  nlohmann::json j = result.to_json();
  j["metadata"] = {{"config_hash", c.hash()}, {"baseline", verb_name(c)}, {"val", c.val.generic_string()}};
  write_text(csv_path, result.to_csv());
  write_text(json_path, j.dump(2) + "\n");
  if (out) *out = std::move(result);
  return {csv_path, json_path};
}

}  // namespace motioncode
