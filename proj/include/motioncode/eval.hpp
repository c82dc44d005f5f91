#pragma once

// Verb accuracy metrics, confusion matrices, the corruption sweep and
// per-class gain/loss counts between two classifiers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "motioncode/data.hpp"
#include "motioncode/embedding.hpp"
#include "motioncode/error.hpp"
#include "motioncode/verbmodel.hpp"

namespace motioncode {

inline double top1_accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> truths) {
  if (predictions.size() != truths.size()) {
    throw Error(ErrorKind::LengthMismatch, std::to_string(predictions.size()) + " predictions, " +
                                               std::to_string(truths.size()) + " truths");
  }
  if (truths.empty()) throw Error(ErrorKind::Empty, "no predictions");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) hits += predictions[i] == truths[i];
  return static_cast<double>(hits) / static_cast<double>(truths.size());
}

/// Fraction rendered as a percentage with two decimals, e.g. 0.5763 -> 57.63.
inline double as_percent(double fraction) { return std::round(fraction * 10000.0) / 100.0; }

inline std::string percent_string(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", fraction * 100.0);
  return buf;
}

/// counts[truth][prediction].
struct ConfusionMatrix {
  std::vector<std::vector<std::size_t>> counts;

  static ConfusionMatrix build(std::size_t classes, std::span<const std::size_t> predictions,
                               std::span<const std::size_t> truths) {
    if (predictions.size() != truths.size()) throw Error(ErrorKind::LengthMismatch, "confusion inputs");
    ConfusionMatrix m{std::vector<std::vector<std::size_t>>(classes, std::vector<std::size_t>(classes, 0))};
    for (std::size_t i = 0; i < truths.size(); ++i) {
      if (truths[i] >= classes || predictions[i] >= classes) {
        throw Error(ErrorKind::IndexOutOfRange, "class index beyond vocabulary");
      }
      ++m.counts[truths[i]][predictions[i]];
    }
    return m;
  }

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& row : counts)
      for (auto c : row) n += c;
    return n;
  }

  std::size_t diagonal() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) n += counts[i][i];
    return n;
  }
};

struct EvalReport {
  std::vector<std::string> vocabulary;
  double top1_verb = 0.0;
  std::optional<double> baseline_top1;
  std::optional<ComponentAccuracy> motion;
  ConfusionMatrix confusion;
  nlohmann::json metadata = nlohmann::json::object();

  nlohmann::json to_json() const {
    nlohmann::json j{{"top1_verb_pct", as_percent(top1_verb)},
                     {"vocabulary", vocabulary},
                     {"confusion", confusion.counts},
                     {"metadata", metadata}};
    if (baseline_top1) j["baseline_top1_pct"] = as_percent(*baseline_top1);
    if (motion) {
      nlohmann::json per = nlohmann::json::object();
      for (std::size_t k = 0; k < kComponentCount; ++k) {
        per[std::string(kComponentNames[k])] = as_percent(motion->per_component[k]);
      }
      j["per_component_acc_pct"] = per;
      j["exact_code_acc_pct"] = as_percent(motion->exact);
    }
    return j;
  }

  /// metric,value_pct rows.
  std::string to_csv() const {
    std::ostringstream out;
    out << "metric,value_pct\n";
    out << "top1_verb," << percent_string(top1_verb) << '\n';
    if (baseline_top1) out << "baseline_top1," << percent_string(*baseline_top1) << '\n';
    if (motion) {
      out << "exact_code_acc," << percent_string(motion->exact) << '\n';
      for (std::size_t k = 0; k < kComponentCount; ++k) {
        out << kComponentNames[k] << "_acc," << percent_string(motion->per_component[k]) << '\n';
      }
    }
    return out.str();
  }
};

inline EvalReport make_report(const std::vector<std::string>& vocabulary,
                              std::span<const std::size_t> predictions, std::span<const std::size_t> truths) {
  EvalReport r;
  r.vocabulary = vocabulary;
  r.top1_verb = top1_accuracy(predictions, truths);
  r.confusion = ConfusionMatrix::build(vocabulary.size(), predictions, truths);
  return r;
}

// ---------------------------------------------------------------------------
// Per-class deltas

struct Predictions {
  std::vector<std::string> vocabulary;
  std::vector<std::size_t> labels;
};

struct ClassDelta {
  std::string verb;
  std::size_t gained = 0;  // correct under A, wrong under B
  std::size_t lost = 0;    // correct under B, wrong under A
};

/// Counted per true verb of `truths`.
inline std::vector<ClassDelta> per_class_delta(const Predictions& a, const Predictions& b,
                                               const Predictions& truths) {
  if (a.vocabulary != b.vocabulary || a.vocabulary != truths.vocabulary) {
    throw Error(ErrorKind::VocabularyMismatch, "models disagree on the verb vocabulary");
  }
  if (a.labels.size() != truths.labels.size() || b.labels.size() != truths.labels.size()) {
    throw Error(ErrorKind::LengthMismatch, "prediction counts differ");
  }
  std::vector<ClassDelta> out(truths.vocabulary.size());
  for (std::size_t v = 0; v < out.size(); ++v) out[v].verb = truths.vocabulary[v];
  for (std::size_t i = 0; i < truths.labels.size(); ++i) {
    const std::size_t t = truths.labels[i];
    const bool ok_a = a.labels[i] == t;
    const bool ok_b = b.labels[i] == t;
    if (ok_a && !ok_b) ++out[t].gained;
    if (ok_b && !ok_a) ++out[t].lost;
  }
  return out;
}

inline nlohmann::json to_json(const std::vector<ClassDelta>& deltas) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& d : deltas) j.push_back({{"verb", d.verb}, {"gained", d.gained}, {"lost", d.lost}});
  return j;
}

// ---------------------------------------------------------------------------
// Corruption sweep

struct SweepRow {
  double p = 0.0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single seed
  std::vector<double> per_seed;
};

struct SweepResult {
  std::vector<std::uint64_t> seeds;
  std::vector<SweepRow> rows;

  /// p,mean_top1_pct,std_top1_pct,seed_<s>_pct...
  std::string to_csv() const {
    std::ostringstream out;
    out << "p,mean_top1_pct,std_top1_pct";
    for (auto s : seeds) out << ",seed_" << s << "_pct";
    out << '\n';
    for (const auto& r : rows) {
      out << nlohmann::json(r.p).dump() << ',' << percent_string(r.mean) << ',' << percent_string(r.stddev);
      for (double a : r.per_seed) out << ',' << percent_string(a);
      out << '\n';
    }
    return out.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json per = nlohmann::json::array();
      for (double a : r.per_seed) per.push_back(as_percent(a));
      rows_json.push_back({{"p", r.p},
                           {"mean_top1_pct", as_percent(r.mean)},
                           {"std_top1_pct", as_percent(r.stddev)},
                           {"per_seed_pct", per}});
    }
    return {{"seeds", seeds}, {"rows", rows_json}};
  }
};

inline std::pair<double, double> mean_and_sample_std(std::span<const double> xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

/// Trains a fusion MLP for a given (source, seed).
using FusionTrainer = std::function<FusionMLP(const MotionSource&, std::uint64_t seed)>;

/// For each p (ascending, distinct) and seed: train fusion on Corrupted(p, seed)
/// and score it on `val`.
inline SweepResult corruption_sweep(const VerbClassifier& baseline, const WordVectorTable* baseline_nouns,
                                    const FusionTrainer& trainer, const Dataset& val,
                                    std::vector<double> p_grid, std::vector<std::uint64_t> seeds) {
  if (p_grid.empty() || seeds.empty()) throw Error(ErrorKind::InvalidConfig, "empty p grid or seed list");
  std::sort(p_grid.begin(), p_grid.end());
  if (std::adjacent_find(p_grid.begin(), p_grid.end()) != p_grid.end()) {
    throw Error(ErrorKind::InvalidConfig, "duplicate corruption rates");
  }
  for (double p : p_grid) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidConfig, "corruption rate outside [0, 1]");
  }
  (void)code_targets(val);  // MissingCode
  const auto truths = verb_labels(baseline.vocabulary, val);

  SweepResult result;
  result.seeds = seeds;
  for (double p : p_grid) {
    SweepRow row;
    row.p = p;
    for (auto seed : seeds) {
      const MotionSource source = CorruptedMotion{p, seed};
      const FusionMLP fusion = trainer(source, seed);
      const auto preds = argmax_columns(fused_probabilities(fusion, baseline, baseline_nouns, source, val));
      row.per_seed.push_back(top1_accuracy(preds, truths));
    }
    std::tie(row.mean, row.stddev) = mean_and_sample_std(row.per_seed);
    result.rows.push_back(std::move(row));
  }
  return result;
}

/// "s1-2-3" style tag used in report file names.
inline std::string seed_tag(std::span<const std::uint64_t> seeds) {
  std::string out = "s";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(seeds[i]);
  }
  return out;
}

}  // namespace motioncode
