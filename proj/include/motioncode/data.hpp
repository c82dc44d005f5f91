#pragma once

// Annotated clip datasets (one JSON object per line), word-vector tables and
// a synthetic generator with planted (verb, code) prototypes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "motioncode/error.hpp"
#include "motioncode/taxonomy.hpp"

namespace motioncode {

struct Example {
  std::string id;
  std::vector<double> features;
  std::string noun;
  std::string verb;
  std::optional<MotionCode> code;
};

enum class Split { Train, Val, Test };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

class Dataset {
 public:
  Dataset() = default;

  /// Validates uniform feature dimension and unique ids.
  explicit Dataset(std::vector<Example> examples, Split split = Split::Train)
      : examples_(std::move(examples)), split_(split) {
    std::unordered_set<std::string> ids;
    std::set<std::string> verbs;
    std::set<std::string> nouns;
    for (std::size_t i = 0; i < examples_.size(); ++i) {
      const auto& ex = examples_[i];
      if (i == 0) feature_dim_ = ex.features.size();
      if (ex.features.size() != feature_dim_) {
        throw Error(ErrorKind::DimensionMismatch, "example '" + ex.id + "' has " +
                                                      std::to_string(ex.features.size()) +
                                                      " features, expected " +
                                                      std::to_string(feature_dim_));
      }
      if (!ids.insert(ex.id).second) throw Error(ErrorKind::DuplicateId, ex.id);
      verbs.insert(ex.verb);
      nouns.insert(ex.noun);
    }
    verbs_.assign(verbs.begin(), verbs.end());
    nouns_.assign(nouns.begin(), nouns.end());
  }

  const std::vector<Example>& examples() const { return examples_; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  const Example& operator[](std::size_t i) const { return examples_[i]; }

  /// Sorted distinct verb labels.
  const std::vector<std::string>& verbs() const { return verbs_; }
  const std::vector<std::string>& nouns() const { return nouns_; }
  std::size_t feature_dim() const { return feature_dim_; }
  Split split() const { return split_; }

 private:
  std::vector<Example> examples_;
  std::vector<std::string> verbs_;
  std::vector<std::string> nouns_;
  std::size_t feature_dim_ = 0;
  Split split_ = Split::Train;
};

// ---------------------------------------------------------------------------
// Record format

inline nlohmann::json to_record(const Example& ex, bool with_features = true) {
  nlohmann::json j{{"id", ex.id},
                   {"verb", ex.verb},
                   {"noun", ex.noun},
                   {"code", ex.code ? nlohmann::json(format_code(*ex.code)) : nlohmann::json()}};
  if (with_features) j["features"] = ex.features;
  return j;
}

inline void write_dataset(std::ostream& out, const Dataset& ds) {
  for (const auto& ex : ds.examples()) out << to_record(ex).dump() << '\n';
}

inline void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  write_dataset(out, ds);
}

namespace detail {

/// Rows of whitespace-separated reals, for `features_ref` sidecars.
class SidecarCache {
 public:
  explicit SidecarCache(std::filesystem::path base) : base_(std::move(base)) {}

  const std::vector<double>& row(const std::string& file, std::size_t index, std::size_t line) {
    auto it = files_.find(file);
    if (it == files_.end()) {
      std::ifstream in(base_ / file);
      if (!in) throw Error(ErrorKind::ParseError, "cannot open features file '" + file + "'", line);
      std::vector<std::vector<double>> rows;
      std::string text;
      while (std::getline(in, text)) {
        std::istringstream ss(text);
        std::vector<double> values;
        double v;
        while (ss >> v) values.push_back(v);
        rows.push_back(std::move(values));
      }
      it = files_.emplace(file, std::move(rows)).first;
    }
    if (index >= it->second.size()) {
      throw Error(ErrorKind::ParseError, "features_ref row " + std::to_string(index) + " missing",
                  line);
    }
    return it->second[index];
  }

 private:
  std::filesystem::path base_;
  std::map<std::string, std::vector<std::vector<double>>> files_;
};

inline const std::set<std::string>& record_keys() {
  static const std::set<std::string> keys{"id", "verb", "noun", "code", "features", "features_ref"};
  return keys;
}

}  // namespace detail

/// Reads line-delimited records. `base_dir` resolves `features_ref` files.
/// Records without features get an empty feature vector.
inline Dataset read_dataset(std::istream& in, Split split = Split::Train,
                            const std::filesystem::path& base_dir = ".") {
  std::vector<Example> examples;
  std::unordered_set<std::string> ids;
  std::optional<std::size_t> dim;
  detail::SidecarCache sidecars(base_dir);
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::ParseError, e.what(), line);
    }
    if (!j.is_object()) throw Error(ErrorKind::ParseError, "record is not an object", line);
    for (const auto& [key, value] : j.items()) {
      if (!detail::record_keys().contains(key)) {
        throw Error(ErrorKind::ParseError, "unknown field '" + key + "'", line);
      }
    }
    Example ex;
    try {
      ex.id = j.at("id").get<std::string>();
      ex.verb = j.at("verb").get<std::string>();
      ex.noun = j.at("noun").get<std::string>();
      if (j.contains("features") && j.contains("features_ref")) {
        throw Error(ErrorKind::ParseError, "both features and features_ref given", line);
      }
      if (j.contains("features")) {
        ex.features = j.at("features").get<std::vector<double>>();
      } else if (j.contains("features_ref")) {
        const auto& ref = j.at("features_ref");
        ex.features = sidecars.row(ref.at("file").get<std::string>(),
                                   ref.at("row").get<std::size_t>(), line);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ParseError, e.what(), line);
    }
    for (double v : ex.features) {
      if (!std::isfinite(v)) throw Error(ErrorKind::ParseError, "non-finite feature", line);
    }
    if (j.contains("code") && !j.at("code").is_null()) {
      if (!j.at("code").is_string()) throw Error(ErrorKind::ParseError, "code must be a string", line);
      const auto text_code = j.at("code").get<std::string>();
      try {
        ex.code = parse_code(text_code);
      } catch (const Error& e) {
        throw Error(ErrorKind::InvalidCode, e.what(), line);
      }
    }
    if (!dim) dim = ex.features.size();
    if (ex.features.size() != *dim) {
      throw Error(ErrorKind::DimensionMismatch,
                  std::to_string(ex.features.size()) + " features, expected " + std::to_string(*dim),
                  line);
    }
    if (!ids.insert(ex.id).second) throw Error(ErrorKind::DuplicateId, ex.id, line);
    examples.push_back(std::move(ex));
  }
  return Dataset(std::move(examples), split);
}

inline Dataset load_dataset(const std::filesystem::path& path, Split split = Split::Train) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return read_dataset(in, split, path.parent_path().empty() ? "." : path.parent_path());
}

// ---------------------------------------------------------------------------
// Word vectors

class WordVectorTable {
 public:
  WordVectorTable() = default;
  explicit WordVectorTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  bool contains(const std::string& token) const { return vectors_.contains(token); }

  void insert(const std::string& token, std::vector<double> vec) {
    if (vec.size() != dim_) {
      throw Error(ErrorKind::BadVectorLength, "'" + token + "' has " + std::to_string(vec.size()) +
                                                  " values, table dimension is " +
                                                  std::to_string(dim_));
    }
    if (!vectors_.contains(token)) order_.push_back(token);
    vectors_[token] = std::move(vec);
  }

  /// Missing tokens are an error, never a zero vector.
  const std::vector<double>& lookup(const std::string& token) const {
    const auto it = vectors_.find(token);
    if (it == vectors_.end()) throw Error(ErrorKind::MissingToken, "'" + token + "'");
    return it->second;
  }

  /// Tokens in insertion order.
  const std::vector<std::string>& tokens() const { return order_; }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
  std::vector<std::string> order_;
};

inline WordVectorTable read_word_vectors(std::istream& in) {
  std::string text;
  if (!std::getline(in, text)) throw Error(ErrorKind::HeaderMismatch, "empty file", 1);
  std::istringstream header(text);
  long long count = -1;
  long long dim = -1;
  std::string extra;
  if (!(header >> count >> dim) || (header >> extra) || count < 0 || dim <= 0) {
    throw Error(ErrorKind::HeaderMismatch, "expected '<count> <dim>', got '" + text + "'", 1);
  }
  WordVectorTable table(static_cast<std::size_t>(dim));
  std::size_t line = 1;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(text);
    std::string token;
    ss >> token;
    std::vector<double> values;
    std::string field;
    while (ss >> field) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw Error(ErrorKind::BadVectorLength, "non-numeric value '" + field + "'", line);
      }
    }
    if (values.size() != table.dim()) {
      throw Error(ErrorKind::BadVectorLength,
                  "'" + token + "' has " + std::to_string(values.size()) + " values, expected " +
                      std::to_string(table.dim()),
                  line);
    }
    table.insert(token, std::move(values));
  }
  if (table.size() != static_cast<std::size_t>(count)) {
    throw Error(ErrorKind::HeaderMismatch, "header declares " + std::to_string(count) +
                                               " entries, file has " + std::to_string(table.size()));
  }
  return table;
}

inline WordVectorTable load_word_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return read_word_vectors(in);
}

inline void write_word_vectors(std::ostream& out, const WordVectorTable& table) {
  out << table.size() << ' ' << table.dim() << '\n';
  for (const auto& token : table.tokens()) {
    out << token;
    for (double v : table.lookup(token)) out << ' ' << nlohmann::json(v).dump();
    out << '\n';
  }
}

inline void save_word_vectors(const std::filesystem::path& path, const WordVectorTable& table) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  write_word_vectors(out, table);
}

// ---------------------------------------------------------------------------
// Model inputs

/// Columns are examples: features, optionally followed by the noun vector.
inline Eigen::MatrixXd input_matrix(const Dataset& ds, const WordVectorTable* nouns) {
  const std::size_t extra = nouns ? nouns->dim() : 0;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ds.feature_dim() + extra),
                      static_cast<Eigen::Index>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& ex = ds[i];
    auto col = out.col(static_cast<Eigen::Index>(i));
    for (std::size_t d = 0; d < ex.features.size(); ++d) col(static_cast<Eigen::Index>(d)) = ex.features[d];
    if (nouns) {
      const auto& nv = nouns->lookup(ex.noun);
      for (std::size_t d = 0; d < nv.size(); ++d)
        col(static_cast<Eigen::Index>(ds.feature_dim() + d)) = nv[d];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator

struct SynthConfig {
  std::size_t n_train = 2742;
  std::size_t n_val = 786;
  std::size_t feature_dim = 32;
  double noise_sigma = 0.1;
  std::size_t verb_count = 33;
  std::size_t codes_per_verb = 1;
  /// Distinct codes used overall; verb-table codes are drawn first.
  std::size_t code_count = 32;
  double noun_informativeness = 1.0;
  std::size_t noun_dim = 16;
  std::uint64_t seed = 1;

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::InvalidConfig, m); };
    if (n_train == 0) fail("n_train must be positive");
    if (feature_dim == 0) fail("feature_dim must be positive");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) fail("noise_sigma must be >= 0");
    if (verb_count == 0) fail("verb_count must be positive");
    if (codes_per_verb == 0) fail("codes_per_verb must be >= 1");
    if (code_count == 0 || code_count > kValidCodeCount) fail("code_count must be in [1, 180]");
    if (codes_per_verb > code_count) fail("codes_per_verb exceeds code_count");
    if (verb_count * codes_per_verb < code_count) {
      fail("verb_count * codes_per_verb must cover code_count");
    }
    if (!(noun_informativeness >= 0.0 && noun_informativeness <= 1.0)) {
      fail("noun_informativeness must be in [0, 1]");
    }
    if (noun_dim == 0) fail("noun_dim must be positive");
  }
};

struct SynthData {
  Dataset train;
  Dataset val;
  WordVectorTable nouns;
  /// verb index -> planted codes
  std::vector<std::vector<MotionCode>> verb_codes;
  std::vector<std::string> verb_names;
  /// noun token planted for each pool code
  std::map<MotionCode, std::string> code_nouns;
};

namespace detail {

inline std::string numbered(const char* prefix, std::size_t i, std::size_t width) {
  std::string n = std::to_string(i);
  if (n.size() < width) n.insert(0, width - n.size(), '0');
  return prefix + n;
}

inline std::vector<double> unit_gaussian(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

}  // namespace detail

/// Deterministic in `config.seed`.
inline SynthData synth_generate(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);

  // Code pool: verb-table codes first, then the rest of the valid space.
  std::vector<MotionCode> table_codes = VerbCodeTable::builtin().codes();
  std::shuffle(table_codes.begin(), table_codes.end(), rng);
  std::vector<MotionCode> pool(table_codes.begin(),
                               table_codes.begin() +
                                   static_cast<std::ptrdiff_t>(std::min(config.code_count, table_codes.size())));
  if (pool.size() < config.code_count) {
    std::vector<MotionCode> rest;
    for (const auto& c : enumerate_codes()) {
      if (std::find(table_codes.begin(), table_codes.end(), c) == table_codes.end()) rest.push_back(c);
    }
    std::shuffle(rest.begin(), rest.end(), rng);
    pool.insert(pool.end(), rest.begin(),
                rest.begin() + static_cast<std::ptrdiff_t>(config.code_count - pool.size()));
  }

  SynthData out;
  const std::size_t width = std::to_string(std::max(config.verb_count, pool.size())).size();
  for (std::size_t v = 0; v < config.verb_count; ++v) out.verb_names.push_back(detail::numbered("verb", v, width));
  std::vector<std::string> noun_tokens;
  for (std::size_t c = 0; c < pool.size(); ++c) {
    noun_tokens.push_back(detail::numbered("noun", c, width));
    out.code_nouns[pool[c]] = noun_tokens.back();
  }

  // Slot s = v * codes_per_verb + j; the first code_count slots cover the pool.
  std::vector<std::size_t> cover(pool.size());
  for (std::size_t i = 0; i < cover.size(); ++i) cover[i] = i;
  std::shuffle(cover.begin(), cover.end(), rng);
  std::uniform_int_distribution<std::size_t> pick_code(0, pool.size() - 1);
  out.verb_codes.resize(config.verb_count);
  for (std::size_t v = 0; v < config.verb_count; ++v) {
    auto& codes = out.verb_codes[v];
    for (std::size_t j = 0; j < config.codes_per_verb; ++j) {
      const std::size_t slot = v * config.codes_per_verb + j;
      if (slot < pool.size()) {
        codes.push_back(pool[cover[slot]]);
        continue;
      }
      MotionCode c;
      do {
        c = pool[pick_code(rng)];
      } while (std::find(codes.begin(), codes.end(), c) != codes.end());
      codes.push_back(c);
    }
  }

  std::vector<std::vector<std::vector<double>>> prototypes(config.verb_count);
  for (std::size_t v = 0; v < config.verb_count; ++v) {
    for (std::size_t j = 0; j < config.codes_per_verb; ++j) {
      prototypes[v].push_back(detail::unit_gaussian(config.feature_dim, rng));
    }
  }

  out.nouns = WordVectorTable(config.noun_dim);
  for (const auto& token : noun_tokens) out.nouns.insert(token, detail::unit_gaussian(config.noun_dim, rng));

  std::uniform_int_distribution<std::size_t> pick_verb(0, config.verb_count - 1);
  std::uniform_int_distribution<std::size_t> pick_slot(0, config.codes_per_verb - 1);
  std::uniform_int_distribution<std::size_t> pick_noun(0, noun_tokens.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  auto make = [&](std::size_t n, const char* prefix) {
    std::vector<Example> examples;
    examples.reserve(n);
    const std::size_t id_width = std::to_string(n).size();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t v = pick_verb(rng);
      const std::size_t j = pick_slot(rng);
      Example ex;
      ex.id = detail::numbered(prefix, i, id_width);
      ex.verb = out.verb_names[v];
      ex.code = out.verb_codes[v][j];
      ex.features = prototypes[v][j];
      for (auto& x : ex.features) x += config.noise_sigma * noise(rng);
      ex.noun = unit(rng) < config.noun_informativeness ? out.code_nouns.at(*ex.code)
                                                        : noun_tokens[pick_noun(rng)];
      examples.push_back(std::move(ex));
    }
    return examples;
  };
  out.train = Dataset(make(config.n_train, "train-"), Split::Train);
  out.val = Dataset(make(config.n_val, "val-"), Split::Val);
  return out;
}

// ---------------------------------------------------------------------------
// Stats

struct DatasetStats {
  std::size_t examples = 0;
  std::size_t labeled = 0;
  std::size_t unique_codes = 0;
  std::size_t unique_verbs = 0;
  std::size_t unique_nouns = 0;
  std::map<std::string, std::size_t> verb_histogram;
  std::map<std::string, std::size_t> code_histogram;
  /// Verbs with fewer than three examples.
  std::vector<std::string> rare_verbs;

  nlohmann::json to_json() const {
    return {{"examples", examples},         {"labeled", labeled},
            {"unique_codes", unique_codes}, {"unique_verbs", unique_verbs},
            {"unique_nouns", unique_nouns}, {"verb_histogram", verb_histogram},
            {"code_histogram", code_histogram}, {"rare_verbs", rare_verbs}};
  }
};

inline DatasetStats dataset_stats(const Dataset& ds) {
  DatasetStats s;
  s.examples = ds.size();
  std::set<std::string> nouns;
  for (const auto& ex : ds.examples()) {
    ++s.verb_histogram[ex.verb];
    nouns.insert(ex.noun);
    if (ex.code) {
      ++s.labeled;
      ++s.code_histogram[format_code(*ex.code)];
    }
  }
  s.unique_codes = s.code_histogram.size();
  s.unique_verbs = s.verb_histogram.size();
  s.unique_nouns = nouns.size();
  for (const auto& [verb, n] : s.verb_histogram) {
    if (n < 3) s.rare_verbs.push_back(verb);
  }
  return s;
}

}  // namespace motioncode
