// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <bitset>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "motioncode/cli.hpp"
#include "motioncode/eval.hpp"
#include "motioncode/experiment.hpp"
#include "motioncode/tree.hpp"

using namespace motioncode;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("%s  %-28s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

bool grammar_valid(const std::string& bits) {
  static const std::set<std::string> interactions{"000", "100", "101", "110", "111"};
  return interactions.contains(bits.substr(0, 3)) && bits.substr(4, 2) != "10" && bits.substr(6, 2) != "10";
}

// Features, verbs and codes shaped like the real corpus.
SynthConfig corpus_shape(std::uint64_t seed, double sigma) {
  SynthConfig c;
  c.n_train = 2742;
  c.n_val = 786;
  c.verb_count = 33;
  c.code_count = 32;
  c.feature_dim = 64;
  c.noise_sigma = sigma;
  c.seed = seed;
  return c;
}

double val_top1(const FusionMLP& f, const VerbClassifier& base, const MotionSource& src, const Dataset& val) {
  return top1_accuracy(argmax_columns(fused_probabilities(f, base, nullptr, src, val)),
                       verb_labels(base.vocabulary, val));
}

double baseline_top1(const VerbClassifier& base, const Dataset& val) {
  return top1_accuracy(argmax_columns(verb_probabilities(base, val, nullptr)), verb_labels(base.vocabulary, val));
}

TrainConfig seeded(TrainConfig c, std::uint64_t seed) {
  c.seed = seed;
  return c;
}

Outcome code_space() {
  std::ostringstream out, err;
  std::istringstream in;
  if (cli::run({"code", "enum"}, out, err, in) != 0) return {false, "code enum failed: " + err.str()};
  std::set<std::string> listed;
  std::istringstream lines(out.str());
  std::size_t count = 0;
  for (std::string l; std::getline(lines, l); ++count) listed.insert(l);
  std::size_t accepted = 0;
  bool agree = true;
  for (unsigned v = 0; v < 512; ++v) {
    const std::string bits = std::bitset<9>(v).to_string();
    const auto parsed = try_parse_code(bits);
    accepted += parsed.has_value();
    agree &= parsed.has_value() == grammar_valid(bits);
    if (parsed) agree &= listed.contains(format_code(*parsed));
  }
  const bool pass = count == 180 && listed.size() == 180 && accepted == 180 && agree;
  return {pass, "enum=" + std::to_string(count) + " scan_accepted=" + std::to_string(accepted) +
                    (agree ? "" : " grammar disagreement")};
}

Outcome codec_table() {
  std::size_t rows = 0;
  bool ok = true;
  for (const auto& row : kVerbCodeRows) {
    const auto code = parse_code(row.code);
    ok &= format_code(code) == row.code;
    ok &= parse_code(format_code(code, CodeStyle::Compact)) == code;
    const auto verbs = verbs_for_code(code);
    std::string_view rest = row.labels;
    while (!rest.empty()) {
      const auto sep = rest.find(';');
      for (const auto& v : detail::verb_tokens(rest.substr(0, sep))) ok &= verbs.contains(v);
      if (sep == std::string_view::npos) break;
      rest.remove_prefix(sep + 1);
    }
    ++rows;
  }
  TreeWalker w;
  for (std::size_t choice : {1, 1, 1, 0, 1, 0, 1}) w.choose(choice);
  const std::string chop = w.code() ? format_code(*w.code()) : "";
  ok &= chop == "111-0-01-00-1" && verbs_for_code(*w.code()).contains("chop");
  return {ok, std::to_string(rows) + " rows; chop walk -> " + chop};
}

Outcome loss_anchor() {
  ComponentBlocks uniform;
  for (std::size_t k = 0; k < kComponentCount; ++k) {
    uniform[k] = nn::Vector::Constant(static_cast<nn::Index>(kComponentClasses[k]), 1.0 / kComponentClasses[k]);
  }
  double worst = 0.0;
  for (const auto& gt : enumerate_codes()) worst = std::max(worst, std::abs(loss_LM(uniform, gt) - std::log(180.0)));

  // same anchor through a model whose heads output zeros
  std::mt19937_64 rng(1);
  auto m = MotionModel::create(4, 0, 8, rng);
  for (auto& h : m.heads) h = h.zeros_like();
  nn::Matrix x = nn::Matrix::Random(4, 10);
  std::vector<ClassIndices> targets;
  for (std::size_t i = 0; i < 10; ++i) targets.push_back(code_to_class_indices(enumerate_codes()[i * 17]));
  worst = std::max(worst, std::abs(motion_loss(m, x, targets, kUnitWeights) - std::log(180.0)));
  return {worst < 1e-9, fmt("ln 180 = %.4f, max deviation %.1e", std::log(180.0), worst)};
}

Outcome gradients() {
  double motion_worst = 0.0, fusion_worst = 0.0;
  const auto& codes = enumerate_codes();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0, 1);
    auto model = MotionModel::create(7, 4, 12, rng);
    nn::Matrix raw(11, 9);
    for (nn::Index c = 0; c < raw.cols(); ++c)
      for (nn::Index r = 0; r < raw.rows(); ++r) raw(r, c) = g(rng) * 1.5 + 0.3;
    model.input_norm = nn::Standardizer::fit(raw);
    for (auto& h : model.heads) h.layers[0].bias = nn::Vector::Random(h.layers[0].bias.size()) * 0.1;
    std::vector<ClassIndices> targets;
    for (nn::Index i = 0; i < raw.cols(); ++i) {
      targets.push_back(code_to_class_indices(codes[(seed * 29 + static_cast<std::uint64_t>(i) * 11) % 180]));
    }
    MotionGrads mg;
    (void)motion_loss(model, raw, targets, kUnitWeights, &mg);
    const auto mr = nn::grad_check(
        [&](std::span<const double> w) {
          auto copy = model;
          unflatten(copy, w);
          return motion_loss(copy, raw, targets, kUnitWeights);
        },
        flatten(model), flatten(mg));
    motion_worst = std::max(motion_worst, mr.max_relative_error);

    const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f", "g"};
    auto fusion = FusionMLP::create(vocab, 10, rng);
    for (auto& l : fusion.net.layers) l.bias = nn::Vector::Random(l.bias.size()) * 0.1;
    nn::Matrix fx(static_cast<nn::Index>(vocab.size() + kEmbeddingDim), 9);
    std::vector<std::size_t> labels;
    for (nn::Index i = 0; i < fx.cols(); ++i) {
      nn::Vector z(static_cast<nn::Index>(vocab.size()));
      for (auto& v : z) v = g(rng);
      fx.col(i).head(z.size()) = nn::softmax(z);
      const auto oh = one_hot_embedding(codes[(seed * 7 + static_cast<std::uint64_t>(i) * 13) % 180]);
      for (std::size_t k = 0; k < kEmbeddingDim; ++k) fx(z.size() + static_cast<nn::Index>(k), i) = oh[k];
      labels.push_back(static_cast<std::size_t>(i) % vocab.size());
    }
    nn::DenseParams fg;
    (void)softmax_loss(fusion.net, fx, labels, &fg);
    const auto fr = nn::grad_check(
        [&](std::span<const double> w) {
          auto copy = fusion.net;
          nn::unflatten(copy, w);
          return softmax_loss(copy, fx, labels);
        },
        nn::flatten(fusion.net), nn::flatten(fg));
    fusion_worst = std::max(fusion_worst, fr.max_relative_error);
  }
  return {motion_worst < 1e-5 && fusion_worst < 1e-5,
          fmt("max rel err motion %.2e, fusion %.2e over 20 seeds", motion_worst, fusion_worst)};
}

Outcome trainability() {
  const auto data = synth_generate(corpus_shape(1, 0.1));
  const auto run = train_embedding(data.train, TrainConfig::embedding_defaults(), nullptr, &data.val);
  const double exact = eval_embedding(run.model, data.val, nullptr).exact;
  return {exact >= 0.95, fmt("val exact-code %.2f%% after %.0f epochs", 100 * exact,
                             static_cast<double>(run.history.epochs.size()))};
}

Outcome noun_advantage() {
  double sum_x = 0, sum_xz = 0;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    auto cfg = corpus_shape(s, 0.3);
    cfg.noun_informativeness = 0.9;
    const auto data = synth_generate(cfg);
    const auto tc = seeded(TrainConfig::embedding_defaults(), s);
    const auto mx = train_embedding(data.train, tc);
    const auto mxz = train_embedding(data.train, tc, &data.nouns);
    sum_x += eval_embedding(mx.model, data.val, nullptr).exact;
    sum_xz += eval_embedding(mxz.model, data.val, &data.nouns).exact;
  }
  const double dx = 100 * sum_x / 5, dxz = 100 * sum_xz / 5;
  return {dxz - dx >= 2.0, fmt("M_xz %.2f%% vs M_x %.2f%%", dxz, dx)};
}

Outcome fusion_advantage() {
  double sum_base = 0, sum_fused = 0;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    auto cfg = corpus_shape(s, 0.3);
    cfg.noun_informativeness = 0.9;
    const auto data = synth_generate(cfg);
    const auto base = train_baseline(data.train, seeded(TrainConfig::verb_defaults(), s)).classifier;
    const auto fused =
        train_fusion(base, nullptr, GroundTruthMotion{}, data.train, seeded(TrainConfig::fusion_defaults(), s));
    sum_base += baseline_top1(base, data.val);
    sum_fused += val_top1(fused.fusion, base, GroundTruthMotion{}, data.val);
  }
  const double b = 100 * sum_base / 5, f = 100 * sum_fused / 5;
  return {f - b >= 5.0, fmt("fused(GT) %.2f%% vs baseline %.2f%%", f, b)};
}

Outcome trend() {
  auto cfg = corpus_shape(1, 0.3);
  cfg.noun_informativeness = 0.9;
  const auto data = synth_generate(cfg);
  const auto base = train_baseline(data.train, seeded(TrainConfig::verb_defaults(), 1)).classifier;
  const FusionTrainer trainer = [&](const MotionSource& src, std::uint64_t seed) {
    return train_fusion(base, nullptr, src, data.train, seeded(TrainConfig::fusion_defaults(), seed)).fusion;
  };
  const auto r = corruption_sweep(base, nullptr, trainer, data.val, {0.0, 0.25, 0.5, 0.75, 1.0}, {1, 2, 3, 4, 5});
  bool ok = true;
  std::string detail = "means:";
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    detail += " p" + nlohmann::json(r.rows[i].p).dump() + "=" + percent_string(r.rows[i].mean);
    if (i > 0 && 100 * (r.rows[i].mean - r.rows[i - 1].mean) > 2.0) ok = false;
  }
  detail += "; baseline " + percent_string(baseline_top1(base, data.val));
  return {ok, detail};
}

std::map<std::string, std::string> run_pipeline(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto j = nlohmann::json::parse(R"({
    "seed": 3, "train": "data/train.jsonl", "val": "data/val.jsonl", "word_vectors": "data/nouns.txt",
    "output_dir": "out", "verb_uses_nouns": true, "motion_uses_nouns": true,
    "motion_source": {"kind": "predicted"},
    "embedding": {"epochs": 5}, "verb": {"epochs": 5}, "fusion": {"epochs": 10},
    "sweep": {"p_grid": [0.0, 0.5, 1.0], "seeds": [1, 2]},
    "synth": {"n_train": 600, "n_val": 200}
  })");
  std::ofstream(dir / "run.json") << j.dump(2);
  const auto c = RunConfig::load(dir / "run.json");
  (void)run_synth(c);
  (void)run_train_embed(c);
  (void)run_train_verb(c);
  (void)run_train_fusion(c);
  (void)run_eval_report(c);
  (void)run_eval_sweep(c);
  auto gt = c;
  gt.motion_source.kind = SourceKind::GroundTruth;
  (void)run_train_fusion(gt);
  (void)run_eval_report(gt);
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[fs::relative(e.path(), dir).generic_string()] = s.str();
  }
  return files;
}

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "motioncode_acceptance_determinism";
  const auto a = run_pipeline(root / "a");
  const auto b = run_pipeline(root / "b");
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) ++differing;
  }
  fs::remove_all(root);
  return {a.size() == b.size() && differing == 0 && a.size() >= 14,
          std::to_string(a.size()) + " artifacts compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
  criterion("code-space size", code_space);
  criterion("codec and verb table", codec_table);
  criterion("loss anchor", loss_anchor);
  criterion("gradient correctness", gradients);
  criterion("trainability oracle", trainability);
  criterion("noun advantage", noun_advantage);
  criterion("fusion advantage", fusion_advantage);
  criterion("trend reproduction", trend);
  criterion("determinism", determinism);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
