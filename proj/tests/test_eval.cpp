#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "motioncode/eval.hpp"

using namespace motioncode;
using Catch::Approx;

namespace {

using Labels = std::vector<std::size_t>;

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;
}

SynthData small_synth() {
  SynthConfig cfg;
  cfg.n_train = 300;
  cfg.n_val = 100;
  cfg.feature_dim = 8;
  cfg.verb_count = 6;
  cfg.code_count = 6;
  cfg.noise_sigma = 0.5;
  cfg.seed = 11;
  return synth_generate(cfg);
}

TrainConfig quick(std::size_t epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.hidden_dim = 8;
  return c;
}

}  // namespace

TEST_CASE("top1 examples") {
  CHECK(top1_accuracy(Labels{1, 2, 3}, Labels{1, 2, 3}) == 1.0);
  CHECK(top1_accuracy(Labels{0, 0, 0, 0}, Labels{0, 1, 0, 1}) == 0.5);
  CHECK(top1_accuracy(Labels{2}, Labels{1}) == 0.0);
  CHECK(kind_of([] { (void)top1_accuracy(Labels{1}, Labels{1, 2}); }) == ErrorKind::LengthMismatch);
  CHECK(kind_of([] { (void)top1_accuracy(Labels{}, Labels{}); }) == ErrorKind::Empty);
}

TEST_CASE("top1 is invariant under joint permutation") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> d(0, 4);
  Labels p(200), t(200);
  for (std::size_t i = 0; i < 200; ++i) {
    p[i] = d(rng);
    t[i] = d(rng);
  }
  const double base = top1_accuracy(p, t);
  std::vector<std::size_t> order(200);
  for (std::size_t i = 0; i < 200; ++i) order[i] = i;
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(order.begin(), order.end(), rng);
    Labels ps, ts;
    for (auto i : order) {
      ps.push_back(p[i]);
      ts.push_back(t[i]);
    }
    CHECK(top1_accuracy(ps, ts) == base);
  }
}

TEST_CASE("percent formatting") {
  CHECK(as_percent(0.123456) == 12.35);
  CHECK(percent_string(0.5) == "50.00");
  CHECK(percent_string(1.0) == "100.00");
}

TEST_CASE("confusion matrix") {
  const Labels p{0, 1, 1, 2, 2, 2};
  const Labels t{0, 1, 2, 2, 0, 2};
  const auto m = ConfusionMatrix::build(3, p, t);
  CHECK(m.total() == 6);
  CHECK(m.diagonal() == 4);
  CHECK(m.counts[2][1] == 1);
  CHECK(m.counts[0][2] == 1);
  CHECK(static_cast<double>(m.diagonal()) / m.total() == Approx(top1_accuracy(p, t)));
}

TEST_CASE("report serialisation") {
  auto r = make_report({"cut", "pour"}, Labels{0, 1, 1}, Labels{0, 1, 0});
  r.baseline_top1 = 0.5;
  const auto j = r.to_json();
  CHECK(j.at("top1_verb_pct") == 66.67);
  CHECK(j.at("baseline_top1_pct") == 50.0);
  CHECK(!j.contains("exact_code_acc_pct"));
  CHECK(r.to_csv() == "metric,value_pct\ntop1_verb,66.67\nbaseline_top1,50.00\n");

  r.motion = ComponentAccuracy{{1.0, 0.5, 0.5, 0.5, 0.5}, 0.25};
  CHECK(r.to_json().at("per_component_acc_pct").at(std::string(kComponentNames[0])) == 100.0);
}

TEST_CASE("per-class delta") {
  const std::vector<std::string> vocab{"a", "b", "c"};
  const Predictions truth{vocab, {0, 1, 2, 2, 1}};
  const Predictions a{vocab, {0, 1, 2, 0, 0}};
  const Predictions b{vocab, {0, 0, 2, 2, 1}};
  const auto d = per_class_delta(a, b, truth);
  REQUIRE(d.size() == 3);
  CHECK(d[0].gained == 0);
  CHECK(d[1].gained == 1);
  CHECK(d[1].lost == 1);
  CHECK(d[2].lost == 1);

  for (const auto& x : per_class_delta(a, a, truth)) {
    CHECK(x.gained == 0);
    CHECK(x.lost == 0);
  }
  // net gain equals the accuracy difference
  long net = 0;
  for (const auto& x : d) net += static_cast<long>(x.gained) - static_cast<long>(x.lost);
  CHECK(net == 3 - 4);

  CHECK(kind_of([&] { (void)per_class_delta(Predictions{{"x"}, a.labels}, b, truth); }) ==
        ErrorKind::VocabularyMismatch);
  CHECK(kind_of([&] { (void)per_class_delta(Predictions{vocab, {0}}, b, truth); }) == ErrorKind::LengthMismatch);
  CHECK(to_json(d)[1].at("gained") == 1);
}

TEST_CASE("mean and sample std") {
  const std::vector<double> xs{2, 4, 4, 4, 5, 5, 7, 9};
  const auto [m, s] = mean_and_sample_std(xs);
  CHECK(m == 5.0);
  CHECK(s == Approx(std::sqrt(32.0 / 7.0)));
  const std::vector<double> one{0.3};
  CHECK(mean_and_sample_std(one).second == 0.0);
}

TEST_CASE("corruption sweep") {
  const auto data = small_synth();
  const auto base = train_baseline(data.train, quick(3)).classifier;
  FusionTrainer trainer = [&](const MotionSource& source, std::uint64_t seed) {
    auto cfg = quick(5);
    cfg.seed = seed;
    return train_fusion(base, nullptr, source, data.train, cfg).fusion;
  };

  const auto r = corruption_sweep(base, nullptr, trainer, data.val, {1.0, 0.0, 0.5}, {1, 2});
  REQUIRE(r.rows.size() == 3);
  CHECK(r.rows[0].p == 0.0);
  CHECK(r.rows[1].p == 0.5);
  CHECK(r.rows[2].p == 1.0);
  CHECK(r.rows[0].per_seed.size() == 2);
  CHECK(r.to_csv().rfind("p,mean_top1_pct,std_top1_pct,seed_1_pct,seed_2_pct\n0.0,", 0) == 0);

  // p = 0 is the ground-truth run
  auto cfg = quick(5);
  cfg.seed = 1;
  const auto gt = train_fusion(base, nullptr, GroundTruthMotion{}, data.train, cfg).fusion;
  const auto gt_acc = top1_accuracy(argmax_columns(fused_probabilities(gt, base, nullptr, GroundTruthMotion{}, data.val)),
                                    verb_labels(base.vocabulary, data.val));
  CHECK(r.rows[0].per_seed[0] == gt_acc);

  const auto again = corruption_sweep(base, nullptr, trainer, data.val, {0.0, 0.5, 1.0}, {1, 2});
  CHECK(again.to_csv() == r.to_csv());
  CHECK(again.to_json().dump() == r.to_json().dump());

  CHECK(kind_of([&] { (void)corruption_sweep(base, nullptr, trainer, data.val, {0.5, 0.5}, {1}); }) ==
        ErrorKind::InvalidConfig);
  CHECK(kind_of([&] { (void)corruption_sweep(base, nullptr, trainer, data.val, {1.5}, {1}); }) ==
        ErrorKind::InvalidConfig);
  std::vector<Example> ex = data.val.examples();
  ex[4].code.reset();
  const Dataset missing(ex);
  CHECK(kind_of([&] { (void)corruption_sweep(base, nullptr, trainer, missing, {0.0}, {1}); }) ==
        ErrorKind::MissingCode);
}

TEST_CASE("seed tag") {
  const std::vector<std::uint64_t> s{1, 2, 3};
  CHECK(seed_tag(s) == "s1-2-3");
}
