#include <catch_amalgamated.hpp>

#include <algorithm>
#include <bitset>
#include <set>
#include <string>

#include "motioncode/taxonomy.hpp"

using namespace motioncode;

namespace {

// Independent validity rule, written from the grammar rather than the codec.
bool oracle_valid(const std::string& bits) {
  static const std::set<std::string> interactions{"000", "100", "101", "110", "111"};
  if (!interactions.contains(bits.substr(0, 3))) return false;
  if (bits.substr(4, 2) == "10") return false;
  if (bits.substr(6, 2) == "10") return false;
  return true;
}

std::string nine_bits(unsigned v) { return std::bitset<9>(v).to_string(); }

ErrorKind kind_of(const std::string& text) {
  try {
    (void)parse_code(text);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected parse_code to throw for " << text);
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("parse_code examples") {
  const auto chop = parse_code("111-0-01-00-1");
  CHECK(chop.interaction == Interaction::contact(Engagement::Soft, ContactDuration::Continuous));
  CHECK_FALSE(chop.cyclical);
  CHECK(chop.prismatic == Dof::One);
  CHECK(chop.revolute == Dof::Zero);
  CHECK(chop.passive_moves);

  const auto pour = parse_code("000-0-00-01-1");
  CHECK(pour.interaction == Interaction::non_contact());
  CHECK(pour.prismatic == Dof::Zero);
  CHECK(pour.revolute == Dof::One);
  CHECK(pour.passive_moves);

  CHECK(parse_code("111001001") == chop);
}

TEST_CASE("parse_code error kinds") {
  CHECK(kind_of("111-0-10-00-1") == ErrorKind::InvalidGroup);
  CHECK(kind_of("111-0-00-10-1") == ErrorKind::InvalidGroup);
  CHECK(kind_of("010-0-00-00-0") == ErrorKind::InvalidInteraction);
  CHECK(kind_of("001-0-00-00-0") == ErrorKind::InvalidInteraction);
  CHECK(kind_of("111-0-01-00") == ErrorKind::WrongLength);
  CHECK(kind_of("") == ErrorKind::WrongLength);
  CHECK(kind_of("1110010010") == ErrorKind::WrongLength);
  CHECK(kind_of("111-0-0x-00-1") == ErrorKind::NonBinaryCharacter);
  CHECK(kind_of("11100100a") == ErrorKind::NonBinaryCharacter);
  CHECK_FALSE(try_parse_code("garbage").has_value());
}

TEST_CASE("format_code styles") {
  const auto chop = parse_code("111-0-01-00-1");
  CHECK(format_code(chop) == "111-0-01-00-1");
  CHECK(format_code(chop, CodeStyle::Compact) == "111001001");
  const auto grasp = class_indices_to_code({2, 0, 0, 0, 0});
  CHECK(format_code(grasp) == "101-0-00-00-0");
}

TEST_CASE("exhaustive 512-string scan accepts exactly the enumerated set") {
  std::set<std::string> accepted;
  std::size_t oracle_count = 0;
  for (unsigned v = 0; v < 512; ++v) {
    const auto bits = nine_bits(v);
    const bool expected = oracle_valid(bits);
    oracle_count += expected;
    const auto parsed = try_parse_code(bits);
    INFO(bits);
    CHECK(parsed.has_value() == expected);
    if (parsed) {
      CHECK(format_code(*parsed, CodeStyle::Compact) == bits);
      accepted.insert(bits);
    }
  }
  CHECK(oracle_count == 180);
  CHECK(accepted.size() == 180);

  const auto& codes = enumerate_codes();
  REQUIRE(codes.size() == 180);
  std::set<std::string> enumerated;
  for (const auto& c : codes) enumerated.insert(format_code(c, CodeStyle::Compact));
  CHECK(enumerated == accepted);
  CHECK(format_code(codes.front()) == "000-0-00-00-0");
  CHECK(std::is_sorted(codes.begin(), codes.end(), [](const auto& a, const auto& b) {
    return format_code(a, CodeStyle::Compact) < format_code(b, CodeStyle::Compact);
  }));
}

TEST_CASE("round trip in both styles") {
  for (const auto& c : enumerate_codes()) {
    CHECK(parse_code(format_code(c)) == c);
    CHECK(parse_code(format_code(c, CodeStyle::Compact)) == c);
    CHECK(MotionCode::from_bits(c.bits()) == c);
  }
}

TEST_CASE("component classes") {
  const auto cc = component_classes();
  CHECK(std::vector<std::size_t>(cc.begin(), cc.end()) == std::vector<std::size_t>{5, 2, 3, 3, 2});
  std::size_t product = 1, sum = 0;
  for (auto c : cc) {
    product *= c;
    sum += c;
  }
  CHECK(product == 180);
  CHECK(sum == kEmbeddingDim);
}

TEST_CASE("class indices") {
  CHECK(code_to_class_indices(parse_code("101-0-00-00-0")) == ClassIndices{2, 0, 0, 0, 0});
  CHECK(code_to_class_indices(parse_code("111-0-01-00-1")) == ClassIndices{4, 0, 1, 0, 1});
  CHECK(class_indices_to_code({4, 0, 1, 0, 1}) == parse_code("111-0-01-00-1"));

  std::size_t tuples = 0;
  for (std::size_t a = 0; a < 5; ++a)
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t d = 0; d < 3; ++d)
          for (std::size_t e = 0; e < 2; ++e) {
            const ClassIndices idx{a, b, c, d, e};
            const auto code = class_indices_to_code(idx);
            CHECK(code_to_class_indices(code) == idx);
            ++tuples;
          }
  CHECK(tuples == 180);
  for (const auto& c : enumerate_codes()) CHECK(class_indices_to_code(code_to_class_indices(c)) == c);

  CHECK_THROWS_MATCHES(class_indices_to_code({5, 0, 0, 0, 0}), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.kind() == ErrorKind::IndexOutOfRange;
                       }));
  CHECK_THROWS_AS(class_indices_to_code({0, 0, 3, 0, 0}), Error);
}

TEST_CASE("one-hot embedding") {
  const auto grasp = one_hot_embedding(parse_code("101-0-00-00-0"));
  const std::array<double, 15> expected{0, 0, 1, 0, 0, 1, 0, 1, 0, 0, 1, 0, 0, 1, 0};
  CHECK(grasp == expected);
  for (const auto& c : enumerate_codes()) {
    const auto v = one_hot_embedding(c);
    double total = 0;
    for (double x : v) total += x;
    CHECK(total == 5.0);
    for (std::size_t k = 0; k < kComponentCount; ++k) {
      double block = 0;
      for (std::size_t i = 0; i < kComponentClasses[k]; ++i) block += v[kBlockOffsets[k] + i];
      CHECK(block == 1.0);
    }
  }
}

TEST_CASE("hamming examples and metric axioms over all pairs") {
  const auto pour = parse_code("000-0-00-01-1");
  const auto sprinkle = parse_code("000-1-01-00-1");
  CHECK(hamming(pour, sprinkle) == 3);

  // oracle: character comparison of compact strings
  auto char_diff = [](const MotionCode& a, const MotionCode& b) {
    const auto sa = format_code(a, CodeStyle::Compact), sb = format_code(b, CodeStyle::Compact);
    int d = 0;
    for (std::size_t i = 0; i < 9; ++i) d += sa[i] != sb[i];
    return d;
  };
  const auto& codes = enumerate_codes();
  for (const auto& a : codes) {
    for (const auto& b : codes) {
      const int d = hamming(a, b);
      CHECK(d == char_diff(a, b));
      CHECK(d >= 0);
      CHECK(d <= 9);
      CHECK((d == 0) == (a == b));
      CHECK(d == hamming(b, a));
    }
  }
  // triangle inequality, exhaustive
  std::size_t violations = 0;
  for (const auto& a : codes)
    for (const auto& b : codes) {
      const int ab = hamming(a, b);
      for (const auto& c : codes) violations += ab > hamming(a, c) + hamming(c, b);
    }
  CHECK(violations == 0);
}

TEST_CASE("weighted distance") {
  const auto grasp = parse_code("101-0-00-00-0");
  const auto chop = parse_code("111-0-01-00-1");
  CHECK(weighted_distance(grasp, chop) == 3.0);
  CHECK(weighted_distance(grasp, chop, {0, 0, 0, 0, 0}) == 0.0);
  CHECK(weighted_distance(parse_code("000-0-00-01-1"), parse_code("000-1-01-00-1"), {1, 0, 0, 0, 0}) == 0.0);
  CHECK(weighted_distance(grasp, chop, {0.5, 2, 4, 8, 16}) == 0.5 + 4 + 16);
  CHECK_THROWS_AS(weighted_distance(grasp, chop, {1, -1, 1, 1, 1}), Error);
  for (const auto& a : enumerate_codes()) CHECK(weighted_distance(a, a) == 0.0);
}

TEST_CASE("verb table lookups") {
  using S = std::set<std::string>;
  const auto g = verbs_for_code(parse_code("101-0-00-00-0"));
  CHECK(S(g.begin(), g.end()) == S{"grasp", "hold"});
  const auto cut = codes_for_verb("cut");
  CHECK(cut.contains(parse_code("111-0-01-00-1")));
  CHECK(cut.contains(parse_code("111-0-11-00-1")));
  CHECK(verbs_for_code(parse_code("000-0-00-00-0")).empty());
  CHECK(codes_for_verb("teleport").empty());
}

TEST_CASE("verb table fidelity against a retyped copy of the table") {
  // (code, verbs) pairs typed separately from the builtin rows; qualifiers dropped.
  const std::vector<std::pair<std::string, std::vector<std::string>>> rows{
      {"000-0-00-01-1", {"pour"}},
      {"000-1-01-00-1", {"sprinkle"}},
      {"100-0-01-00-0", {"poke", "press", "tap", "adjust"}},
      {"101-0-00-00-0", {"grasp", "hold"}},
      {"101-0-00-01-0", {"open", "close", "rotate", "turn", "twist"}},
      {"101-0-01-00-0", {"spread", "wipe", "move", "push"}},
      {"101-0-01-01-0", {"flip"}},
      {"101-0-11-00-1", {"open", "close"}},
      {"101-1-00-01-0", {"shake"}},
      {"101-1-01-00-0", {"shake"}},
      {"110-0-01-01-0", {"scoop"}},
      {"110-0-01-00-0", {"crack"}},
      {"111-0-01-00-0", {"insert", "pierce", "roll"}},
      {"111-0-00-00-0", {"squeeze"}},
      {"111-0-01-01-0", {"fold", "unwrap", "wrap"}},
      {"111-1-11-00-1", {"beat", "mix", "stir"}},
      {"111-0-01-00-1",
       {"flatten", "press", "squeeze", "pull apart", "peel", "chop", "cut", "mash", "scrape", "shave", "slice",
        "brush", "sweep", "spread"}},
      {"111-0-11-00-1", {"saw", "cut", "slice", "brush", "sweep"}},
      {"111-0-00-00-1", {"grate"}},
  };
  const auto& table = VerbCodeTable::builtin();
  CHECK(table.codes().size() == rows.size());
  for (const auto& [text, verbs] : rows) {
    INFO(text);
    const auto code = parse_code(text);
    CHECK(format_code(code) == text);
    const auto got = table.verbs_for_code(code);
    CHECK(got == std::set<std::string>(verbs.begin(), verbs.end()));
  }
  // many-to-many
  bool code_with_many = false, verb_with_many = false;
  for (const auto& [code, verbs] : table.entries()) code_with_many |= verbs.size() >= 2;
  for (const auto& v : table.verbs()) verb_with_many |= table.codes_for_verb(v).size() >= 2;
  CHECK(code_with_many);
  CHECK(verb_with_many);
  for (const auto& row : kVerbCodeRows) CHECK(try_parse_code(row.code).has_value());

  const auto j = table.to_json();
  REQUIRE(j.is_array());
  CHECK(j.size() == rows.size());
  CHECK(j[0].at("code").is_string());
  CHECK(j[0].at("verbs").is_array());
}

TEST_CASE("describe lists five components") {
  const auto lines = describe(parse_code("111-0-01-00-1"));
  REQUIRE(lines.size() == 5);
  CHECK(lines[0].first == "interaction");
  CHECK(lines[4].first == "passive");
}
