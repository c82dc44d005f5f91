#pragma once

// Motion codes: a 9-bit record of five taxonomy components.
//
//   interaction(3) - recurrence(1) - prismatic(2) - revolute(2) - passive(1)
//
// Interaction is one of 000 (non-contact), or 1 followed by the engagement
// bit (0 rigid, 1 soft) and the duration bit (0 discontinuous, 1 continuous).
// DOF groups are 00 (zero), 01 (one) or 11 (many). That leaves
// 5 * 2 * 3 * 3 * 2 = 180 valid codes out of 512 bit strings.

#include <algorithm>
#include <array>
#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "motioncode/error.hpp"

namespace motioncode {

enum class Engagement : std::uint8_t { Rigid = 0, Soft = 1 };
enum class ContactDuration : std::uint8_t { Discontinuous = 0, Continuous = 1 };
enum class Dof : std::uint8_t { Zero = 0, One = 1, Many = 2 };

/// Contact/non-contact interaction. Only the five valid 3-bit groups are
/// constructible.
class Interaction {
 public:
  static constexpr Interaction non_contact() { return Interaction(0b000); }
  static constexpr Interaction contact(Engagement engagement, ContactDuration duration) {
    return Interaction(static_cast<std::uint8_t>(
        0b100 | (static_cast<std::uint8_t>(engagement) << 1) |
        static_cast<std::uint8_t>(duration)));
  }

  /// Rejects the three bit patterns 001, 010, 011.
  static constexpr std::optional<Interaction> from_bits(std::uint8_t bits) {
    if (bits == 0b000 || (bits >= 0b100 && bits <= 0b111)) return Interaction(bits);
    return std::nullopt;
  }

  constexpr bool is_contact() const { return (bits_ & 0b100) != 0; }
  constexpr Engagement engagement() const { return static_cast<Engagement>((bits_ >> 1) & 1); }
  constexpr ContactDuration duration() const { return static_cast<ContactDuration>(bits_ & 1); }
  constexpr std::uint8_t bits() const { return bits_; }

  friend constexpr bool operator==(Interaction, Interaction) = default;
  friend constexpr auto operator<=>(Interaction, Interaction) = default;

 private:
  constexpr explicit Interaction(std::uint8_t bits) : bits_(bits) {}
  std::uint8_t bits_;
};

namespace detail {

constexpr std::uint8_t dof_bits(Dof dof) {
  switch (dof) {
    case Dof::Zero: return 0b00;
    case Dof::One: return 0b01;
    case Dof::Many: return 0b11;
  }
  return 0b00;
}

constexpr std::optional<Dof> dof_from_bits(std::uint8_t bits) {
  switch (bits) {
    case 0b00: return Dof::Zero;
    case 0b01: return Dof::One;
    case 0b11: return Dof::Many;
    default: return std::nullopt;
  }
}

}  // namespace detail

struct MotionCode {
  Interaction interaction = Interaction::non_contact();
  bool cyclical = false;
  Dof prismatic = Dof::Zero;
  Dof revolute = Dof::Zero;
  bool passive_moves = false;

  /// Packed 9-bit value, most significant bit first in the textual form.
  constexpr std::uint16_t bits() const {
    return static_cast<std::uint16_t>(
        (interaction.bits() << 6) | (static_cast<unsigned>(cyclical) << 5) |
        (detail::dof_bits(prismatic) << 3) | (detail::dof_bits(revolute) << 1) |
        static_cast<unsigned>(passive_moves));
  }

  static constexpr std::optional<MotionCode> from_bits(std::uint16_t value) {
    if (value > 0x1FF) return std::nullopt;
    const auto interaction = Interaction::from_bits(static_cast<std::uint8_t>(value >> 6));
    const auto prismatic = detail::dof_from_bits((value >> 3) & 0b11);
    const auto revolute = detail::dof_from_bits((value >> 1) & 0b11);
    if (!interaction || !prismatic || !revolute) return std::nullopt;
    return MotionCode{*interaction, ((value >> 5) & 1) != 0, *prismatic, *revolute,
                      (value & 1) != 0};
  }

  friend constexpr bool operator==(const MotionCode& a, const MotionCode& b) {
    return a.bits() == b.bits();
  }
  // Numeric order of the packed value is lexicographic order of the compact string.
  friend constexpr std::strong_ordering operator<=>(const MotionCode& a, const MotionCode& b) {
    return a.bits() <=> b.bits();
  }
};

inline constexpr std::size_t kComponentCount = 5;
inline constexpr std::size_t kCodeBits = 9;
inline constexpr std::size_t kValidCodeCount = 180;
inline constexpr std::size_t kEmbeddingDim = 15;

/// Class count per component: interaction, recurrence, prismatic, revolute, passive.
inline constexpr std::array<std::size_t, kComponentCount> kComponentClasses{5, 2, 3, 3, 2};
/// Offset of each component's block inside the 15-wide embedding.
inline constexpr std::array<std::size_t, kComponentCount> kBlockOffsets{0, 5, 7, 10, 13};

inline constexpr std::array<std::string_view, kComponentCount> kComponentNames{
    "interaction", "recurrence", "prismatic", "revolute", "passive"};

constexpr std::array<std::size_t, kComponentCount> component_classes() { return kComponentClasses; }

enum class CodeStyle { Hyphenated, Compact };

inline std::string format_code(const MotionCode& code, CodeStyle style = CodeStyle::Hyphenated) {
  const std::uint16_t value = code.bits();
  std::string out;
  out.reserve(13);
  for (std::size_t i = 0; i < kCodeBits; ++i) {
    if (style == CodeStyle::Hyphenated && (i == 3 || i == 4 || i == 6 || i == 8)) out += '-';
    out += ((value >> (kCodeBits - 1 - i)) & 1) ? '1' : '0';
  }
  return out;
}

/// Accepts "111-0-01-00-1" or "111001001".
inline MotionCode parse_code(std::string_view text) {
  static constexpr std::array<std::size_t, kComponentCount> kWidths{3, 1, 2, 2, 1};

  std::string bits;
  if (text.size() == 13) {
    std::size_t pos = 0;
    for (std::size_t g = 0; g < kComponentCount; ++g) {
      if (g > 0) {
        if (text[pos] != '-') {
          throw Error(ErrorKind::WrongLength,
                      "expected '-' at position " + std::to_string(pos) + " in '" +
                          std::string(text) + "'");
        }
        ++pos;
      }
      bits.append(text.substr(pos, kWidths[g]));
      pos += kWidths[g];
    }
  } else if (text.size() == kCodeBits) {
    bits = std::string(text);
  } else {
    throw Error(ErrorKind::WrongLength, "motion code must be 9 bits or 3-1-2-2-1 hyphenated, got '" +
                                            std::string(text) + "'");
  }

  std::uint16_t value = 0;
  for (char c : bits) {
    if (c != '0' && c != '1') {
      throw Error(ErrorKind::NonBinaryCharacter, "in '" + std::string(text) + "'");
    }
    value = static_cast<std::uint16_t>((value << 1) | (c == '1'));
  }

  if (!Interaction::from_bits(static_cast<std::uint8_t>(value >> 6))) {
    throw Error(ErrorKind::InvalidInteraction,
                "interaction group '" + bits.substr(0, 3) + "' in '" + std::string(text) + "'");
  }
  if (!detail::dof_from_bits((value >> 3) & 0b11)) {
    throw Error(ErrorKind::InvalidGroup,
                "prismatic group '" + bits.substr(4, 2) + "' in '" + std::string(text) + "'");
  }
  if (!detail::dof_from_bits((value >> 1) & 0b11)) {
    throw Error(ErrorKind::InvalidGroup,
                "revolute group '" + bits.substr(6, 2) + "' in '" + std::string(text) + "'");
  }
  return *MotionCode::from_bits(value);
}

/// Non-throwing variant for validation loops.
inline std::optional<MotionCode> try_parse_code(std::string_view text) {
  try {
    return parse_code(text);
  } catch (const Error&) {
    return std::nullopt;
  }
}

/// All 180 valid codes in ascending compact-string order.
inline const std::vector<MotionCode>& enumerate_codes() {
  static const std::vector<MotionCode> codes = [] {
    std::vector<MotionCode> out;
    out.reserve(kValidCodeCount);
    for (std::uint16_t v = 0; v < (1u << kCodeBits); ++v) {
      if (auto code = MotionCode::from_bits(v)) out.push_back(*code);
    }
    return out;
  }();
  return codes;
}

using ClassIndices = std::array<std::size_t, kComponentCount>;

constexpr ClassIndices code_to_class_indices(const MotionCode& code) {
  const std::uint8_t ib = code.interaction.bits();
  // [000, 100, 101, 110, 111] -> [0, 1, 2, 3, 4]
  const std::size_t interaction = ib == 0 ? 0 : static_cast<std::size_t>(ib - 0b100 + 1);
  return {interaction, code.cyclical ? 1u : 0u, static_cast<std::size_t>(code.prismatic),
          static_cast<std::size_t>(code.revolute), code.passive_moves ? 1u : 0u};
}

inline MotionCode class_indices_to_code(const ClassIndices& indices) {
  for (std::size_t k = 0; k < kComponentCount; ++k) {
    if (indices[k] >= kComponentClasses[k]) {
      throw Error(ErrorKind::IndexOutOfRange,
                  std::string(kComponentNames[k]) + " index " + std::to_string(indices[k]) +
                      " >= " + std::to_string(kComponentClasses[k]));
    }
  }
  const auto interaction_bits =
      static_cast<std::uint8_t>(indices[0] == 0 ? 0 : 0b100 + indices[0] - 1);
  return MotionCode{*Interaction::from_bits(interaction_bits), indices[1] == 1,
                    static_cast<Dof>(indices[2]), static_cast<Dof>(indices[3]), indices[4] == 1};
}

/// Five concatenated one-hot blocks of widths [5, 2, 3, 3, 2].
inline std::array<double, kEmbeddingDim> one_hot_embedding(const MotionCode& code) {
  std::array<double, kEmbeddingDim> out{};
  const auto idx = code_to_class_indices(code);
  for (std::size_t k = 0; k < kComponentCount; ++k) out[kBlockOffsets[k] + idx[k]] = 1.0;
  return out;
}

/// Differing positions of the compact bit strings, in [0, 9].
constexpr int hamming(const MotionCode& a, const MotionCode& b) {
  return std::popcount(static_cast<unsigned>(a.bits() ^ b.bits()));
}

using ComponentWeights = std::array<double, kComponentCount>;
inline constexpr ComponentWeights kUnitWeights{1.0, 1.0, 1.0, 1.0, 1.0};

/// Sum of weights over components whose class differs.
inline double weighted_distance(const MotionCode& a, const MotionCode& b,
                                const ComponentWeights& weights = kUnitWeights) {
  for (double w : weights) {
    if (w < 0.0) throw Error(ErrorKind::NegativeWeight, std::to_string(w));
  }
  const auto ia = code_to_class_indices(a);
  const auto ib = code_to_class_indices(b);
  double total = 0.0;
  for (std::size_t k = 0; k < kComponentCount; ++k) {
    if (ia[k] != ib[k]) total += weights[k];
  }
  return total;
}

inline std::string describe(Dof dof) {
  switch (dof) {
    case Dof::Zero: return "zero DOF";
    case Dof::One: return "one DOF";
    case Dof::Many: return "many DOF";
  }
  return "?";
}

/// One line per component, used by the CLI breakdown.
inline std::vector<std::pair<std::string, std::string>> describe(const MotionCode& code) {
  std::string interaction = "non-contact";
  if (code.interaction.is_contact()) {
    interaction = std::string("contact, ") +
                  (code.interaction.engagement() == Engagement::Soft ? "soft" : "rigid") +
                  " engagement, " +
                  (code.interaction.duration() == ContactDuration::Continuous ? "continuous"
                                                                              : "discontinuous");
  }
  const std::string hyph = format_code(code);
  return {
      {"interaction", hyph.substr(0, 3) + "  " + interaction},
      {"recurrence", hyph.substr(4, 1) + "    " + (code.cyclical ? "cyclical" : "acyclical")},
      {"prismatic", hyph.substr(6, 2) + "   " + describe(code.prismatic)},
      {"revolute", hyph.substr(9, 2) + "   " + describe(code.revolute)},
      {"passive", hyph.substr(12, 1) + "    " +
                      (code.passive_moves ? "moves w.r.t. active" : "static w.r.t. active")},
  };
}

// ---------------------------------------------------------------------------
// Verb <-> code table for common manipulations.

struct VerbCodeRow {
  std::string_view code;
  std::string_view labels;  // semicolon-separated
};

// Rows in printed order, duplicates included; verbs are merged per code.
inline constexpr std::array<VerbCodeRow, 24> kVerbCodeRows{{
    {"000-0-00-01-1", "pour"},
    {"000-1-01-00-1", "sprinkle"},
    {"100-0-01-00-0", "poke; press (button); tap; adjust (button)"},
    {"101-0-00-00-0", "grasp; hold"},
    {"101-0-00-01-0", "open/close (jar); rotate; turn (knob); twist"},
    {"101-0-01-00-0", "spread; wipe; move; push (rigid)"},
    {"101-0-01-01-0", "flip"},
    {"101-0-11-00-1", "open/close (door)"},
    {"101-1-00-01-0", "shake (revolute)"},
    {"101-1-01-00-0", "shake (prismatic)"},
    {"110-0-01-01-0", "scoop"},
    {"110-0-01-00-0", "crack (egg)"},
    {"111-0-01-00-0", "insert; pierce"},
    {"111-0-00-00-0", "squeeze (in hand, elastic)"},
    {"111-0-01-01-0", "fold; unwrap; wrap"},
    {"111-1-11-00-1", "beat; mix; stir (liquid)"},
    {"111-0-00-00-0", "squeeze (in hand, rigid)"},
    {"111-0-01-00-1",
     "flatten; press; squeeze; pull apart; peel; chop; cut; mash; peel; scrape; shave; slice"},
    {"111-0-01-00-0", "roll"},
    {"111-0-11-00-1", "saw; cut (2D); slice (2D)"},
    {"111-1-11-00-1", "beat; mix; stir"},
    {"111-0-01-00-1", "brush; sweep; spread (brush)"},
    {"111-0-11-00-1", "brush; sweep (surface)"},
    {"111-0-00-00-1", "grate"},
}};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return s;
}

/// "open/close (jar)" -> {"open", "close"}; qualifiers in parentheses dropped.
inline std::vector<std::string> verb_tokens(std::string_view label) {
  if (auto paren = label.find('('); paren != std::string_view::npos) label = label.substr(0, paren);
  label = trim(label);
  std::vector<std::string> out;
  while (!label.empty()) {
    const auto slash = label.find('/');
    out.emplace_back(trim(label.substr(0, slash)));
    if (slash == std::string_view::npos) break;
    label.remove_prefix(slash + 1);
  }
  return out;
}

}  // namespace detail

class VerbCodeTable {
 public:
  using VerbSet = std::set<std::string>;
  using CodeSet = std::set<MotionCode>;

  VerbCodeTable() = default;

  static VerbCodeTable from_rows(std::span<const VerbCodeRow> rows) {
    VerbCodeTable table;
    for (const auto& row : rows) {
      const MotionCode code = parse_code(row.code);
      std::string_view rest = row.labels;
      while (!rest.empty()) {
        const auto sep = rest.find(';');
        for (auto& verb : detail::verb_tokens(rest.substr(0, sep))) table.add(code, verb);
        if (sep == std::string_view::npos) break;
        rest.remove_prefix(sep + 1);
      }
    }
    return table;
  }

  /// Built-in table of common manipulations.
  static const VerbCodeTable& builtin() {
    static const VerbCodeTable table = from_rows(kVerbCodeRows);
    return table;
  }

  void add(const MotionCode& code, const std::string& verb) {
    by_code_[code].insert(verb);
    by_verb_[verb].insert(code);
  }

  VerbSet verbs_for_code(const MotionCode& code) const {
    const auto it = by_code_.find(code);
    return it == by_code_.end() ? VerbSet{} : it->second;
  }

  CodeSet codes_for_verb(std::string_view verb) const {
    const auto it = by_verb_.find(std::string(verb));
    return it == by_verb_.end() ? CodeSet{} : it->second;
  }

  /// Distinct codes in ascending order.
  std::vector<MotionCode> codes() const {
    std::vector<MotionCode> out;
    for (const auto& [code, verbs] : by_code_) out.push_back(code);
    return out;
  }

  std::vector<std::string> verbs() const {
    std::vector<std::string> out;
    for (const auto& [verb, codes] : by_verb_) out.push_back(verb);
    return out;
  }

  const std::map<MotionCode, VerbSet>& entries() const { return by_code_; }

  /// [{"code": "...", "verbs": [...]}, ...] in code order.
  nlohmann::json to_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [code, verbs] : by_code_) {
      out.push_back({{"code", format_code(code)}, {"verbs", verbs}});
    }
    return out;
  }

 private:
  std::map<MotionCode, VerbSet> by_code_;
  std::map<std::string, CodeSet, std::less<>> by_verb_;
};

inline VerbCodeTable::VerbSet verbs_for_code(const MotionCode& code) {
  return VerbCodeTable::builtin().verbs_for_code(code);
}

inline VerbCodeTable::CodeSet codes_for_verb(std::string_view verb) {
  return VerbCodeTable::builtin().codes_for_verb(verb);
}

}  // namespace motioncode
