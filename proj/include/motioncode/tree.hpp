#pragma once

// The taxonomy as a question tree. Each option appends its bits; options at
// the last question carry the assembled code as "leaf".

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "motioncode/error.hpp"
#include "motioncode/taxonomy.hpp"

namespace motioncode {

namespace detail {

struct TreeOption {
  const char* label;
  const char* bits;
};

inline nlohmann::json question(const char* text, const char* help = nullptr) {
  nlohmann::json node{{"question", text}, {"options", nlohmann::json::array()}};
  if (help) node["help"] = help;
  return node;
}

inline nlohmann::json passive_node(const std::string& prefix) {
  auto node = question("Does the passive object move with respect to the active object?");
  for (auto [label, bits] : {TreeOption{"no, moves with the active object", "0"},
                             TreeOption{"yes, moves w.r.t. the active object", "1"}}) {
    const std::string code = prefix + "-" + bits;
    node["options"].push_back({{"label", label}, {"bits", bits}, {"leaf", code}});
  }
  return node;
}

inline nlohmann::json revolute_node(const std::string& prefix) {
  auto node = question("How many revolute (rotational) DOF does the active object use?");
  for (auto [label, bits] : {TreeOption{"none", "00"}, TreeOption{"one", "01"},
                             TreeOption{"many", "11"}}) {
    node["options"].push_back(
        {{"label", label}, {"bits", bits}, {"next", passive_node(prefix + "-" + bits)}});
  }
  return node;
}

inline nlohmann::json prismatic_node(const std::string& prefix) {
  auto node = question("How many prismatic (translational) DOF does the active object use?");
  for (auto [label, bits] : {TreeOption{"none", "00"}, TreeOption{"one", "01"},
                             TreeOption{"many", "11"}}) {
    node["options"].push_back(
        {{"label", label}, {"bits", bits}, {"next", revolute_node(prefix + "-" + bits)}});
  }
  return node;
}

inline nlohmann::json recurrence_node(const std::string& prefix) {
  auto node = question("Is the active object's trajectory cyclical?");
  for (auto [label, bits] : {TreeOption{"acyclical", "0"}, TreeOption{"cyclical", "1"}}) {
    node["options"].push_back(
        {{"label", label}, {"bits", bits}, {"next", prismatic_node(prefix + "-" + bits)}});
  }
  return node;
}

inline nlohmann::json duration_node(const std::string& prefix) {
  auto node = question("Is contact continuous or discontinuous?",
                       "Treat contact as continuous when it persists for roughly 80% of the action.");
  for (auto [label, bits] :
       {TreeOption{"discontinuous", "0"}, TreeOption{"continuous", "1"}}) {
    node["options"].push_back(
        {{"label", label}, {"bits", bits}, {"next", recurrence_node(prefix + bits)}});
  }
  return node;
}

inline nlohmann::json engagement_node(const std::string& prefix) {
  auto node = question("Is the engagement rigid or soft?",
                       "Soft: an object in action deforms or changes state (e.g. peeling).");
  for (auto [label, bits] : {TreeOption{"rigid", "0"}, TreeOption{"soft", "1"}}) {
    node["options"].push_back(
        {{"label", label}, {"bits", bits}, {"next", duration_node(prefix + bits)}});
  }
  return node;
}

}  // namespace detail

/// Nested {question, options: [{label, bits, next | leaf}]}.
inline const nlohmann::json& taxonomy_tree() {
  static const nlohmann::json tree = [] {
    auto root = detail::question("Is there contact between the active and passive objects?");
    root["options"].push_back(
        {{"label", "non-contact"}, {"bits", "000"}, {"next", detail::recurrence_node("000")}});
    root["options"].push_back(
        {{"label", "contact"}, {"bits", "1"}, {"next", detail::engagement_node("1")}});
    return root;
  }();
  return tree;
}

/// Walks the question tree one answer at a time. Used by the terminal
/// annotation wizard.
class TreeWalker {
 public:
  explicit TreeWalker(const nlohmann::json& root = taxonomy_tree()) : root_(&root) {}

  const nlohmann::json& current() const { return path_.empty() ? *root_ : *path_.back().next; }
  bool complete() const { return code_.has_value(); }
  const std::optional<MotionCode>& code() const { return code_; }

  /// Bits appended so far, without separators.
  std::string bits() const {
    std::string out;
    for (const auto& step : path_) out += step.bits;
    if (code_) out += leaf_bits_;
    return out;
  }

  void choose(std::size_t option) {
    if (complete()) throw Error(ErrorKind::IndexOutOfRange, "walk already complete");
    const auto& options = current()["options"];
    if (option >= options.size()) {
      throw Error(ErrorKind::IndexOutOfRange, "option " + std::to_string(option));
    }
    const auto& chosen = options[option];
    if (chosen.contains("leaf")) {
      leaf_bits_ = chosen["bits"].get<std::string>();
      code_ = parse_code(chosen["leaf"].get<std::string>());
    } else {
      path_.push_back({chosen["bits"].get<std::string>(), &chosen["next"]});
    }
  }

  /// Drops the last answer and everything after it.
  void back() {
    if (code_) {
      code_.reset();
      leaf_bits_.clear();
    } else if (!path_.empty()) {
      path_.pop_back();
    }
  }

  std::size_t depth() const { return path_.size() + (code_ ? 1 : 0); }

 private:
  struct Step {
    std::string bits;
    const nlohmann::json* next;
  };
  const nlohmann::json* root_;
  std::vector<Step> path_;
  std::string leaf_bits_;
  std::optional<MotionCode> code_;
};

}  // namespace motioncode
