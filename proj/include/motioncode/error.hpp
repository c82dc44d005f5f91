#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace motioncode {

enum class ErrorKind {
  // codec
  WrongLength,
  InvalidGroup,
  InvalidInteraction,
  NonBinaryCharacter,
  IndexOutOfRange,
  NegativeWeight,
  // numerics
  DimensionMismatch,
  ShapeMismatch,
  TargetOutOfRange,
  NonFiniteLoss,
  NounRequired,
  NounUnexpected,
  // datasets and training
  EmptyDataset,
  MissingCode,
  UnknownVerbLabel,
  ParseError,
  InvalidCode,
  DuplicateId,
  HeaderMismatch,
  BadVectorLength,
  MissingToken,
  InvalidConfig,
  // evaluation
  LengthMismatch,
  Empty,
  VocabularyMismatch,
  // annotation service
  UnknownClip,
  DuplicateAnnotation,
  // io
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::WrongLength: return "WrongLength";
    case ErrorKind::InvalidGroup: return "InvalidGroup";
    case ErrorKind::InvalidInteraction: return "InvalidInteraction";
    case ErrorKind::NonBinaryCharacter: return "NonBinaryCharacter";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::NegativeWeight: return "NegativeWeight";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::TargetOutOfRange: return "TargetOutOfRange";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::NounRequired: return "NounRequired";
    case ErrorKind::NounUnexpected: return "NounUnexpected";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::MissingCode: return "MissingCode";
    case ErrorKind::UnknownVerbLabel: return "UnknownVerbLabel";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvalidCode: return "InvalidCode";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::HeaderMismatch: return "HeaderMismatch";
    case ErrorKind::BadVectorLength: return "BadVectorLength";
    case ErrorKind::MissingToken: return "MissingToken";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::Empty: return "Empty";
    case ErrorKind::VocabularyMismatch: return "VocabularyMismatch";
    case ErrorKind::UnknownClip: return "UnknownClip";
    case ErrorKind::DuplicateAnnotation: return "DuplicateAnnotation";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Domain error. `line()` is set for errors located in an input file.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(format(kind, message, line)), kind_(kind), line_(line) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  static std::string format(ErrorKind kind, const std::string& message,
                            std::optional<std::size_t> line) {
    std::string out(to_string(kind));
    if (line) out += " (line " + std::to_string(*line) + ")";
    if (!message.empty()) out += ": " + message;
    return out;
  }

  ErrorKind kind_;
  std::optional<std::size_t> line_;
};

}  // namespace motioncode
