#include "fusedec/error.hpp"

#include <array>
#include <utility>

#include "fusedec/vocab.hpp"

namespace fusedec {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 15> kNames{{
    {ErrorCode::DuplicateToken, "DuplicateToken"},
    {ErrorCode::MissingSpecial, "MissingSpecial"},
    {ErrorCode::UnknownToken, "UnknownToken"},
    {ErrorCode::VocabMismatch, "VocabMismatch"},
    {ErrorCode::ScorerUnavailable, "ScorerUnavailable"},
    {ErrorCode::ScorerTimeout, "ScorerTimeout"},
    {ErrorCode::ProtocolError, "ProtocolError"},
    {ErrorCode::SessionClosed, "SessionClosed"},
    {ErrorCode::InvalidArgument, "InvalidArgument"},
    {ErrorCode::ShapeError, "ShapeError"},
    {ErrorCode::InvalidPromptSpec, "InvalidPromptSpec"},
    {ErrorCode::IngestError, "IngestError"},
    {ErrorCode::MetricError, "MetricError"},
    {ErrorCode::IoError, "IoError"},
    {ErrorCode::DecodeError, "DecodeError"},
}};

}  // namespace

std::string_view to_string(ErrorCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Unknown";
}

ErrorCode error_code_from_string(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return ErrorCode::ProtocolError;
}

VocabMismatchError::VocabMismatchError(std::uint64_t expected, std::uint64_t actual)
    : Error(ErrorCode::VocabMismatch,
            "vocabulary hash " + format_hash(actual) + " does not match " +
                format_hash(expected)),
      expected_(expected),
      actual_(actual) {}

}  // namespace fusedec
