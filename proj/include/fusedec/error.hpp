#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fusedec {

enum class ErrorCode {
  DuplicateToken,
  MissingSpecial,
  UnknownToken,
  VocabMismatch,
  ScorerUnavailable,
  ScorerTimeout,
  ProtocolError,
  SessionClosed,
  InvalidArgument,
  ShapeError,
  InvalidPromptSpec,
  IngestError,
  MetricError,
  IoError,
  DecodeError,
};

std::string_view to_string(ErrorCode code);
/// Inverse of to_string; unknown names map to ProtocolError.
ErrorCode error_code_from_string(std::string_view name);

/// Single exception type for the engine. The code identifies the failure
/// class; the message carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(to_string(code)) + ": " + msg), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class VocabMismatchError : public Error {
 public:
  VocabMismatchError(std::uint64_t expected, std::uint64_t actual);

  std::uint64_t expected_hash() const noexcept { return expected_; }
  std::uint64_t actual_hash() const noexcept { return actual_; }

 private:
  std::uint64_t expected_;
  std::uint64_t actual_;
};

/// Scorer failure surfaced from inside a decode, tagged with the step index.
class DecodeError : public Error {
 public:
  DecodeError(std::size_t step, ErrorCode cause, const std::string& msg)
      : Error(ErrorCode::DecodeError,
              "step " + std::to_string(step) + ": " + msg),
        step_(step),
        cause_(cause) {}

  std::size_t step() const noexcept { return step_; }
  ErrorCode cause() const noexcept { return cause_; }

 private:
  std::size_t step_;
  ErrorCode cause_;
};

}  // namespace fusedec
