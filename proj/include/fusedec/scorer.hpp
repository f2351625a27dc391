#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusedec/vocab.hpp"

namespace fusedec {

enum class ConditioningKind { source_conditioned, prompt_conditioned };

std::string_view to_string(ConditioningKind kind);
ConditioningKind conditioning_kind_from_string(std::string_view name);

/// What a scorer session conditions on: source token ids for an MT-style
/// scorer, rendered prompt text for an LLM-style scorer. Exactly one is
/// populated according to kind; the prompt may be empty (unprompted LM).
struct ConditioningSpec {
  ConditioningKind kind = ConditioningKind::source_conditioned;
  std::vector<TokenId> source_tokens;
  std::string prompt_text;

  static ConditioningSpec source(std::vector<TokenId> ids);
  static ConditioningSpec prompt(std::string text);

  /// Throws Error{InvalidArgument} when the populated field disagrees with kind.
  void validate() const;

  friend bool operator==(const ConditioningSpec&, const ConditioningSpec&) = default;
};

/// Natural-log next-token probabilities over the shared vocabulary.
/// -inf marks hard-excluded tokens; NaN is never valid.
struct TokenDistribution {
  std::vector<double> logprobs;

  std::size_t size() const noexcept { return logprobs.size(); }
  double operator[](std::size_t i) const { return logprobs[i]; }
  /// log of the total probability mass; 0 for a normalized distribution.
  double log_mass() const;
};

inline constexpr double kNormalizationTolerance = 1e-4;

/// Throws Error{ProtocolError} on wrong length, NaN, or |log_mass| > tol.
void check_distribution(const TokenDistribution& d, std::size_t vocab_size,
                        double tol = kNormalizationTolerance);

/// Backend contract shared by in-process toy models and remote scorers.
/// Sessions are addressed by caller-chosen ids. Implementations must allow
/// distinct sessions to be driven from different threads concurrently.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual std::string name() const = 0;
  virtual std::uint64_t vocab_hash() const = 0;

  virtual void open(std::string_view session, const ConditioningSpec& conditioning) = 0;
  virtual TokenDistribution score(std::string_view session) = 0;
  virtual void append(std::string_view session, TokenId id) = 0;
  virtual void close(std::string_view session) = 0;
};

/// Engine-side handle to one in-progress conditional scoring. Owns the
/// accepted prefix, re-validates every distribution and closes the backend
/// session on destruction. Drive from one thread at a time.
class ScorerSession {
 public:
  ScorerSession(std::shared_ptr<Scorer> scorer, ConditioningSpec conditioning,
                const Vocabulary& vocab);
  ~ScorerSession();

  ScorerSession(ScorerSession&& other) noexcept;
  ScorerSession& operator=(ScorerSession&& other) noexcept;
  ScorerSession(const ScorerSession&) = delete;
  ScorerSession& operator=(const ScorerSession&) = delete;

  const std::string& id() const noexcept { return id_; }
  const ConditioningSpec& conditioning() const noexcept { return conditioning_; }
  std::span<const TokenId> prefix() const noexcept { return prefix_; }
  std::uint64_t vocab_hash() const noexcept { return vocab_hash_; }
  bool closed() const noexcept { return closed_; }
  /// True once eos has been appended.
  bool finished() const noexcept { return finished_; }
  Scorer& scorer() const noexcept { return *scorer_; }

  TokenDistribution next_distribution();
  void append(TokenId id);
  /// Best-effort; double close is a no-op and backend errors are swallowed.
  void close() noexcept;

 private:
  void require_open(const char* what) const;

  std::shared_ptr<Scorer> scorer_;
  std::string id_;
  ConditioningSpec conditioning_;
  std::vector<TokenId> prefix_;
  std::uint64_t vocab_hash_ = 0;
  std::size_t vocab_size_ = 0;
  TokenId eos_id_ = 0;
  bool closed_ = true;
  bool finished_ = false;
};

/// Checks the scorer's vocabulary against `vocab` and opens a fresh session.
/// Throws VocabMismatchError, or whatever the backend raises on open.
ScorerSession open_session(std::shared_ptr<Scorer> scorer, ConditioningSpec conditioning,
                           const Vocabulary& vocab);

/// Process-unique session id ("s<n>").
std::string next_session_id();

/// Per-call scorer timeout: FUSEDEC_TIMEOUT_SECS when set, else 60 s.
std::chrono::milliseconds default_scorer_timeout();

}  // namespace fusedec
