#include "fusedec/scorer.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include "fusedec/error.hpp"
#include "fusedec/logmath.hpp"

namespace fusedec {

std::string_view to_string(ConditioningKind kind) {
  return kind == ConditioningKind::source_conditioned ? "source_conditioned"
                                                      : "prompt_conditioned";
}

ConditioningKind conditioning_kind_from_string(std::string_view name) {
  if (name == "source_conditioned") return ConditioningKind::source_conditioned;
  if (name == "prompt_conditioned") return ConditioningKind::prompt_conditioned;
  throw Error(ErrorCode::ProtocolError, "unknown conditioning kind '" + std::string(name) + "'");
}

ConditioningSpec ConditioningSpec::source(std::vector<TokenId> ids) {
  return {ConditioningKind::source_conditioned, std::move(ids), {}};
}

ConditioningSpec ConditioningSpec::prompt(std::string text) {
  return {ConditioningKind::prompt_conditioned, {}, std::move(text)};
}

void ConditioningSpec::validate() const {
  if (kind == ConditioningKind::source_conditioned && !prompt_text.empty()) {
    throw Error(ErrorCode::InvalidArgument, "source_conditioned spec carries prompt text");
  }
  if (kind == ConditioningKind::prompt_conditioned && !source_tokens.empty()) {
    throw Error(ErrorCode::InvalidArgument, "prompt_conditioned spec carries source ids");
  }
}

double TokenDistribution::log_mass() const { return log_sum_exp(logprobs); }

void check_distribution(const TokenDistribution& d, std::size_t vocab_size, double tol) {
  if (d.size() != vocab_size) {
    throw Error(ErrorCode::ProtocolError, "distribution has length " + std::to_string(d.size()) +
                                              ", expected " + std::to_string(vocab_size));
  }
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (std::isnan(d[i]) || d[i] == std::numeric_limits<double>::infinity()) {
      throw Error(ErrorCode::ProtocolError, "invalid log-probability at index " + std::to_string(i));
    }
  }
  const double mass = d.log_mass();
  if (!(std::abs(mass) <= tol)) {
    throw Error(ErrorCode::ProtocolError,
                "distribution not normalized: logsumexp = " + std::to_string(mass));
  }
}

std::string next_session_id() {
  static std::atomic<std::uint64_t> counter{0};
  return "s" + std::to_string(++counter);
}

std::chrono::milliseconds default_scorer_timeout() {
  if (const char* env = std::getenv("FUSEDEC_TIMEOUT_SECS"); env && *env) {
    char* end = nullptr;
    double secs = std::strtod(env, &end);
    if (end != env && secs > 0) {
      return std::chrono::milliseconds(static_cast<std::int64_t>(secs * 1000.0));
    }
  }
  return std::chrono::seconds(60);
}

ScorerSession::ScorerSession(std::shared_ptr<Scorer> scorer, ConditioningSpec conditioning,
                             const Vocabulary& vocab)
    : scorer_(std::move(scorer)),
      id_(next_session_id()),
      conditioning_(std::move(conditioning)),
      vocab_hash_(vocab.hash()),
      vocab_size_(vocab.size()),
      eos_id_(vocab.eos_id()) {
  conditioning_.validate();
  check_compatible(vocab_hash_, scorer_->vocab_hash());
  scorer_->open(id_, conditioning_);
  closed_ = false;
}

ScorerSession::~ScorerSession() { close(); }

ScorerSession::ScorerSession(ScorerSession&& other) noexcept
    : scorer_(std::move(other.scorer_)),
      id_(std::move(other.id_)),
      conditioning_(std::move(other.conditioning_)),
      prefix_(std::move(other.prefix_)),
      vocab_hash_(other.vocab_hash_),
      vocab_size_(other.vocab_size_),
      eos_id_(other.eos_id_),
      closed_(other.closed_),
      finished_(other.finished_) {
  other.closed_ = true;
}

ScorerSession& ScorerSession::operator=(ScorerSession&& other) noexcept {
  if (this != &other) {
    close();
    scorer_ = std::move(other.scorer_);
    id_ = std::move(other.id_);
    conditioning_ = std::move(other.conditioning_);
    prefix_ = std::move(other.prefix_);
    vocab_hash_ = other.vocab_hash_;
    vocab_size_ = other.vocab_size_;
    eos_id_ = other.eos_id_;
    closed_ = other.closed_;
    finished_ = other.finished_;
    other.closed_ = true;
  }
  return *this;
}

void ScorerSession::require_open(const char* what) const {
  if (closed_) throw Error(ErrorCode::SessionClosed, std::string(what) + " on closed session " + id_);
  if (finished_) {
    throw Error(ErrorCode::SessionClosed, std::string(what) + " after eos on session " + id_);
  }
}

TokenDistribution ScorerSession::next_distribution() {
  require_open("score");
  TokenDistribution d = scorer_->score(id_);
  check_distribution(d, vocab_size_);
  return d;
}

void ScorerSession::append(TokenId id) {
  require_open("append");
  if (id < 0 || static_cast<std::size_t>(id) >= vocab_size_) {
    throw Error(ErrorCode::InvalidArgument, "token id " + std::to_string(id) + " out of range");
  }
  scorer_->append(id_, id);
  prefix_.push_back(id);
  if (id == eos_id_) finished_ = true;
}

void ScorerSession::close() noexcept {
  if (closed_ || !scorer_) return;
  closed_ = true;
  try {
    scorer_->close(id_);
  } catch (...) {
  }
}

ScorerSession open_session(std::shared_ptr<Scorer> scorer, ConditioningSpec conditioning,
                           const Vocabulary& vocab) {
  return ScorerSession(std::move(scorer), std::move(conditioning), vocab);
}

}  // namespace fusedec
