#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fusedec/context.hpp"
#include "fusedec/corpus.hpp"
#include "fusedec/error.hpp"
#include "fusedec/fusion.hpp"
#include "fusedec/prompting.hpp"
#include "fusedec/scorer.hpp"

namespace fusedec {

/// A scorer plus how its sessions are conditioned: source-conditioned slots
/// get the tokenized source, prompt-conditioned slots the rendered prompt.
struct ScorerSlot {
  std::shared_ptr<Scorer> scorer;
  ConditioningKind kind = ConditioningKind::source_conditioned;
};

/// How prompts are built per segment. `base` supplies template, language
/// names, style and shots; its src field is replaced per segment. With the
/// context template each document keeps a rolling history of the engine's
/// own translations and the last `context_size` pairs go into the prompt.
/// A domain template without a style falls back to the segment's domain.
struct PromptPlan {
  PromptSpec base;
  std::size_t context_size = kDefaultContextWindow;

  bool uses_context() const noexcept { return base.tmpl == PromptTemplate::context; }
};

struct CorpusDecodeOptions {
  /// Stop at the first failed segment and rethrow its error.
  bool fail_fast = false;
  /// Worker threads. Output order is corpus order regardless; in context
  /// mode whole documents are the unit of work.
  std::size_t parallelism = 1;
};

struct SegmentResult {
  std::string segment_id;
  std::optional<DecodeResult> result;
  /// For scorer failures inside a decode, the underlying cause.
  std::optional<ErrorCode> error_code;
  std::string error;
  /// Rendered prompt, when a prompt-conditioned scorer took part.
  std::optional<std::string> prompt;

  bool ok() const noexcept { return result.has_value(); }
  /// Decoded text, or the empty string for a failed segment.
  std::string hypothesis() const { return result ? result->text : std::string(); }
};

/// Conditioning for every slot given the segment source and rendered prompt.
std::vector<ScorerBinding> bind_segment(std::span<const ScorerSlot> slots, const Vocabulary& vocab,
                                        const std::string& src, const std::string& prompt);

/// Decodes every segment in corpus order. Failed segments are recorded and
/// contribute no context pair; with fail_fast the first failure (in corpus
/// order) is rethrown instead.
std::vector<SegmentResult> decode_corpus(const Corpus& corpus, std::span<const ScorerSlot> slots,
                                         const DecodeConfig& cfg, const PromptPlan& plan,
                                         const Vocabulary& vocab,
                                         const CorpusDecodeOptions& options = {});

std::vector<std::string> hypotheses(std::span<const SegmentResult> results);

}  // namespace fusedec
