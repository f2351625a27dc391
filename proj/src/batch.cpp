#include "fusedec/batch.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

namespace fusedec {

std::vector<ScorerBinding> bind_segment(std::span<const ScorerSlot> slots, const Vocabulary& vocab,
                                        const std::string& src, const std::string& prompt) {
  std::vector<ScorerBinding> bindings;
  bindings.reserve(slots.size());
  std::optional<std::vector<TokenId>> source_ids;
  for (const auto& slot : slots) {
    if (slot.kind == ConditioningKind::source_conditioned) {
      if (!source_ids) source_ids = vocab.tokenize(src);
      bindings.push_back({slot.scorer, ConditioningSpec::source(*source_ids)});
    } else {
      bindings.push_back({slot.scorer, ConditioningSpec::prompt(prompt)});
    }
  }
  return bindings;
}

namespace {

bool needs_prompt(std::span<const ScorerSlot> slots, const DecodeConfig& cfg) {
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (slots[k].kind != ConditioningKind::prompt_conditioned) continue;
    if (cfg.skip_zero_weight && k < cfg.lambdas.size() && cfg.lambdas[k] == 0.0) continue;
    return true;
  }
  return false;
}

}  // namespace

std::vector<SegmentResult> decode_corpus(const Corpus& corpus, std::span<const ScorerSlot> slots,
                                         const DecodeConfig& cfg, const PromptPlan& plan,
                                         const Vocabulary& vocab,
                                         const CorpusDecodeOptions& options) {
  cfg.validate();
  if (slots.size() != cfg.lambdas.size()) {
    throw Error(ErrorCode::InvalidArgument, "one weight per scorer slot is required");
  }
  std::vector<SegmentResult> results(corpus.size());
  if (corpus.empty()) return results;

  const bool prompted = needs_prompt(slots, cfg);

  // Units of work: whole documents in context mode, single segments otherwise.
  std::vector<std::vector<std::size_t>> units;
  if (plan.uses_context()) {
    for (const auto& doc : corpus.documents()) units.push_back(doc.segments);
  } else {
    for (std::size_t i = 0; i < corpus.size(); ++i) units.push_back({i});
  }

  std::vector<std::exception_ptr> failures(corpus.size());
  std::atomic<bool> stop{false};

  auto run_segment = [&](std::size_t idx, DocumentHistory* history) {
    const Segment& seg = corpus[idx];
    SegmentResult& out = results[idx];
    out.segment_id = seg.id;
    try {
      std::string prompt;
      if (prompted) {
        PromptSpec spec = plan.base;
        spec.src = seg.src;
        if (spec.tmpl == PromptTemplate::domain && spec.style.empty() && seg.domain) {
          spec.style = *seg.domain;
        }
        if (history) {
          auto window = history->window(plan.context_size);
          spec = build_context_spec(std::move(spec), window, plan.context_size);
        }
        prompt = render(spec);
        out.prompt = prompt;
      }
      auto bindings = bind_segment(slots, vocab, seg.src, prompt);
      out.result = greedy_decode(bindings, cfg, vocab);
      if (history) history->record(seg.src, out.result->text);
    } catch (const DecodeError& e) {
      out.error_code = e.cause();
      out.error = e.what();
      failures[idx] = std::current_exception();
      if (options.fail_fast) stop = true;
    } catch (const Error& e) {
      out.error_code = e.code();
      out.error = e.what();
      failures[idx] = std::current_exception();
      if (options.fail_fast) stop = true;
    } catch (const std::exception& e) {
      out.error_code = ErrorCode::InvalidArgument;
      out.error = e.what();
      failures[idx] = std::current_exception();
      if (options.fail_fast) stop = true;
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      if (stop) return;
      const std::size_t u = next++;
      if (u >= units.size()) return;
      const auto& unit = units[u];
      std::optional<DocumentHistory> history;
      if (plan.uses_context()) {
        history.emplace(corpus[unit.front()].doc_id.value_or(""), plan.context_size);
      }
      for (std::size_t idx : unit) {
        if (stop) return;
        run_segment(idx, history ? &*history : nullptr);
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(options.parallelism, 1, units.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  if (options.fail_fast) {
    for (const auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
  }
  return results;
}

std::vector<std::string> hypotheses(std::span<const SegmentResult> results) {
  std::vector<std::string> out;
  out.reserve(results.size());
  for (const auto& r : results) out.push_back(r.hypothesis());
  return out;
}

}  // namespace fusedec
