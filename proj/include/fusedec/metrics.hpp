#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusedec/corpus.hpp"

namespace fusedec {

enum class MetricKind { chrf, exact_match, token_accuracy, external_command };

/// A corpus-level metric. External commands are argv templates run without
/// a shell: "{hyp}" and "{ref}" are replaced by file paths (one segment per
/// line); without placeholders both paths are appended. The command must
/// print a single float on stdout.
struct MetricHandle {
  MetricKind kind = MetricKind::chrf;
  std::vector<std::string> argv;

  std::string name() const;
  static MetricHandle builtin(std::string_view name);
  static MetricHandle external(std::vector<std::string> argv);
};

/// Scores hypotheses against references. Built-ins require equal lengths
/// (Error{MetricError} otherwise). All built-ins report on a 0-100 scale.
double score(const MetricHandle& metric, std::span<const std::string> hyps,
             std::span<const std::string> refs);

/// Character n-gram F-score: orders 1..char_order over code points with
/// whitespace removed, n-gram statistics summed over the corpus, precision
/// and recall averaged over orders where both sides have n-grams, then
/// F-beta. Matches the usual chrF2 (char order 6, beta 2, no word n-grams).
double chrf(std::span<const std::string> hyps, std::span<const std::string> refs,
            int char_order = 6, double beta = 2.0);

/// Percentage of segments whose hypothesis equals the reference exactly.
double exact_match(std::span<const std::string> hyps, std::span<const std::string> refs);

/// Position-wise token agreement: sum over segments of matching whitespace
/// tokens at equal positions, divided by the sum of max(|hyp|, |ref|).
double token_accuracy(std::span<const std::string> hyps, std::span<const std::string> refs);

/// Runs an external metric command and parses its stdout as one float.
/// Non-zero exit or unparsable output raises Error{MetricError} carrying
/// the command's stderr.
double run_external_metric(const std::vector<std::string>& argv, std::span<const std::string> hyps,
                           std::span<const std::string> refs);

struct PhenomenonAccuracy {
  std::string phenomenon;
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;  // percent

  friend bool operator==(const PhenomenonAccuracy&, const PhenomenonAccuracy&) = default;
};

/// True iff `form` occurs in `text` delimited by non-word characters on
/// both sides. Letters and digits of any script count as word characters.
bool contains_full_token(std::string_view text, std::string_view form, bool case_fold = false);

/// Targeted-word accuracy per phenomenon, sorted by phenomenon name.
/// Only segments with target_words count; a segment is correct when any
/// acceptable form appears as a full token in its hypothesis. Segments
/// without a phenomenon are grouped under "unspecified".
std::vector<PhenomenonAccuracy> targeted_accuracy(const Corpus& corpus,
                                                  std::span<const std::string> hyps,
                                                  bool case_fold = false);

/// UTF-8 to code points; malformed bytes decode as U+FFFD.
std::u32string decode_utf8(std::string_view text);

}  // namespace fusedec
