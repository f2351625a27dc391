#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fusedec/batch.hpp"
#include "fusedec/metrics.hpp"

namespace fusedec {

struct SweepPoint {
  double lambda = 0.0;
  double score = 0.0;
  std::size_t n_segments = 0;  // successfully decoded segments

  friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

struct SweepResult {
  std::vector<SweepPoint> points;  // ascending lambda
  double best_lambda = 0.0;        // max score, ties to the smallest lambda
  std::string metric_name;

  double score_at(double lambda) const;
  friend bool operator==(const SweepResult&, const SweepResult&) = default;
};

struct SweepOptions {
  PromptPlan plan;
  CorpusDecodeOptions decode;
  /// When set, each grid point's hypotheses are cached under
  /// <run_dir>/lambda-<value>/hyp.txt and reused on later runs.
  std::optional<std::filesystem::path> run_dir;
  /// Called after each point is decoded (or loaded) and scored.
  std::function<void(const SweepPoint&)> on_point;
};

struct SweepStats {
  std::size_t decoded_points = 0;
  std::size_t cached_points = 0;
};

/// Grid search over the MT weight. `slots` holds exactly two scorers, the
/// first weighted lambda and the second 1 - lambda; every other field of
/// `base` is kept. Throws Error{MetricError} naming the lambda on metric
/// failure; per-segment scorer errors follow decode_corpus.
SweepResult sweep(const Corpus& validation, std::span<const ScorerSlot> slots,
                  const DecodeConfig& base, std::span<const double> grid, const MetricHandle& metric,
                  const Vocabulary& vocab, const SweepOptions& options = {},
                  SweepStats* stats = nullptr);

/// Picks best_lambda from scored points (ascending lambda).
double select_best_lambda(std::span<const SweepPoint> points);

/// "start:stop:step" (inclusive of stop) or a comma-separated list. Values
/// are rounded to 1e-9, sorted and de-duplicated.
std::vector<double> parse_grid(std::string_view text);
/// Shortest round-trip decimal, e.g. 0.1 -> "0.1", 1 -> "1".
std::string format_lambda(double lambda);

/// "lambda,score,n_segments" header plus one row per point, scores with six
/// decimals.
std::string sweep_csv(const SweepResult& result);
void emit_sweep_csv(const SweepResult& result, const std::filesystem::path& path);

/// {metric_name, grid, scores, best_lambda}
nlohmann::ordered_json sweep_summary_json(const SweepResult& result);
SweepResult sweep_from_summary_json(const nlohmann::ordered_json& j);

}  // namespace fusedec
