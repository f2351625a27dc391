#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fusedec/metrics.hpp"
#include "fusedec/tuning.hpp"

namespace fusedec {

struct SystemRow {
  std::string name;
  std::optional<double> lambda;  // weight on the MT scorer; unset for single systems
  std::string metric_name;
  double score = 0.0;
  std::size_t n_segments = 0;
  std::size_t n_failed = 0;

  friend bool operator==(const SystemRow&, const SystemRow&) = default;
};

struct SystemAccuracy {
  std::string system;
  std::vector<PhenomenonAccuracy> phenomena;

  friend bool operator==(const SystemAccuracy&, const SystemAccuracy&) = default;
};

struct Report {
  std::vector<SystemRow> systems;
  std::vector<SystemAccuracy> accuracies;
  std::optional<SweepResult> sweep;
  std::optional<std::string> sweep_csv;  // path of the emitted curve data

  friend bool operator==(const Report&, const Report&) = default;
};

/// Field order is fixed, so parse -> re-emit reproduces the same text.
nlohmann::ordered_json to_json(const Report& report);
Report report_from_json(const nlohmann::ordered_json& j);

/// Systems table with columns: system | lambda | metric | score | segments | failed.
/// Accuracy table with one row per phenomenon and one percent column per system.
std::string to_markdown(const Report& report);

/// Writes <path>.md and <path>.json (any extension on `path` is replaced).
void emit_report(const Report& report, const std::filesystem::path& path);

}  // namespace fusedec
