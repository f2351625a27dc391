#include "fusedec/report.hpp"

#include <cstdio>
#include <set>

#include "fusedec/error.hpp"

namespace fusedec {

using nlohmann::ordered_json;

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

ordered_json to_json(const Report& report) {
  ordered_json j;
  auto systems = ordered_json::array();
  for (const auto& s : report.systems) {
    ordered_json row;
    row["name"] = s.name;
    row["lambda"] = s.lambda ? ordered_json(*s.lambda) : ordered_json(nullptr);
    row["metric_name"] = s.metric_name;
    row["score"] = s.score;
    row["n_segments"] = s.n_segments;
    row["n_failed"] = s.n_failed;
    systems.push_back(std::move(row));
  }
  j["systems"] = std::move(systems);

  auto acc = ordered_json::array();
  for (const auto& sa : report.accuracies) {
    ordered_json entry;
    entry["system"] = sa.system;
    auto rows = ordered_json::array();
    for (const auto& p : sa.phenomena) {
      rows.push_back(ordered_json{{"phenomenon", p.phenomenon},
                                  {"correct", p.correct},
                                  {"total", p.total},
                                  {"accuracy", p.accuracy}});
    }
    entry["phenomena"] = std::move(rows);
    acc.push_back(std::move(entry));
  }
  j["targeted_accuracy"] = std::move(acc);
  j["sweep"] = report.sweep ? sweep_summary_json(*report.sweep) : ordered_json(nullptr);
  j["sweep_csv"] = report.sweep_csv ? ordered_json(*report.sweep_csv) : ordered_json(nullptr);
  return j;
}

Report report_from_json(const ordered_json& j) {
  Report r;
  for (const auto& row : j.at("systems")) {
    SystemRow s;
    s.name = row.at("name").get<std::string>();
    if (!row.at("lambda").is_null()) s.lambda = row["lambda"].get<double>();
    s.metric_name = row.at("metric_name").get<std::string>();
    s.score = row.at("score").get<double>();
    s.n_segments = row.at("n_segments").get<std::size_t>();
    s.n_failed = row.at("n_failed").get<std::size_t>();
    r.systems.push_back(std::move(s));
  }
  for (const auto& entry : j.at("targeted_accuracy")) {
    SystemAccuracy sa;
    sa.system = entry.at("system").get<std::string>();
    for (const auto& p : entry.at("phenomena")) {
      sa.phenomena.push_back({p.at("phenomenon").get<std::string>(), p.at("correct").get<std::size_t>(),
                              p.at("total").get<std::size_t>(), p.at("accuracy").get<double>()});
    }
    r.accuracies.push_back(std::move(sa));
  }
  if (j.contains("sweep") && !j["sweep"].is_null()) r.sweep = sweep_from_summary_json(j["sweep"]);
  if (j.contains("sweep_csv") && !j["sweep_csv"].is_null()) r.sweep_csv = j["sweep_csv"].get<std::string>();
  return r;
}

std::string to_markdown(const Report& report) {
  std::string md = "# Results\n\n";
  md += "| system | lambda | metric | score | segments | failed |\n";
  md += "|---|---|---|---|---|---|\n";
  for (const auto& s : report.systems) {
    md += "| " + s.name + " | " + (s.lambda ? format_lambda(*s.lambda) : std::string("-")) + " | " +
          s.metric_name + " | " + fixed(s.score, 2) + " | " + std::to_string(s.n_segments) + " | " +
          std::to_string(s.n_failed) + " |\n";
  }

  if (!report.accuracies.empty()) {
    md += "\n## Targeted-word accuracy\n\n| phenomenon |";
    std::string rule = "|---|";
    std::set<std::string> phenomena;
    for (const auto& sa : report.accuracies) {
      md += " " + sa.system + " |";
      rule += "---|";
      for (const auto& p : sa.phenomena) phenomena.insert(p.phenomenon);
    }
    md += "\n" + rule + "\n";
    for (const auto& name : phenomena) {
      md += "| " + name + " |";
      for (const auto& sa : report.accuracies) {
        std::string cell = "-";
        for (const auto& p : sa.phenomena) {
          if (p.phenomenon == name) cell = fixed(p.accuracy, 1) + "%";
        }
        md += " " + cell + " |";
      }
      md += "\n";
    }
  }

  if (report.sweep) {
    md += "\n## Lambda sweep (" + report.sweep->metric_name + ")\n\n";
    md += "| lambda | score | segments |\n|---|---|---|\n";
    for (const auto& p : report.sweep->points) {
      md += "| " + format_lambda(p.lambda) + " | " + fixed(p.score, 2) + " | " + std::to_string(p.n_segments) + " |\n";
    }
    md += "\nbest lambda: " + format_lambda(report.sweep->best_lambda) + "\n";
  }
  if (report.sweep_csv) md += "\nsweep curve: `" + *report.sweep_csv + "`\n";
  return md;
}

void emit_report(const Report& report, const std::filesystem::path& path) {
  auto md_path = path;
  md_path.replace_extension(".md");
  auto json_path = path;
  json_path.replace_extension(".json");
  write_file_atomic(md_path, to_markdown(report));
  write_file_atomic(json_path, to_json(report).dump(2) + "\n");
}

}  // namespace fusedec
