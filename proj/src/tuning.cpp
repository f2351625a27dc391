#include "fusedec/tuning.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "fusedec/error.hpp"

namespace fusedec {

using nlohmann::ordered_json;

double SweepResult::score_at(double lambda) const {
  for (const auto& p : points) {
    if (p.lambda == lambda) return p.score;
  }
  throw Error(ErrorCode::InvalidArgument, "lambda " + format_lambda(lambda) + " not in sweep");
}

std::string format_lambda(double lambda) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, lambda);
  return std::string(buf, ptr);
}

namespace {

double round_grid_value(double v) { return std::round(v * 1e9) / 1e9; }

double parse_double(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::InvalidArgument, "bad grid value '" + std::string(s) + "'");
  }
  return v;
}

std::string fingerprint(const Corpus& corpus, std::span<const ScorerSlot> slots, const DecodeConfig& cfg,
                        const PromptPlan& plan, const Vocabulary& vocab, double lambda) {
  std::string key = to_jsonl(corpus);
  key += "|vocab=" + format_hash(vocab.hash());
  for (const auto& s : slots) key += "|scorer=" + s.scorer->name() + ":" + std::string(to_string(s.kind));
  key += "|lambda=" + format_lambda(lambda);
  key += "|max_len=" + std::to_string(cfg.max_len) + "|skip=" + (cfg.skip_zero_weight ? "1" : "0");
  key += "|template=" + std::string(to_string(plan.base.tmpl)) + "|" + plan.base.src_language + "|" +
         plan.base.tgt_language + "|" + plan.base.style + "|ctx=" + std::to_string(plan.context_size);
  for (const auto& shot : plan.base.shots) key += "|shot=" + shot.src + "\t" + shot.tgt;
  return format_hash(fnv1a64(key));
}

struct CachedPoint {
  std::vector<std::string> hyps;
  std::size_t n_segments = 0;
};

std::optional<CachedPoint> load_cached(const std::filesystem::path& dir, const std::string& fp,
                                       std::size_t corpus_size) {
  const auto meta_path = dir / "meta.json";
  const auto hyp_path = dir / "hyp.txt";
  if (!std::filesystem::exists(meta_path) || !std::filesystem::exists(hyp_path)) return std::nullopt;
  auto meta = nlohmann::json::parse(read_file(meta_path), nullptr, false);
  if (meta.is_discarded() || meta.value("fingerprint", "") != fp) return std::nullopt;
  CachedPoint point;
  point.hyps = read_lines(hyp_path);
  if (point.hyps.size() != corpus_size) return std::nullopt;
  point.n_segments = meta.value("n_segments", std::size_t{0});
  return point;
}

}  // namespace

std::vector<double> parse_grid(std::string_view text) {
  std::vector<double> grid;
  if (text.find(':') != std::string_view::npos) {
    auto first = text.find(':');
    auto second = text.find(':', first + 1);
    if (second == std::string_view::npos) {
      throw Error(ErrorCode::InvalidArgument, "grid must be start:stop:step");
    }
    const double start = parse_double(text.substr(0, first));
    const double stop = parse_double(text.substr(first + 1, second - first - 1));
    const double step = parse_double(text.substr(second + 1));
    if (!(step > 0.0) || stop < start) throw Error(ErrorCode::InvalidArgument, "empty or unbounded grid");
    const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) grid.push_back(round_grid_value(start + static_cast<double>(i) * step));
  } else {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto comma = text.find(',', pos);
      if (comma == std::string_view::npos) comma = text.size();
      grid.push_back(round_grid_value(parse_double(text.substr(pos, comma - pos))));
      pos = comma + 1;
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

double select_best_lambda(std::span<const SweepPoint> points) {
  if (points.empty()) throw Error(ErrorCode::InvalidArgument, "no sweep points");
  const SweepPoint* best = &points.front();
  for (const auto& p : points) {
    if (p.score > best->score || (p.score == best->score && p.lambda < best->lambda)) best = &p;
  }
  return best->lambda;
}

SweepResult sweep(const Corpus& validation, std::span<const ScorerSlot> slots, const DecodeConfig& base,
                  std::span<const double> grid, const MetricHandle& metric, const Vocabulary& vocab,
                  const SweepOptions& options, SweepStats* stats) {
  if (slots.size() != 2) throw Error(ErrorCode::InvalidArgument, "a sweep mixes exactly two scorers");
  if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty lambda grid");
  std::vector<double> lambdas(grid.begin(), grid.end());
  std::sort(lambdas.begin(), lambdas.end());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
  for (double l : lambdas) {
    if (!(l >= 0.0 && l <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "lambda " + format_lambda(l) + " outside [0,1]");
    }
  }

  // References are only needed by built-in metrics; external commands get
  // an empty list when the corpus has none.
  std::vector<std::string> refs;
  try {
    refs = validation.references();
  } catch (const Error&) {
    if (metric.kind != MetricKind::external_command) throw;
  }

  SweepResult result;
  result.metric_name = metric.name();
  for (double lambda : lambdas) {
    DecodeConfig cfg = base;
    cfg.lambdas = {lambda, 1.0 - lambda};

    std::optional<std::filesystem::path> dir;
    std::string fp;
    std::optional<CachedPoint> cached;
    if (options.run_dir) {
      dir = *options.run_dir / ("lambda-" + format_lambda(lambda));
      fp = fingerprint(validation, slots, cfg, options.plan, vocab, lambda);
      cached = load_cached(*dir, fp, validation.size());
    }

    CachedPoint point;
    if (cached) {
      point = std::move(*cached);
      if (stats) ++stats->cached_points;
    } else {
      auto results = decode_corpus(validation, slots, cfg, options.plan, vocab, options.decode);
      point.hyps = hypotheses(results);
      point.n_segments = static_cast<std::size_t>(
          std::count_if(results.begin(), results.end(), [](const SegmentResult& r) { return r.ok(); }));
      if (stats) ++stats->decoded_points;
      if (dir) {
        write_lines(point.hyps, *dir / "hyp.txt");
        ordered_json meta;
        meta["lambda"] = lambda;
        meta["fingerprint"] = fp;
        meta["n_segments"] = point.n_segments;
        write_file_atomic(*dir / "meta.json", meta.dump(2) + "\n");
      }
    }

    double value = 0.0;
    try {
      value = score(metric, point.hyps, refs);
    } catch (const Error& e) {
      throw Error(ErrorCode::MetricError, "lambda=" + format_lambda(lambda) + ": " + e.what());
    }
    result.points.push_back({lambda, value, point.n_segments});
    if (options.on_point) options.on_point(result.points.back());
  }
  result.best_lambda = select_best_lambda(result.points);
  return result;
}

std::string sweep_csv(const SweepResult& result) {
  std::string out = "lambda,score,n_segments\n";
  char buf[64];
  for (const auto& p : result.points) {
    std::snprintf(buf, sizeof buf, "%.6f", p.score);
    out += format_lambda(p.lambda) + "," + buf + "," + std::to_string(p.n_segments) + "\n";
  }
  return out;
}

void emit_sweep_csv(const SweepResult& result, const std::filesystem::path& path) {
  if (result.points.empty()) throw Error(ErrorCode::InvalidArgument, "sweep has no points");
  write_file_atomic(path, sweep_csv(result));
}

ordered_json sweep_summary_json(const SweepResult& result) {
  ordered_json j;
  j["metric_name"] = result.metric_name;
  auto grid = ordered_json::array();
  auto scores = ordered_json::array();
  auto counts = ordered_json::array();
  for (const auto& p : result.points) {
    grid.push_back(p.lambda);
    scores.push_back(p.score);
    counts.push_back(p.n_segments);
  }
  j["grid"] = std::move(grid);
  j["scores"] = std::move(scores);
  j["n_segments"] = std::move(counts);
  j["best_lambda"] = result.best_lambda;
  return j;
}

SweepResult sweep_from_summary_json(const ordered_json& j) {
  SweepResult r;
  r.metric_name = j.at("metric_name").get<std::string>();
  const auto& grid = j.at("grid");
  const auto& scores = j.at("scores");
  if (grid.size() != scores.size()) throw Error(ErrorCode::InvalidArgument, "grid/scores length mismatch");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    SweepPoint p{grid[i].get<double>(), scores[i].get<double>(), 0};
    if (j.contains("n_segments")) p.n_segments = j["n_segments"][i].get<std::size_t>();
    r.points.push_back(p);
  }
  r.best_lambda = j.at("best_lambda").get<double>();
  return r;
}

}  // namespace fusedec
