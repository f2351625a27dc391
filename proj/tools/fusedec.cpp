// fusedec: command-line front end for the ensemble decoder.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fusedec/backends.hpp"
#include "fusedec/batch.hpp"
#include "fusedec/corpus.hpp"
#include "fusedec/error.hpp"
#include "fusedec/metrics.hpp"
#include "fusedec/prompting.hpp"
#include "fusedec/report.hpp"
#include "fusedec/subprocess.hpp"
#include "fusedec/toy/models.hpp"
#include "fusedec/toy/planted.hpp"
#include "fusedec/tuning.hpp"
#include "fusedec/wire.hpp"

namespace fs = std::filesystem;
using namespace fusedec;

namespace {

// Stands in for a scorer that was not given because its weight is zero.
class AbsentScorer final : public Scorer {
 public:
  AbsentScorer(std::string role, std::uint64_t hash) : role_(std::move(role)), hash_(hash) {}
  std::string name() const override { return "absent-" + role_; }
  std::uint64_t vocab_hash() const override { return hash_; }
  void open(std::string_view, const ConditioningSpec&) override { fail(); }
  TokenDistribution score(std::string_view) override { fail(); }
  void append(std::string_view, TokenId) override { fail(); }
  void close(std::string_view) override {}

 private:
  [[noreturn]] void fail() const {
    throw Error(ErrorCode::ScorerUnavailable, "no --" + role_ + " scorer given");
  }
  std::string role_;
  std::uint64_t hash_;
};

struct DecodeArgs {
  std::string mt;
  std::string llm;
  std::string vocab;
  std::string prompt = "baseline";
  std::string style;
  std::string shots;
  std::size_t n_shots = 5;
  std::size_t context_size = kDefaultContextWindow;
  std::size_t max_len = 0;
  std::string src;
  std::string ref;
  std::string corpus;
  std::string out;
  std::string src_lang = "de";
  std::string tgt_lang = "en";
  std::string lang_names;
  std::size_t jobs = 1;
  bool fail_fast = false;
  bool strict = false;
  double timeout_secs = 0.0;
};

void add_decode_flags(CLI::App* cmd, DecodeArgs& a) {
  cmd->add_option("--mt", a.mt, "MT scorer address or command (source-conditioned)");
  cmd->add_option("--llm", a.llm, "LLM scorer address or command (prompt-conditioned)");
  cmd->add_option("--vocab", a.vocab, "Shared vocabulary file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--prompt", a.prompt, "baseline|domain|few_shot|context|none")->capture_default_str();
  cmd->add_option("--style", a.style, "Domain style for the domain template");
  cmd->add_option("--shots", a.shots, "JSONL of {src,tgt} example pairs")->check(CLI::ExistingFile);
  cmd->add_option("--n-shots", a.n_shots, "Number of example pairs to use")->capture_default_str();
  cmd->add_option("--context-size", a.context_size, "Prior document pairs in context prompts")
      ->capture_default_str();
  cmd->add_option("--max-len", a.max_len, "Token cap; 0 = max(256, 2*src+10)")->capture_default_str();
  cmd->add_option("--src", a.src, "Plain-text source, one segment per line")->check(CLI::ExistingFile);
  cmd->add_option("--ref", a.ref, "Plain-text references aligned with --src")->check(CLI::ExistingFile);
  cmd->add_option("--corpus", a.corpus, "JSONL corpus")->check(CLI::ExistingFile);
  cmd->add_option("--out", a.out, "Output directory")->required();
  cmd->add_option("--src-lang", a.src_lang, "Source language code or name")->capture_default_str();
  cmd->add_option("--tgt-lang", a.tgt_lang, "Target language code or name")->capture_default_str();
  cmd->add_option("--lang-names", a.lang_names, "JSON object of extra code -> name entries")
      ->check(CLI::ExistingFile);
  cmd->add_option("--jobs", a.jobs, "Parallel workers")->capture_default_str();
  cmd->add_flag("--fail-fast", a.fail_fast, "Abort on the first failed segment");
  cmd->add_flag("--strict", a.strict, "Query zero-weight scorers too");
  cmd->add_option("--timeout", a.timeout_secs, "Per-call scorer timeout in seconds (default: env or 60)");
}

Corpus load_corpus(const DecodeArgs& a, const std::string& corpus_path) {
  if (!corpus_path.empty()) return ingest_jsonl(corpus_path);
  if (a.src.empty()) throw Error(ErrorCode::InvalidArgument, "one of --src or --corpus is required");
  if (!a.ref.empty()) return ingest_parallel(a.src, fs::path(a.ref));
  return ingest_parallel(a.src);
}

PromptPlan make_plan(const DecodeArgs& a) {
  LanguageNames names;
  if (!a.lang_names.empty()) names.merge_json(read_file(a.lang_names));
  PromptPlan plan;
  plan.base.tmpl = prompt_template_from_string(a.prompt);
  plan.base.src_language = names.name(a.src_lang);
  plan.base.tgt_language = names.name(a.tgt_lang);
  plan.base.style = a.style;
  if (!a.shots.empty()) plan.base.shots = load_shots(a.shots, a.n_shots);
  plan.context_size = a.context_size;
  return plan;
}

std::vector<ScorerSlot> make_slots(const DecodeArgs& a, const Vocabulary& vocab,
                                   std::optional<double> lambda) {
  const auto timeout = a.timeout_secs > 0
                           ? std::chrono::milliseconds(static_cast<long long>(a.timeout_secs * 1000))
                           : default_scorer_timeout();
  auto connect = [&](const std::string& addr, const char* role, bool needed) -> std::shared_ptr<Scorer> {
    if (!addr.empty()) return connect_scorer(addr, timeout);
    if (needed) throw Error(ErrorCode::InvalidArgument, std::string("--") + role + " is required");
    return std::make_shared<AbsentScorer>(role, vocab.hash());
  };
  const bool skip = !a.strict;
  const bool need_mt = !lambda || !skip || *lambda > 0.0;
  const bool need_llm = !lambda || !skip || *lambda < 1.0;
  return {ScorerSlot{connect(a.mt, "mt", need_mt), ConditioningKind::source_conditioned},
          ScorerSlot{connect(a.llm, "llm", need_llm), ConditioningKind::prompt_conditioned}};
}

CorpusDecodeOptions make_options(const DecodeArgs& a) {
  CorpusDecodeOptions o;
  o.fail_fast = a.fail_fast;
  o.parallelism = a.jobs == 0 ? 1 : a.jobs;
  return o;
}

int run_decode(const DecodeArgs& a, double lambda) {
  const Vocabulary vocab = load_vocab(a.vocab);
  const Corpus corpus = load_corpus(a, a.corpus);
  const PromptPlan plan = make_plan(a);
  const auto slots = make_slots(a, vocab, lambda);

  DecodeConfig cfg = DecodeConfig::pair(lambda);
  cfg.max_len = a.max_len;
  cfg.skip_zero_weight = !a.strict;
  cfg.validate();

  const auto results = decode_corpus(corpus, slots, cfg, plan, vocab, make_options(a));

  const fs::path out(a.out);
  fs::create_directories(out);
  write_lines(hypotheses(results), out / "hyp.txt");
  std::string jsonl;
  std::size_t failed = 0;
  for (const auto& r : results) {
    nlohmann::ordered_json j;
    j["id"] = r.segment_id;
    j["ok"] = r.ok();
    j["lambda"] = lambda;
    if (r.prompt) j["prompt"] = *r.prompt;
    if (r.ok()) {
      j["result"] = to_json(*r.result);
    } else {
      ++failed;
      j["error_code"] = std::string(to_string(*r.error_code));
      j["error"] = r.error;
    }
    jsonl += j.dump() + "\n";
  }
  write_file_atomic(out / "results.jsonl", jsonl);
  std::fprintf(stderr, "decoded %zu segments (%zu failed) at lambda=%s -> %s\n", results.size(), failed,
               format_lambda(lambda).c_str(), out.string().c_str());
  return failed == 0 ? 0 : 2;
}

// A single quoted argument is split on whitespace, so commands whose own
// flags start with '-' can be passed as one string.
MetricHandle make_metric(const std::string& name, const std::vector<std::string>& cmd) {
  if (cmd.size() == 1) return MetricHandle::external(split_command(cmd.front()));
  if (!cmd.empty()) return MetricHandle::external(cmd);
  return MetricHandle::builtin(name);
}

int run_sweep(const DecodeArgs& a, const std::string& grid_text, const std::string& metric_name,
              const std::vector<std::string>& metric_cmd, const std::string& valid, bool no_cache) {
  const Vocabulary vocab = load_vocab(a.vocab);
  const Corpus corpus = load_corpus(a, valid.empty() ? a.corpus : valid);
  const auto slots = make_slots(a, vocab, std::nullopt);
  const auto grid = parse_grid(grid_text);
  const MetricHandle metric = make_metric(metric_name, metric_cmd);

  DecodeConfig base;
  base.max_len = a.max_len;
  base.skip_zero_weight = !a.strict;

  const fs::path out(a.out);
  fs::create_directories(out);
  SweepOptions options;
  options.plan = make_plan(a);
  options.decode = make_options(a);
  if (!no_cache) options.run_dir = out / "points";
  options.on_point = [](const SweepPoint& p) {
    std::fprintf(stderr, "lambda=%s score=%.4f segments=%zu\n", format_lambda(p.lambda).c_str(), p.score,
                 p.n_segments);
  };
  SweepStats stats;
  const SweepResult result = sweep(corpus, slots, base, grid, metric, vocab, options, &stats);
  emit_sweep_csv(result, out / "sweep.csv");
  write_file_atomic(out / "sweep.json", sweep_summary_json(result).dump(2) + "\n");
  std::fprintf(stderr, "decoded %zu points, reused %zu cached\n", stats.decoded_points, stats.cached_points);
  std::printf("best_lambda=%s %s=%.4f\n", format_lambda(result.best_lambda).c_str(), result.metric_name.c_str(),
              result.score_at(result.best_lambda));
  return 0;
}

struct EvalArgs {
  std::vector<std::string> hyps;
  std::vector<std::string> systems;
  std::vector<double> lambdas;
  std::string corpus;
  std::string ref;
  std::string metric = "chrf";
  std::vector<std::string> metric_cmd;
  bool ctxpro = false;
  bool case_fold = false;
  std::string report;
  std::string sweep_json;
  std::string sweep_csv;
};

int run_eval(const EvalArgs& a) {
  if (!a.systems.empty() && a.systems.size() != a.hyps.size()) {
    throw Error(ErrorCode::InvalidArgument, "--system must be given once per --hyp");
  }
  if (!a.lambdas.empty() && a.lambdas.size() != a.hyps.size()) {
    throw Error(ErrorCode::InvalidArgument, "--lambda must be given once per --hyp");
  }
  Corpus corpus;
  if (!a.corpus.empty()) {
    corpus = ingest_jsonl(a.corpus);
  } else if (!a.ref.empty()) {
    // Plain references: reuse them as sources so the corpus shape matches.
    corpus = ingest_parallel(a.ref, fs::path(a.ref));
  } else {
    throw Error(ErrorCode::InvalidArgument, "one of --corpus or --ref is required");
  }
  const MetricHandle metric = make_metric(a.metric, a.metric_cmd);

  Report report;
  for (std::size_t i = 0; i < a.hyps.size(); ++i) {
    const auto hyps = read_lines(a.hyps[i]);
    if (hyps.size() != corpus.size()) {
      throw Error(ErrorCode::MetricError, a.hyps[i] + ": " + std::to_string(hyps.size()) +
                                              " hypotheses for " + std::to_string(corpus.size()) + " segments");
    }
    SystemRow row;
    row.name = a.systems.empty() ? fs::path(a.hyps[i]).parent_path().filename().string() : a.systems[i];
    if (row.name.empty()) row.name = fs::path(a.hyps[i]).stem().string();
    if (!a.lambdas.empty()) row.lambda = a.lambdas[i];
    row.metric_name = metric.name();
    row.n_segments = hyps.size();
    row.score = score(metric, hyps, corpus.references());
    std::printf("%s\t%s\t%.4f\n", row.name.c_str(), row.metric_name.c_str(), row.score);
    if (a.ctxpro) {
      SystemAccuracy acc{row.name, targeted_accuracy(corpus, hyps, a.case_fold)};
      for (const auto& p : acc.phenomena) {
        std::printf("%s\t%s\t%zu/%zu\t%.1f%%\n", row.name.c_str(), p.phenomenon.c_str(), p.correct, p.total,
                    p.accuracy);
      }
      report.accuracies.push_back(std::move(acc));
    }
    report.systems.push_back(std::move(row));
  }
  if (!a.sweep_json.empty()) {
    report.sweep = sweep_from_summary_json(nlohmann::ordered_json::parse(read_file(a.sweep_json)));
  }
  if (!a.sweep_csv.empty()) report.sweep_csv = a.sweep_csv;
  if (!a.report.empty()) emit_report(report, a.report);
  return 0;
}

int run_serve(const std::string& model, const std::string& config, const std::string& listen, bool stdio) {
  auto backend = std::make_shared<toy::LocalScorer>(toy::load_toy_model(model, config));
  if (stdio) {
    LineStream stream(0, 1);
    wire::serve_stream(*backend, stream);
    return 0;
  }
  std::string host = "127.0.0.1";
  std::string port_text = listen;
  if (auto colon = listen.rfind(':'); colon != std::string::npos) {
    host = listen.substr(0, colon);
    port_text = listen.substr(colon + 1);
  }
  const int port = std::stoi(port_text);
  if (port < 0 || port > 65535) throw Error(ErrorCode::InvalidArgument, "bad port " + port_text);
  wire::TcpServer server(backend, host, static_cast<std::uint16_t>(port));
  std::fprintf(stderr, "listening on %s:%u\n", host.c_str(), static_cast<unsigned>(server.port()));
  std::fflush(stderr);
  server.run();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  ignore_sigpipe();
  CLI::App app{"Ensemble decoding of an MT model and an LLM"};
  app.require_subcommand(1);

  DecodeArgs dec;
  double lambda = 0.5;
  auto* decode = app.add_subcommand("decode", "Translate a corpus with the fused ensemble");
  add_decode_flags(decode, dec);
  decode->add_option("--lambda", lambda, "Weight on the MT scorer")->capture_default_str()->check(
      CLI::Range(0.0, 1.0));

  DecodeArgs sw;
  std::string grid = "0:1:0.1";
  std::string metric = "chrf";
  std::vector<std::string> metric_cmd;
  std::string valid;
  bool no_cache = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid-search lambda on a validation set");
  add_decode_flags(sweep_cmd, sw);
  sweep_cmd->add_option("--grid", grid, "start:stop:step or comma list")->capture_default_str();
  sweep_cmd->add_option("--metric", metric, "chrf|exact_match|token_accuracy")->capture_default_str();
  sweep_cmd->add_option("--metric-cmd", metric_cmd, "External metric argv; {hyp} and {ref} are substituted")
      ->expected(1, -1);
  sweep_cmd->add_option("--valid", valid, "Validation corpus (JSONL)")->check(CLI::ExistingFile);
  sweep_cmd->add_flag("--no-cache", no_cache, "Do not reuse or store per-point hypotheses");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Score hypotheses and write a report");
  eval->add_option("--hyp", ev.hyps, "Hypothesis file (repeatable)")->required()->check(CLI::ExistingFile);
  eval->add_option("--system", ev.systems, "System name per --hyp");
  eval->add_option("--lambda", ev.lambdas, "MT weight per --hyp");
  eval->add_option("--corpus", ev.corpus, "JSONL corpus with references")->check(CLI::ExistingFile);
  eval->add_option("--ref", ev.ref, "Plain-text references")->check(CLI::ExistingFile);
  eval->add_option("--metric", ev.metric, "chrf|exact_match|token_accuracy")->capture_default_str();
  eval->add_option("--metric-cmd", ev.metric_cmd, "External metric argv")->expected(1, -1);
  eval->add_flag("--ctxpro", ev.ctxpro, "Targeted-word accuracy per phenomenon");
  eval->add_flag("--case-fold", ev.case_fold, "Case-insensitive targeted-word matching");
  eval->add_option("--report", ev.report, "Write <path>.md and <path>.json");
  eval->add_option("--sweep", ev.sweep_json, "sweep.json to include in the report")->check(CLI::ExistingFile);
  eval->add_option("--sweep-csv", ev.sweep_csv, "Sweep CSV path to reference in the report");

  std::uint64_t seed = 1;
  std::size_t size = 200;
  std::string task_out;
  bool no_pronouns = false;
  auto* toytask = app.add_subcommand("toytask", "Generate a planted toy task");
  toytask->add_option("--seed", seed)->capture_default_str();
  toytask->add_option("--size", size, "Segments (at least 50)")->capture_default_str()->check(
      CLI::Range(std::size_t{50}, std::size_t{1} << 24));
  toytask->add_option("--out", task_out)->required();
  toytask->add_flag("--no-pronouns", no_pronouns, "Drop the ambiguous pronoun class");

  std::string model;
  std::string config;
  std::string listen;
  bool stdio = false;
  auto* serve = app.add_subcommand("serve-toy", "Serve a toy scorer over the wire protocol");
  serve->add_option("--model", model)->required()->check(CLI::IsMember({"lexicon", "ngram"}));
  serve->add_option("--config", config)->required()->check(CLI::ExistingFile);
  auto* listen_opt = serve->add_option("--listen", listen, "host:port (port 0 = ephemeral)");
  auto* stdio_opt = serve->add_flag("--stdio", stdio, "Serve on stdin/stdout");
  listen_opt->excludes(stdio_opt);

  CLI11_PARSE(app, argc, argv);

  try {
    if (decode->parsed()) return run_decode(dec, lambda);
    if (sweep_cmd->parsed()) return run_sweep(sw, grid, metric, metric_cmd, valid, no_cache);
    if (eval->parsed()) return run_eval(ev);
    if (toytask->parsed()) {
      toy::PlantedTaskOptions opts;
      opts.pronouns = !no_pronouns;
      const auto task = toy::build_planted_task(seed, size, opts);
      toy::write_planted_task(task, task_out);
      std::fprintf(stderr, "wrote %zu segments to %s\n", task.corpus.size(), task_out.c_str());
      return 0;
    }
    if (serve->parsed()) {
      if (!stdio && listen.empty()) throw Error(ErrorCode::InvalidArgument, "one of --listen or --stdio");
      return run_serve(model, config, listen, stdio);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "fusedec: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fusedec: %s\n", e.what());
    return 1;
  }
  return 0;
}
