#include <doctest.h>

#include <algorithm>

#include "fusedec/corpus.hpp"
#include "fusedec/error.hpp"
#include "fusedec/metrics.hpp"
#include "fusedec/report.hpp"
#include "helpers.hpp"

using namespace fusedec;
using fusedec::testing::TempDir;
using Lines = std::vector<std::string>;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::IoError;
}

Segment targeted(std::string id, std::vector<std::string> words, std::optional<std::string> phenomenon) {
  Segment s;
  s.id = std::move(id);
  s.src = "x";
  s.target_words = std::move(words);
  s.phenomenon = std::move(phenomenon);
  return s;
}

}  // namespace

TEST_CASE("JSONL ingest groups documents") {
  const auto c = parse_jsonl(
      "{\"id\":\"a\",\"doc_id\":\"d\",\"src\":\"eins\",\"ref\":\"one\"}\n"
      "{\"id\":\"b\",\"doc_id\":\"d\",\"src\":\"zwei\"}\n");
  REQUIRE(c.size() == 2);
  REQUIRE(c.documents().size() == 1);
  CHECK(c.documents()[0].doc_id == "d");
  CHECK(c.documents()[0].segments == std::vector<std::size_t>{0, 1});
  CHECK(c[0].ref == "one");
  CHECK_FALSE(c[1].ref.has_value());
}

TEST_CASE("JSONL ingest details") {
  SUBCASE("ids default to line numbers and loose segments stand alone") {
    const auto c = parse_jsonl("{\"src\":\"a\"}\n\n{\"src\":\"b\",\"domain\":\"TED\"}\n");
    CHECK(c[0].id == "1");
    CHECK(c[1].id == "3");
    CHECK(c[1].domain == "TED");
    CHECK(c.documents().size() == 2);
  }
  SUBCASE("interleaved documents keep first-appearance order") {
    const auto c = parse_jsonl(
        "{\"id\":\"1\",\"doc_id\":\"y\",\"src\":\"a\"}\n{\"id\":\"2\",\"doc_id\":\"x\",\"src\":\"b\"}\n"
        "{\"id\":\"3\",\"doc_id\":\"y\",\"src\":\"c\"}\n");
    REQUIRE(c.documents().size() == 2);
    CHECK(c.documents()[0].doc_id == "y");
    CHECK(c.documents()[0].segments == std::vector<std::size_t>{0, 2});
  }
  SUBCASE("round trip") {
    const auto c = parse_jsonl(
        "{\"id\":\"s\",\"doc_id\":\"d\",\"src\":\"Hallo\",\"ref\":\"Hi\",\"domain\":\"chat\","
        "\"target_words\":[\"Sie\",\"sie\"],\"phenomenon\":\"formality\"}\n");
    CHECK(to_jsonl(parse_jsonl(to_jsonl(c))) == to_jsonl(c));
    CHECK(parse_jsonl(to_jsonl(c))[0].target_words == Lines{"Sie", "sie"});
  }
  SUBCASE("errors") {
    CHECK(code_of([] { parse_jsonl("{\"id\":\"a\",\"src\":\"x\"}\n{\"id\":\"a\",\"src\":\"y\"}\n"); }) ==
          ErrorCode::IngestError);
    CHECK(code_of([] { parse_jsonl("{\"id\":\"a\"}\n"); }) == ErrorCode::IngestError);
    CHECK(code_of([] { parse_jsonl("not json\n"); }) == ErrorCode::IngestError);
    CHECK(code_of([] { parse_jsonl("[1]\n"); }) == ErrorCode::IngestError);
    CHECK(code_of([] { parse_jsonl("{\"src\":\"x\",\"phenomenon\":\"gender\"}\n"); }) == ErrorCode::IngestError);
    CHECK(code_of([] { parse_jsonl("{\"src\":\"x\",\"target_words\":\"sie\"}\n"); }) == ErrorCode::IngestError);
    CHECK(code_of([] { parse_jsonl("{\"src\":3}\n"); }) == ErrorCode::IngestError);
  }
}

TEST_CASE("plain-text pairs") {
  TempDir dir;
  write_lines({"a", "b", "c"}, dir / "src.txt");
  write_lines({"A", "B"}, dir / "ref2.txt");
  write_lines({"A", "B", "C"}, dir / "ref3.txt");
  CHECK(code_of([&] { ingest_parallel(dir / "src.txt", dir / "ref2.txt"); }) == ErrorCode::IngestError);
  const auto c = ingest_parallel(dir / "src.txt", dir / "ref3.txt");
  CHECK(c.references() == Lines{"A", "B", "C"});
  CHECK(c[2].id == "3");

  // References are only demanded when a metric needs them.
  const auto bare = ingest_parallel(dir / "src.txt");
  CHECK(bare.size() == 3);
  CHECK(code_of([&] { bare.references(); }) == ErrorCode::MetricError);
}

TEST_CASE("chrF against reference values") {
  // Frozen from an independent chrF implementation (char order 6, beta 2,
  // no word n-grams, whitespace removed).
  CHECK(chrf(Lines{"hello"}, Lines{"hella"}) == doctest::Approx(54.333333333333336).epsilon(1e-12));
  CHECK(chrf(Lines{"the cat sat on the mat"}, Lines{"the cat is on the mat"}) ==
        doctest::Approx(64.5779420625287).epsilon(1e-12));
  CHECK(chrf(Lines{"the cat sat on the mat", "a quick brown fox", ""},
             Lines{"the cat is on the mat", "the quick brown fox jumps", "nothing here"}) ==
        doctest::Approx(51.31553204608231).epsilon(1e-12));
  CHECK(chrf(Lines{"Dann hat sie gelacht", "er würde gehen"}, Lines{"Dann hat Sie gelacht", "er wird gehen"}) ==
        doctest::Approx(61.67410476944944).epsilon(1e-12));
  CHECK(chrf(Lines{"ab"}, Lines{"abc"}) == doctest::Approx(63.636363636363626).epsilon(1e-12));
  CHECK(chrf(Lines{"xyz"}, Lines{"abc"}) == 0.0);
}

TEST_CASE("chrF of identical corpora is 100") {
  for (const auto& x : {Lines{"a"}, Lines{"hello world"}, Lines{"über", "日本語のテキスト", "x y z"},
                        Lines{"a much longer sentence with plenty of character n-grams"}}) {
    CHECK(chrf(x, x) == 100.0);
    CHECK(score(MetricHandle::builtin("chrf"), x, x) == 100.0);
  }
  CHECK(chrf(Lines{"a b"}, Lines{"ab"}) == 100.0);  // whitespace is ignored
}

TEST_CASE("exact_match and token_accuracy") {
  CHECK(exact_match(Lines{"a b"}, Lines{"a c"}) == 0.0);
  CHECK(exact_match(Lines{"a b", "c"}, Lines{"a b", "d"}) == 50.0);
  CHECK(token_accuracy(Lines{"a b c", "x"}, Lines{"a x c", "x y"}) == 60.0);
  CHECK(token_accuracy(Lines{"a b"}, Lines{"a b"}) == 100.0);
  CHECK(token_accuracy(Lines{""}, Lines{""}) == 100.0);
  CHECK(token_accuracy(Lines{"b a"}, Lines{"a b"}) == 0.0);
  CHECK(code_of([] { exact_match(Lines{"a"}, Lines{}); }) == ErrorCode::MetricError);
  CHECK(code_of([] { chrf(Lines{"a"}, Lines{"a", "b"}); }) == ErrorCode::MetricError);
  CHECK(code_of([] { token_accuracy(Lines{"a"}, Lines{"a", "b"}); }) == ErrorCode::MetricError);
}

TEST_CASE("metric handles") {
  CHECK(MetricHandle::builtin("chrf").kind == MetricKind::chrf);
  CHECK(MetricHandle::builtin("exact_match").name() == "exact_match");
  CHECK(MetricHandle::builtin("token_accuracy").name() == "token_accuracy");
  CHECK(code_of([] { MetricHandle::builtin("bleu"); }) == ErrorCode::MetricError);
  CHECK(code_of([] { MetricHandle::external({}); }) == ErrorCode::MetricError);
  CHECK(MetricHandle::external({"comet-score"}).kind == MetricKind::external_command);
}

TEST_CASE("external metric command") {
  const Lines hyps{"a", "b"};
  const Lines refs{"a", "c"};
  SUBCASE("a stub echoing a constant yields exactly that constant") {
    CHECK(run_external_metric({"sh", "-c", "echo 42.5"}, hyps, refs) == 42.5);
    CHECK(score(MetricHandle::external({"sh", "-c", "echo 0.8731"}), hyps, refs) == 0.8731);
  }
  SUBCASE("paths are passed as arguments") {
    // Appended when there are no placeholders.
    CHECK(run_external_metric({"sh", "-c", "wc -l < \"$1\"", "sh"}, hyps, refs) == 2.0);
    // Substituted in place otherwise.
    CHECK(run_external_metric({"sh", "-c", "grep -c c \"$1\"", "sh", "{ref}"}, hyps, refs) == 1.0);
    CHECK(run_external_metric({"sh", "-c", "grep -c c \"$1\" || true", "sh", "{hyp}"}, hyps, refs) == 0.0);
  }
  SUBCASE("failures carry stderr") {
    try {
      run_external_metric({"sh", "-c", "echo model not found >&2; exit 3"}, hyps, refs);
      FAIL("expected MetricError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MetricError);
      CHECK(std::string(e.what()).find("model not found") != std::string::npos);
    }
    CHECK(code_of([&] { run_external_metric({"sh", "-c", "echo nan-ish"}, hyps, refs); }) ==
          ErrorCode::MetricError);
    CHECK(code_of([&] { run_external_metric({"/nonexistent/metric"}, hyps, refs); }) == ErrorCode::MetricError);
  }
  SUBCASE("no length check for external metrics") {
    CHECK(run_external_metric({"sh", "-c", "echo 1"}, hyps, Lines{}) == 1.0);
  }
}

TEST_CASE("full-token matching") {
  CHECK(contains_full_token("Dann hat sie gelacht", "sie"));
  CHECK_FALSE(contains_full_token("er würde gehen", "wird"));
  CHECK_FALSE(contains_full_token("er würde gehen", "würd"));
  CHECK(contains_full_token("er würde gehen.", "gehen"));
  CHECK(contains_full_token("\"Sie\", sagte er", "Sie"));
  CHECK_FALSE(contains_full_token("Diesie", "sie"));
  CHECK_FALSE(contains_full_token("sie2", "sie"));
  CHECK(contains_full_token("Я купил книгу.", "книгу"));
  CHECK_FALSE(contains_full_token("Я купил книгую", "книгу"));
  CHECK_FALSE(contains_full_token("Dann hat Sie gelacht", "sie"));
  CHECK(contains_full_token("Dann hat Sie gelacht", "sie", true));
  CHECK(contains_full_token("ÜBER alles", "über", true));
  CHECK(contains_full_token("wird wird", "wird"));
  CHECK_FALSE(contains_full_token("anything", ""));
}

TEST_CASE("targeted accuracy") {
  const Corpus corpus({targeted("1", {"sie", "Sie"}, "formality"), targeted("2", {"wird"}, "auxiliary"),
                       targeted("3", {"ihr"}, "formality"), targeted("4", {"er"}, std::nullopt),
                       [] {
                         Segment s;
                         s.id = "5";
                         s.src = "plain";
                         return s;
                       }()});
  const Lines hyps{"Dann hat sie gelacht", "er würde gehen", "habt ihr", "er", "ignored"};
  const auto acc = targeted_accuracy(corpus, hyps);
  REQUIRE(acc.size() == 3);
  CHECK(acc[0] == PhenomenonAccuracy{"auxiliary", 0, 1, 0.0});
  CHECK(acc[1] == PhenomenonAccuracy{"formality", 2, 2, 100.0});
  CHECK(acc[2] == PhenomenonAccuracy{"unspecified", 1, 1, 100.0});

  SUBCASE("order invariance") {
    auto segs = corpus.segments();
    Lines h = hyps;
    std::reverse(segs.begin(), segs.end());
    std::reverse(h.begin(), h.end());
    CHECK(targeted_accuracy(Corpus(segs), h) == acc);
  }
  SUBCASE("tokens outside the matched word do not matter") {
    const Lines other{"völlig anders sie", "er würde gehen", "ihr !", "und er auch", ""};
    CHECK(targeted_accuracy(corpus, other) == acc);
  }
  SUBCASE("case fold") {
    const Corpus c({targeted("1", {"sie"}, "formality")});
    CHECK(targeted_accuracy(c, Lines{"Sie"})[0].correct == 0);
    CHECK(targeted_accuracy(c, Lines{"Sie"}, true)[0].correct == 1);
  }
  SUBCASE("hypothesis count must match") {
    CHECK(code_of([&] { targeted_accuracy(corpus, Lines{"x"}); }) == ErrorCode::MetricError);
  }
}

namespace {

Report table_shaped() {
  Report r;
  r.systems = {{"MT", 1.0, "chrf", 51.234, 12, 0},
               {"LLM", 0.0, "chrf", 47.5, 12, 1},
               {"Ensemble+ctx", 0.4, "chrf", 53.0, 12, 0},
               {"baseline-file", std::nullopt, "chrf", 40.0, 12, 0}};
  const auto row = [](std::string name, std::size_t correct, std::size_t total) {
    return PhenomenonAccuracy{std::move(name), correct, total, 100.0 * static_cast<double>(correct) / static_cast<double>(total)};
  };
  r.accuracies = {{"MT", {row("auxiliary", 1, 4), row("formality", 2, 4), row("gender", 3, 4)}},
                  {"LLM", {row("auxiliary", 0, 4), row("formality", 1, 4), row("gender", 4, 4)}},
                  {"Ensemble+ctx", {row("auxiliary", 2, 4), row("formality", 3, 8), row("gender", 1, 3)}}};
  return r;
}

}  // namespace

TEST_CASE("report markdown layout") {
  const std::string md = to_markdown(table_shaped());
  CHECK(md ==
        "# Results\n\n"
        "| system | lambda | metric | score | segments | failed |\n"
        "|---|---|---|---|---|---|\n"
        "| MT | 1 | chrf | 51.23 | 12 | 0 |\n"
        "| LLM | 0 | chrf | 47.50 | 12 | 1 |\n"
        "| Ensemble+ctx | 0.4 | chrf | 53.00 | 12 | 0 |\n"
        "| baseline-file | - | chrf | 40.00 | 12 | 0 |\n"
        "\n## Targeted-word accuracy\n\n"
        "| phenomenon | MT | LLM | Ensemble+ctx |\n"
        "|---|---|---|---|\n"
        "| auxiliary | 25.0% | 0.0% | 50.0% |\n"
        "| formality | 50.0% | 25.0% | 37.5% |\n"
        "| gender | 75.0% | 100.0% | 33.3% |\n");
}

TEST_CASE("report JSON round-trips") {
  Report r = table_shaped();
  SweepResult sw;
  sw.metric_name = "chrf";
  sw.points = {{0.0, 47.5, 12}, {0.5, 53.25, 12}, {1.0, 51.234, 12}};
  sw.best_lambda = 0.5;
  r.sweep = sw;
  r.sweep_csv = "runs/sweep.csv";
  const std::string text = to_json(r).dump(2);
  const Report back = report_from_json(nlohmann::ordered_json::parse(text));
  CHECK(back == r);
  CHECK(to_json(back).dump(2) == text);
  CHECK(text.find("\"metric_name\": \"chrf\"") != std::string::npos);
  CHECK(text.find("\"lambda\": null") != std::string::npos);

  const std::string md = to_markdown(r);
  CHECK(md.find("best lambda: 0.5\n") != std::string::npos);
  CHECK(md.find("sweep curve: `runs/sweep.csv`") != std::string::npos);

  TempDir dir;
  emit_report(r, dir / "report.txt");
  CHECK(read_file(dir / "report.md") == md);
  CHECK(read_file(dir / "report.json") == text + "\n");
  emit_report(r, dir / "nested" / "r");
  CHECK(std::filesystem::exists(dir / "nested" / "r.json"));
  write_file_atomic(dir / "plain", "x");
  CHECK(code_of([&] { emit_report(r, dir / "plain" / "r"); }) == ErrorCode::IoError);
}
