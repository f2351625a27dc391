#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "fusedec/error.hpp"
#include "fusedec/fusion.hpp"
#include "fusedec/logmath.hpp"
#include "fusedec/toy/models.hpp"
#include "fusedec/toy/oracle.hpp"
#include "helpers.hpp"

using namespace fusedec;
using fusedec::testing::FakeScorer;
using fusedec::testing::log_of;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

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

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

// Scorer over <s> </s> a b whose next-token table depends only on the prefix length.
std::shared_ptr<FakeScorer> table_scorer(const Vocabulary& v, std::vector<std::vector<double>> rows,
                                         std::string name) {
  return std::make_shared<FakeScorer>(
      v.hash(),
      [rows](const ConditioningSpec&, const std::vector<TokenId>& prefix) {
        return log_of(rows[std::min(prefix.size(), rows.size() - 1)]);
      },
      std::move(name));
}

}  // namespace

TEST_CASE("log_sum_exp") {
  CHECK(log_sum_exp(std::vector<double>{}) == -kInf);
  CHECK(log_sum_exp(std::vector<double>{-kInf, -kInf}) == -kInf);
  CHECK(bit_equal(log_sum_exp(std::vector<double>{-1.25}), -1.25));
  CHECK(log_sum_exp(std::vector<double>{std::log(0.25), std::log(0.75)}) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(log_sum_exp(std::vector<double>{-1000.0, -1000.0}) == doctest::Approx(-1000.0 + std::log(2.0)));
  CHECK(log_sum_exp(std::vector<double>{0.0, -kInf}) == 0.0);
}

TEST_CASE("fuse: worked example") {
  const TokenDistribution mt{log_of({0.6, 0.3, 0.1})};
  const TokenDistribution llm{log_of({0.2, 0.5, 0.3})};
  const std::vector<TokenDistribution> d{mt, llm};
  const std::vector<double> w{0.7, 0.3};
  const auto out = fuse(d, w);
  const std::vector<double> expected{0.48, 0.36, 0.16};
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::exp(out[i]) == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("fuse: one-hot weights return the input bit for bit") {
  const TokenDistribution mt{log_of({0.6, 0.3, 0.1})};
  const TokenDistribution llm{{-kInf, std::log(0.5), std::log(0.5)}};
  const std::vector<TokenDistribution> d{mt, llm};
  const auto a = fuse(d, std::vector<double>{1.0, 0.0});
  const auto b = fuse(d, std::vector<double>{0.0, 1.0});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(bit_equal(a[i], mt[i]));
    CHECK(bit_equal(b[i], llm[i]));
  }
}

TEST_CASE("fuse: identical inputs are a fixed point") {
  const TokenDistribution p{log_of({0.125, 0.5, 0.375})};
  const std::vector<TokenDistribution> d{p, p};
  for (double lam : {0.1, 0.33, 0.5, 0.9}) {
    const auto out = fuse(d, std::vector<double>{lam, 1.0 - lam});
    for (std::size_t i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(p[i]).epsilon(1e-12));
  }
}

TEST_CASE("fuse: -inf entries") {
  const TokenDistribution a{{0.0, -kInf}};
  const TokenDistribution b{{-kInf, 0.0}};
  const std::vector<TokenDistribution> d{a, b};
  const auto out = fuse(d, std::vector<double>{0.25, 0.75});
  CHECK(std::exp(out[0]) == doctest::Approx(0.25));
  CHECK(std::exp(out[1]) == doctest::Approx(0.75));
  const std::vector<TokenDistribution> same{a, a};
  CHECK(fuse(same, std::vector<double>{0.5, 0.5})[1] == -kInf);
}

TEST_CASE("fuse: shape and weight errors") {
  const TokenDistribution a{log_of({0.5, 0.5})};
  const TokenDistribution b{log_of({0.2, 0.3, 0.5})};
  const std::vector<TokenDistribution> ab{a, b};
  const std::vector<TokenDistribution> aa{a, a};
  CHECK(code_of([&] { fuse(ab, std::vector<double>{0.5, 0.5}); }) == ErrorCode::ShapeError);
  CHECK(code_of([&] { fuse(aa, std::vector<double>{1.0}); }) == ErrorCode::ShapeError);
  CHECK(code_of([&] { fuse(std::vector<TokenDistribution>{}, std::vector<double>{}); }) == ErrorCode::ShapeError);
  CHECK(code_of([&] { fuse(aa, std::vector<double>{0.6, 0.6}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { fuse(aa, std::vector<double>{1.5, -0.5}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { fuse(aa, std::vector<double>{std::nan(""), 1.0}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("argmax ties go to the lowest id") {
  CHECK(argmax_lowest_id({{-1.0, -0.5, -0.5, -2.0}}) == 1);
  CHECK(argmax_lowest_id({{-kInf, -kInf}}) == 0);
  CHECK(argmax_lowest_id({{-3.0, -1.0, -2.0, -1.0}}) == 1);
  CHECK(code_of([] { argmax_lowest_id({}); }) == ErrorCode::ShapeError);
}

TEST_CASE("DecodeConfig") {
  CHECK(DecodeConfig::pair(0.7).lambdas == std::vector<double>{0.7, 1.0 - 0.7});
  CHECK_NOTHROW(DecodeConfig::pair(0.3).validate());
  DecodeConfig bad;
  bad.lambdas = {0.5, 0.6};
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidArgument);
  bad.lambdas = {};
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidArgument);
  DecodeConfig cfg;
  CHECK(cfg.effective_max_len(5) == 256);
  CHECK(cfg.effective_max_len(123) == 256);
  CHECK(cfg.effective_max_len(200) == 410);
  cfg.max_len = 7;
  CHECK(cfg.effective_max_len(200) == 7);
}

TEST_CASE("greedy_decode follows the fused argmax and advances every session with it") {
  auto v = fusedec::testing::abVocab();
  // MT prefers a then eos; LLM prefers b strongly at step 0.
  auto mt = table_scorer(*v, {{0.0, 0.1, 0.5, 0.4}, {0.0, 0.8, 0.1, 0.1}}, "mt");
  auto llm = table_scorer(*v, {{0.0, 0.05, 0.05, 0.9}, {0.0, 0.6, 0.2, 0.2}}, "llm");
  const std::vector<ScorerBinding> b{{mt, ConditioningSpec::source({2})}, {llm, ConditioningSpec::prompt("p")}};

  std::vector<std::vector<TokenId>> seen;
  const auto r = greedy_decode(b, DecodeConfig::pair(0.5), *v,
                               [&](std::size_t step, std::span<ScorerSession* const> sessions) {
                                 CHECK(sessions.size() == 2);
                                 CHECK(sessions[0]->prefix().size() == step + 1);
                                 CHECK(std::equal(sessions[0]->prefix().begin(), sessions[0]->prefix().end(),
                                                  sessions[1]->prefix().begin(), sessions[1]->prefix().end()));
                                 seen.emplace_back(sessions[0]->prefix().begin(), sessions[0]->prefix().end());
                               });
  CHECK(r.token_ids == std::vector<TokenId>{3});
  CHECK(r.text == "b");
  CHECK(r.terminated_by == TerminatedBy::eos);
  REQUIRE(r.steps.size() == 2);
  CHECK(std::exp(*r.steps[0].fused_logprob) == doctest::Approx(0.65));
  CHECK(std::exp(*r.steps[0].scorer_logprobs[0]) == doctest::Approx(0.4));
  CHECK(std::exp(*r.steps[0].scorer_logprobs[1]) == doctest::Approx(0.9));
  CHECK(r.steps[1].token == v->eos_id());
  CHECK_FALSE(r.steps[1].forced);
  CHECK(seen == std::vector<std::vector<TokenId>>{{3}});
  CHECK(mt->live() == 0);
  CHECK(llm->live() == 0);
}

TEST_CASE("reduction to a single scorer at the endpoints") {
  auto v = fusedec::testing::abVocab();
  auto mt = table_scorer(*v, {{0.0, 0.1, 0.5, 0.4}, {0.0, 0.2, 0.1, 0.7}, {0.0, 0.9, 0.05, 0.05}}, "mt");
  auto llm = table_scorer(*v, {{0.0, 0.05, 0.05, 0.9}, {0.0, 0.1, 0.8, 0.1}, {0.0, 0.1, 0.1, 0.8}, {0.0, 1.0, 0.0, 0.0}}, "llm");
  const std::vector<ScorerBinding> both{{mt, ConditioningSpec::source({2})}, {llm, ConditioningSpec::prompt("p")}};
  DecodeConfig one;
  one.lambdas = {1.0};
  const auto mt_alone = greedy_decode(std::span(both).first(1), one, *v);
  const auto llm_alone = greedy_decode(std::span(both).subspan(1), one, *v);
  CHECK(mt_alone.token_ids != llm_alone.token_ids);

  for (bool skip : {true, false}) {
    CAPTURE(skip);
    DecodeConfig c1 = DecodeConfig::pair(1.0);
    c1.skip_zero_weight = skip;
    DecodeConfig c0 = DecodeConfig::pair(0.0);
    c0.skip_zero_weight = skip;
    const auto r1 = greedy_decode(both, c1, *v);
    const auto r0 = greedy_decode(both, c0, *v);
    CHECK(r1.token_ids == mt_alone.token_ids);
    CHECK(r1.text == mt_alone.text);
    CHECK(r0.token_ids == llm_alone.token_ids);
    for (std::size_t i = 0; i < r1.steps.size(); ++i) {
      CHECK(bit_equal(*r1.steps[i].fused_logprob, *mt_alone.steps[i].fused_logprob));
      CHECK(r1.steps[i].scorer_logprobs[1].has_value() == !skip);
    }
  }
}

TEST_CASE("zero-weight scorers get no session unless strict") {
  auto v = fusedec::testing::abVocab();
  auto mt = table_scorer(*v, {{0.0, 0.1, 0.5, 0.4}, {0.0, 0.9, 0.05, 0.05}}, "mt");
  auto llm = table_scorer(*v, {{0.0, 0.5, 0.25, 0.25}}, "llm");
  const std::vector<ScorerBinding> b{{mt, ConditioningSpec::source({2})}, {llm, ConditioningSpec::prompt("p")}};
  DecodeConfig cfg = DecodeConfig::pair(1.0);
  greedy_decode(b, cfg, *v);
  CHECK(llm->opens() == 0);
  CHECK(llm->scores() == 0);
  cfg.skip_zero_weight = false;
  greedy_decode(b, cfg, *v);
  CHECK(llm->opens() == 1);
  CHECK(llm->scores() == 2);
}

TEST_CASE("max_len forces a terminal eos") {
  auto v = fusedec::testing::abVocab();
  auto babbler = table_scorer(*v, {{0.0, 0.1, 0.6, 0.3}}, "babbler");
  const std::vector<ScorerBinding> b{{babbler, ConditioningSpec::prompt("")}};
  DecodeConfig cfg;
  cfg.lambdas = {1.0};
  cfg.max_len = 3;
  const auto r = greedy_decode(b, cfg, *v);
  CHECK(r.token_ids == std::vector<TokenId>{2, 2, 2});
  CHECK(r.terminated_by == TerminatedBy::max_len);
  REQUIRE(r.steps.size() == 4);
  CHECK(r.steps.back().forced);
  CHECK(r.steps.back().token == v->eos_id());
  CHECK_FALSE(r.steps.back().fused_logprob.has_value());
  CHECK_FALSE(r.steps.back().scorer_logprobs[0].has_value());

  const auto j = to_json(r);
  CHECK(j["terminated_by"] == "max_len");
  CHECK(j["steps"][3]["fused_logprob"].is_null());
  CHECK(j["steps"][3]["forced"] == true);
  CHECK(j["steps"][0]["scorer_logprobs"].size() == 1);
}

TEST_CASE("default max_len is max(256, 2*src+10)") {
  auto v = fusedec::testing::abVocab();
  auto babbler = table_scorer(*v, {{0.0, 0.1, 0.6, 0.3}}, "babbler");
  DecodeConfig cfg;
  cfg.lambdas = {1.0};
  const std::vector<ScorerBinding> short_src{{babbler, ConditioningSpec::source({2, 3})}};
  CHECK(greedy_decode(short_src, cfg, *v).token_ids.size() == 256);
  const std::vector<ScorerBinding> long_src{{babbler, ConditioningSpec::source(std::vector<TokenId>(150, 2))}};
  CHECK(greedy_decode(long_src, cfg, *v).token_ids.size() == 310);
}

TEST_CASE("-inf log-probabilities serialize as -1e30") {
  StepRecord s;
  s.token = 1;
  s.fused_logprob = -kInf;
  s.scorer_logprobs = {-kInf, std::nullopt, -0.5};
  const auto j = to_json(s);
  CHECK(j.dump() == R"({"token":1,"fused_logprob":-1e+30,"scorer_logprobs":[-1e+30,null,-0.5],"forced":false})");
}

TEST_CASE("scorer failures surface as DecodeError with the step index") {
  auto v = fusedec::testing::abVocab();
  auto mt = table_scorer(*v, {{0.0, 0.1, 0.6, 0.3}, {0.0, 0.1, 0.6, 0.3}, {0.0, 0.1, 0.6, 0.3}, {0.0, 1.0, 0.0, 0.0}}, "mt");
  auto flaky = table_scorer(*v, {{0.0, 0.1, 0.6, 0.3}}, "flaky");
  flaky->fail_when = [](const ConditioningSpec&, const std::vector<TokenId>& prefix) {
    if (prefix.size() == 2) throw Error(ErrorCode::ScorerTimeout, "too slow");
  };
  const std::vector<ScorerBinding> b{{mt, ConditioningSpec::source({2})}, {flaky, ConditioningSpec::prompt("")}};
  try {
    greedy_decode(b, DecodeConfig::pair(0.5), *v);
    FAIL("expected DecodeError");
  } catch (const DecodeError& e) {
    CHECK(e.code() == ErrorCode::DecodeError);
    CHECK(e.step() == 2);
    CHECK(e.cause() == ErrorCode::ScorerTimeout);
    CHECK(std::string(e.what()).find("too slow") != std::string::npos);
  }
  CHECK(mt->live() == 0);
  CHECK(flaky->live() == 0);
}

TEST_CASE("vocab mismatch is raised as-is") {
  auto v = fusedec::testing::abVocab();
  auto other = fusedec::testing::abcVocab();
  auto good = table_scorer(*v, {{0.0, 1.0, 0.0, 0.0}}, "good");
  auto bad = table_scorer(*other, {{0.0, 1.0, 0.0, 0.0, 0.0, 0.0}}, "bad");
  const std::vector<ScorerBinding> b{{good, ConditioningSpec::source({2})}, {bad, ConditioningSpec::prompt("")}};
  CHECK_THROWS_AS(greedy_decode(b, DecodeConfig::pair(0.5), *v), VocabMismatchError);
  CHECK(good->live() == 0);
  // A mismatched scorer at weight zero is never contacted.
  CHECK_NOTHROW(greedy_decode(b, DecodeConfig::pair(1.0), *v));
}

TEST_CASE("scorer count must match the weights") {
  auto v = fusedec::testing::abVocab();
  auto s = table_scorer(*v, {{0.0, 1.0, 0.0, 0.0}}, "s");
  const std::vector<ScorerBinding> b{{s, ConditioningSpec::prompt("")}};
  CHECK(code_of([&] { greedy_decode(b, DecodeConfig::pair(0.5), *v); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("toy pair on |V|=6 with max_len 4 matches the brute-force oracle") {
  auto v = fusedec::testing::abcVocab();
  toy::LexiconConfig lc;
  lc.fidelity = {3, 5};
  lc.eos_noise = {1, 4};
  lc.seed = 11;
  lc.lexicon[3] = {4, 5};
  auto mt = std::make_shared<toy::LexiconModel>(v, lc);
  auto lm = std::make_shared<toy::NGramModel>(v, toy::NGramConfig{2, {1, 3}},
                                              std::vector<std::string>{"b c", "b b c", "c a", "a c b"});
  const auto src = ConditioningSpec::source({3, 4, 3});
  const auto prompt = ConditioningSpec::prompt("a b");
  const std::vector<ScorerBinding> b{{std::make_shared<toy::LocalScorer>(mt), src},
                                     {std::make_shared<toy::LocalScorer>(lm), prompt}};
  const std::vector<toy::OracleScorer> o{{mt.get(), src}, {lm.get(), prompt}};
  for (double lam : {0.0, 0.2, 0.45, 0.5, 0.7, 1.0}) {
    CAPTURE(lam);
    DecodeConfig cfg = DecodeConfig::pair(lam);
    cfg.max_len = 4;
    const std::vector<double> w{lam, 1.0 - lam};
    CHECK(greedy_decode(b, cfg, *v).token_ids == toy::oracle_greedy(o, w, *v, 4));
  }
}
