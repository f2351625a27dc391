#include <doctest.h>

#include "fusedec/corpus.hpp"
#include "fusedec/error.hpp"
#include "fusedec/vocab.hpp"
#include "helpers.hpp"

using namespace fusedec;
using fusedec::testing::TempDir;

namespace {

const char* kFourTokens =
    "#special: bos=<s>\n"
    "#special: eos=</s>\n"
    "<s>\n</s>\na\nb\n";

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

}  // namespace

TEST_CASE("load_vocab: four tokens with eos") {
  TempDir dir;
  write_file_atomic(dir / "v.txt", kFourTokens);
  const Vocabulary v = load_vocab(dir / "v.txt");
  CHECK(v.size() == 4);
  CHECK(v.eos_id() == 1);
  CHECK(v.bos_id() == 0);
  CHECK_FALSE(v.unk_id().has_value());
  CHECK(v.token(2) == "a");
  CHECK(*v.find("b") == 3);
  CHECK_FALSE(v.find("z").has_value());
}

TEST_CASE("load_vocab: same file twice gives the same hash") {
  TempDir dir;
  write_file_atomic(dir / "v.txt", kFourTokens);
  CHECK(load_vocab(dir / "v.txt").hash() == load_vocab(dir / "v.txt").hash());
}

TEST_CASE("hash matches independently computed FNV-1a values") {
  // Computed outside this codebase over "<i>\t<tok>\n"... + "#special:<name>=<i>\n".
  CHECK(format_hash(parse_vocab(kFourTokens).hash()) == "1447159037362f17");
  CHECK(format_hash(parse_vocab("#special: eos=</s>\n<s>\n</s>\na\nb\n").hash()) == "18cdc2ef64bc7d28");
  CHECK(format_hash(parse_vocab("#special: eos=</s>\n</s>\n\xc3\xa4\n\xe6\x97\xa5\xe6\x9c\xac\n").hash()) ==
        "2f9fd516adc68e22");
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("format_hash and parse_hash round-trip") {
  CHECK(format_hash(0) == "0000000000000000");
  CHECK(format_hash(0xdeadbeefULL) == "00000000deadbeef");
  CHECK(parse_hash("00000000deadbeef") == 0xdeadbeefULL);
  CHECK(parse_hash("1447159037362F17") == 0x1447159037362f17ULL);
  CHECK_FALSE(parse_hash("xyz").has_value());
  CHECK_FALSE(parse_hash("").has_value());
}

TEST_CASE("duplicate token is rejected") {
  CHECK(code_of([] { parse_vocab("#special: eos=</s>\n</s>\na\nb\na\n"); }) == ErrorCode::DuplicateToken);
}

TEST_CASE("specials must exist") {
  CHECK(code_of([] { parse_vocab("a\nb\n"); }) == ErrorCode::MissingSpecial);
  CHECK(code_of([] { parse_vocab("#special: eos=</s>\na\nb\n"); }) == ErrorCode::MissingSpecial);
  CHECK(code_of([] { parse_vocab("#special: foo=a\n#special: eos=a\na\n"); }) == ErrorCode::MissingSpecial);
}

TEST_CASE("missing file surfaces as IoError") {
  CHECK(code_of([] { load_vocab("/nonexistent/vocab.txt"); }) == ErrorCode::IoError);
}

TEST_CASE("tokenize") {
  const Vocabulary v = parse_vocab(kFourTokens);
  CHECK(v.tokenize("a b") == std::vector<TokenId>{2, 3});
  CHECK(v.tokenize("").empty());
  CHECK(v.tokenize("   ").empty());
  CHECK(v.tokenize("  b\ta  ") == std::vector<TokenId>{3, 2});

  SUBCASE("unknown pieces fall back to unk") {
    const Vocabulary u = parse_vocab("#special: eos=</s>\n#special: unk=<unk>\n<s>\n</s>\na\nb\n<unk>\n");
    CHECK(u.tokenize("a z") == std::vector<TokenId>{2, 4});
  }
  SUBCASE("without unk an unknown piece is an error") {
    CHECK(code_of([&] { v.tokenize("a z"); }) == ErrorCode::UnknownToken);
  }
}

TEST_CASE("detokenize skips specials") {
  const Vocabulary v = parse_vocab(kFourTokens);
  const std::vector<TokenId> ids{0, 2, 3, 1};
  CHECK(v.detokenize(ids) == "a b");
  CHECK(v.detokenize(std::vector<TokenId>{}).empty());
}

TEST_CASE("to_file_format round-trips") {
  const Vocabulary v = parse_vocab("#special: eos=</s>\n#special: unk=<unk>\n#special: pad=<pad>\n</s>\nx\n<unk>\n<pad>\n");
  const Vocabulary w = parse_vocab(v.to_file_format());
  CHECK(w.hash() == v.hash());
  CHECK(w.tokens() == v.tokens());
  CHECK(w.pad_id() == 3);
}

TEST_CASE("check_compatible") {
  const Vocabulary v = parse_vocab(kFourTokens);
  CHECK_NOTHROW(check_compatible(v, v));

  SUBCASE("swapped tokens") {
    const Vocabulary swapped = parse_vocab("#special: bos=<s>\n#special: eos=</s>\n<s>\n</s>\nb\na\n");
    CHECK_THROWS_AS(check_compatible(v, swapped), VocabMismatchError);
  }
  SUBCASE("different eos") {
    const Vocabulary other = parse_vocab("#special: bos=<s>\n#special: eos=b\n<s>\n</s>\na\nb\n");
    CHECK_THROWS_AS(check_compatible(v, other), VocabMismatchError);
  }
  SUBCASE("special declared or not") {
    const Vocabulary no_bos = parse_vocab("#special: eos=</s>\n<s>\n</s>\na\nb\n");
    CHECK(no_bos.tokens() == v.tokens());
    CHECK_THROWS_AS(check_compatible(v, no_bos), VocabMismatchError);
  }
  SUBCASE("error carries both hashes") {
    try {
      check_compatible(1, 2);
      FAIL("expected mismatch");
    } catch (const VocabMismatchError& e) {
      CHECK(e.code() == ErrorCode::VocabMismatch);
      CHECK(e.expected_hash() == 1);
      CHECK(e.actual_hash() == 2);
    }
  }
}

TEST_CASE("error code names round-trip") {
  for (auto c : {ErrorCode::DuplicateToken, ErrorCode::VocabMismatch, ErrorCode::ScorerTimeout,
                 ErrorCode::SessionClosed, ErrorCode::DecodeError, ErrorCode::MetricError}) {
    CHECK(error_code_from_string(to_string(c)) == c);
  }
  CHECK(error_code_from_string("NoSuchThing") == ErrorCode::ProtocolError);
}
