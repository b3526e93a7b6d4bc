// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <json.hpp>

#include "medzs/error.hpp"
#include "medzs/io.hpp"
#include "medzs/tokenizer.hpp"
#include "test_support.hpp"

using namespace medzs;
using medzs::testing::bundle_dir;
using medzs::testing::fixture_dir;

namespace {

const BpeTokenizer& tok() {
  static const BpeTokenizer t = BpeTokenizer::from_file(bundle_dir() / "bpe_merges.txt");
  return t;
}

}  // namespace

TEST_CASE("reference strings tokenize to the exported ids") {
  const auto golden = nlohmann::json::parse(read_text_file(fixture_dir() / "golden" / "golden.json"));
  REQUIRE(golden["strings"].size() >= 3);
  for (const auto& s : golden["strings"]) {
    const auto want = s["ids"].get<std::vector<std::int64_t>>();
    INFO(s["text"].get<std::string>());
    CHECK(tok().tokenize(s["text"].get<std::string>()).ids == want);
  }
}

TEST_CASE("randomized corpus matches the reference tokenizer") {
  const auto cases = nlohmann::json::parse(read_text_file(fixture_dir() / "golden" / "tokenizer_cases.json"));
  REQUIRE(cases.size() >= 500);
  std::size_t mismatches = 0;
  for (const auto& c : cases) {
    if (tok().tokenize(c["text"].get<std::string>()).ids != c["ids"].get<std::vector<std::int64_t>>()) {
      ++mismatches;
      INFO(c["text"].get<std::string>());
      CHECK(false);
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("sequence layout") {
  const auto& t = tok();
  CHECK(t.context_length() == 77);
  CHECK(t.vocab_size() == 3238);
  CHECK(t.sot_id() == 3236);
  CHECK(t.eot_id() == 3237);

  const auto empty = t.tokenize("");
  REQUIRE(empty.ids.size() == 77);
  CHECK(empty.ids[0] == t.sot_id());
  CHECK(empty.ids[1] == t.eot_id());
  for (std::size_t i = 2; i < 77; ++i) CHECK(empty.ids[i] == t.pad_id());

  std::string long_text;
  for (int i = 0; i < 200; ++i) long_text += "pneumonia ";
  const auto truncated = t.tokenize(long_text);
  REQUIRE(truncated.ids.size() == 77);
  CHECK(truncated.ids.front() == t.sot_id());
  CHECK(truncated.ids.back() == t.eot_id());
}

TEST_CASE("text cleaning") {
  CHECK(html_unescape("&amp;lt;") == "&lt;");
  CHECK(clean_text("&amp;lt;") == "<");
  CHECK(html_unescape("caf&eacute;") == "caf\xC3\xA9");
  CHECK(html_unescape("&#65;&#x42;") == "AB");
  CHECK(html_unescape("&copy") == "\xC2\xA9");
  CHECK(html_unescape("&nosuch;") == "&nosuch;");
  CHECK(clean_text("  Multiple   spaces,\tand\nlines  ") == "multiple spaces, and lines");
}

TEST_CASE("pre-tokenization") {
  const auto parts = pre_tokenize("it's 42 x-ray!!");
  const std::vector<std::string> want{"it", "'s", "4", "2", "x", "-", "ray", "!!"};
  CHECK(parts == want);
  CHECK(pre_tokenize("<|startoftext|>hi") == std::vector<std::string>{"<|startoftext|>", "hi"});
}

TEST_CASE("encoding is deterministic and case-insensitive") {
  CHECK(tok().encode("Pleural Effusion") == tok().encode("pleural effusion"));
  CHECK(tok().encode("tree-in-bud") == tok().encode("tree-in-bud"));
  CHECK_FALSE(tok().encode("xylophone").empty());
}

TEST_CASE("malformed merges files are rejected") {
  medzs::testing::TempDir dir;
  write_file_atomic(dir / "bad.txt", std::string_view("#version: 0.2\na b\nonlyonefield\n"));
  CHECK_THROWS_AS(BpeTokenizer::from_file(dir / "bad.txt"), Error);
  CHECK_THROWS_AS(BpeTokenizer::from_file(dir / "missing.txt"), Error);
}
