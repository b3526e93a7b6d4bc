// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <json.hpp>
#include <random>

#include "medzs/error.hpp"
#include "medzs/io.hpp"
#include "medzs/knowledge.hpp"
#include "test_support.hpp"

using namespace medzs;
using medzs::testing::data_dir;
using nlohmann::json;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

KnowledgeBase small_kb() {
  KnowledgeBase kb;
  kb.kb_id = "toy";
  kb.dataset_id = "toyset";
  kb.classes.push_back({"a", "Class A", {"round opacity", "sharp margin"}, "designed", "1. round opacity\n2. sharp margin",
                        DescriptorSource::kLlm, "2026-01-01T00:00:00Z"});
  kb.classes.push_back({"b", "Class B", {"diffuse haze"}, "designed", "", DescriptorSource::kManual,
                        "2026-01-01T00:00:00Z"});
  return kb;
}

std::string random_phrase(std::mt19937& rng) {
  static const std::vector<std::string> words{"opacity", "nodule", "Hilar", "ground-glass", "é", "β", "50%", "(left)",
                                              "\"quoted\"", "a\\b", "tab\tin", "消化", "cavity", "line\nbreak"};
  std::uniform_int_distribution<std::size_t> w(0, words.size() - 1);
  std::uniform_int_distribution<int> n(1, 5);
  std::string out;
  for (int i = n(rng); i > 0; --i) out += (out.empty() ? "" : " ") + words[w(rng)];
  return out;
}

}  // namespace

TEST_CASE("phrase extraction from list answers") {
  const auto got = parse_symptoms(
      "Useful features include:\n\n1. Upper lobe infiltrates.\n2) Cavitation\n- Hilar lymphadenopathy\n"
      "* Pleural effusion.\n• Tree-in-bud opacities\n   \n3. ok\n4. Upper lobe infiltrates\n");
  const std::vector<std::string> want{"Upper lobe infiltrates", "Cavitation", "Hilar lymphadenopathy",
                                      "Pleural effusion", "Tree-in-bud opacities"};
  CHECK(got == want);
  CHECK(parse_symptoms("single line answer") == std::vector<std::string>{"single line answer"});
  CHECK(parse_symptoms("- 2.5 cm nodule") == std::vector<std::string>{"2.5 cm nodule"});
  CHECK(code_of([] { parse_symptoms(""); }) == ErrorCode::kParse);
  CHECK(code_of([] { parse_symptoms("Features:\n1. a\n2. b."); }) == ErrorCode::kParse);
}

TEST_CASE("committed knowledge bases match their raw answers") {
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(data_dir() / "kb")) {
    INFO(e.path().string());
    const auto kb = load_kb(e.path());
    for (const auto& c : kb.classes) {
      if (c.source != DescriptorSource::kLlm) continue;
      CHECK(parse_symptoms(c.raw_response) == c.symptoms);
      ++n;
    }
  }
  CHECK(n >= 20);
}

TEST_CASE("fixture answer for normal lungs parses to eight phrases") {
  const auto kb = load_kb(data_dir() / "kb" / "montgomery-designed.json");
  const auto& normal = kb.classes.at(*kb.find("normal"));
  REQUIRE(normal.symptoms.size() == 8);
  CHECK(normal.symptoms.front() == "No visible cavities or consolidations");
  CHECK(normal.symptoms.back() == "Trachea positioned in the midline");
}

TEST_CASE("prompt templates") {
  const auto& designed = builtin_template(PromptVariant::kDesigned);
  const auto& baseline = builtin_template(PromptVariant::kBaseline);
  CHECK(designed.id == "designed");
  CHECK(baseline.id == "baseline");
  CHECK(render_prompt(designed, "Tuberculosis") ==
        "Q: According to published literature, what are useful medical visual features for distinguishing "
        "Tuberculosis in a photo?");
  CHECK(render_prompt(baseline, "Pneumonia") ==
        "Q: What are useful visual features for distinguishing Pneumonia in a photo?");
  // Categories are substituted verbatim, including braces.
  CHECK(render_prompt(baseline, "{x}").find("distinguishing {x} in") != std::string::npos);
  CHECK(code_of([&] { render_prompt(designed, ""); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { PromptTemplate::make("t", "no placeholder", PromptVariant::kDesigned); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(code_of([] {
          PromptTemplate::make("t", "{Diagnostic Category} and {Diagnostic Category}", PromptVariant::kDesigned);
        }) == ErrorCode::kInvalidArgument);
  CHECK(parse_prompt_variant("baseline") == PromptVariant::kBaseline);
  CHECK(to_string(PromptVariant::kDesigned) == "designed");
  CHECK(code_of([] { parse_prompt_variant("fancy"); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("knowledge base JSON round trip") {
  const auto kb = small_kb();
  const auto text = kb_to_json(kb);
  CHECK(kb_from_json(text) == kb);
  CHECK(kb_to_json(kb_from_json(text)) == text);
  CHECK(kb.find("b") == 1u);
  CHECK_FALSE(kb.find("c").has_value());

  medzs::testing::TempDir dir;
  save_kb(kb, dir / "kb.json");
  CHECK(load_kb(dir / "kb.json") == kb);
}

TEST_CASE("randomized knowledge bases survive a round trip") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    KnowledgeBase kb;
    kb.kb_id = "kb-" + std::to_string(trial);
    if (trial % 2 == 0) kb.encoder_fingerprint = std::string(64, 'f');
    const int classes = 1 + trial % 6;
    for (int c = 0; c < classes; ++c) {
      ClassDescriptor d;
      d.class_id = "c" + std::to_string(c);
      d.display_name = random_phrase(rng);
      for (int s = 0; s < 1 + (trial + c) % 7; ++s) d.symptoms.push_back(std::to_string(s) + " " + random_phrase(rng));
      d.prompt_id = "designed";
      d.source = c % 2 == 0 ? DescriptorSource::kLlm : DescriptorSource::kManual;
      d.raw_response = d.source == DescriptorSource::kLlm ? random_phrase(rng) : "";
      d.created_at = "2026-01-01T00:00:00Z";
      kb.classes.push_back(std::move(d));
    }
    CHECK(kb_from_json(kb_to_json(kb)) == kb);
  }
}

TEST_CASE("knowledge base validation") {
  auto violates = [](auto&& mutate) {
    auto kb = small_kb();
    mutate(kb);
    return code_of([&] { validate_kb(kb); });
  };
  CHECK(violates([](KnowledgeBase& kb) { kb.kb_id.clear(); }) == ErrorCode::kSchema);
  CHECK(violates([](KnowledgeBase& kb) { kb.classes.clear(); }) == ErrorCode::kSchema);
  CHECK(violates([](KnowledgeBase& kb) { kb.classes[1].class_id = "a"; }) == ErrorCode::kSchema);
  CHECK(violates([](KnowledgeBase& kb) { kb.classes[0].symptoms.clear(); }) == ErrorCode::kSchema);
  CHECK(violates([](KnowledgeBase& kb) { kb.classes[0].symptoms.push_back("   "); }) == ErrorCode::kSchema);
  CHECK(violates([](KnowledgeBase& kb) { kb.classes[0].symptoms.push_back("round opacity"); }) == ErrorCode::kSchema);
  CHECK(violates([](KnowledgeBase& kb) { kb.classes[0].raw_response.clear(); }) == ErrorCode::kSchema);
  CHECK(violates([](KnowledgeBase& kb) { kb.classes[0].display_name.clear(); }) == ErrorCode::kSchema);
  CHECK(violates([](KnowledgeBase& kb) { kb.classes[0].created_at.clear(); }) == ErrorCode::kSchema);
  CHECK_NOTHROW(validate_kb(small_kb()));
}

TEST_CASE("knowledge base parse errors") {
  const auto base = json::parse(kb_to_json(small_kb()));
  auto code = [](const json& j) { return code_of([&] { kb_from_json(j.dump()); }); };
  CHECK(code_of([] { kb_from_json("{oops"); }) == ErrorCode::kParse);
  auto newer = base;
  newer["schema_version"] = 2;
  CHECK(code(newer) == ErrorCode::kVersion);
  auto extra = base;
  extra["classes"][0]["weights"] = json::array({1, 2});
  CHECK(code(extra) == ErrorCode::kVersion);
  auto missing = base;
  missing["classes"][0].erase("symptoms");
  CHECK(code(missing) == ErrorCode::kSchema);
  auto bad_source = base;
  bad_source["classes"][0]["source"] = "ORACLE";
  CHECK(code(bad_source) == ErrorCode::kSchema);
  auto no_version = base;
  no_version.erase("schema_version");
  CHECK(code(no_version) == ErrorCode::kSchema);
  CHECK(code(json::array()) == ErrorCode::kSchema);
  CHECK(code_of([] { load_kb("/nonexistent/kb.json"); }) == ErrorCode::kIo);
}

TEST_CASE("category lists") {
  CHECK(slugify("Normal lungs") == "normal_lungs");
  CHECK(slugify("  Mild  (NPDR) ") == "mild_npdr");
  CHECK(code_of([] { slugify("!!"); }) == ErrorCode::kInvalidArgument);

  medzs::testing::TempDir dir;
  write_file_atomic(dir / "cats.txt", std::string_view("# comment\n\nNormal lungs\ntb\tTuberculosis\n"));
  const auto txt = load_categories(dir / "cats.txt");
  REQUIRE(txt.categories.size() == 2);
  CHECK(txt.categories[0].class_id == "normal_lungs");
  CHECK(txt.categories[1].class_id == "tb");
  CHECK(txt.categories[1].display_name == "Tuberculosis");
  CHECK_FALSE(txt.dataset_id.has_value());

  const auto preset = load_categories(data_dir() / "presets" / "montgomery.json");
  CHECK(preset.dataset_id == "montgomery");
  REQUIRE(preset.categories.size() == 2);
  CHECK(preset.categories[1].display_name == "Tuberculosis");

  write_file_atomic(dir / "empty.txt", std::string_view("# nothing\n"));
  CHECK(code_of([&] { load_categories(dir / "empty.txt"); }) == ErrorCode::kEmptyInput);
  write_file_atomic(dir / "bad.json", std::string_view("{\"classes\": 3}"));
  CHECK(code_of([&] { load_categories(dir / "bad.json"); }) == ErrorCode::kSchema);
}

TEST_CASE("building from the committed answer cache") {
  ResponseCache cache(data_dir() / "cache" / "llm");
  LlmContext ctx;
  ctx.cache = &cache;
  const auto cats = load_categories(data_dir() / "presets" / "idrid.json");
  BuildOptions opts;
  opts.kb_id = "idrid-test";
  opts.dataset_id = cats.dataset_id;
  opts.workers = 3;
  const auto kb = build_kb(cats.categories, builtin_template(PromptVariant::kDesigned), ctx, opts);
  REQUIRE(kb.classes.size() == cats.categories.size());
  for (std::size_t i = 0; i < kb.classes.size(); ++i) {
    CHECK(kb.classes[i].class_id == cats.categories[i].class_id);
    CHECK(kb.classes[i].source == DescriptorSource::kLlm);
    CHECK(kb.classes[i].prompt_id == "designed");
    CHECK(kb.classes[i].symptoms == parse_symptoms(kb.classes[i].raw_response));
  }
  opts.workers = 1;
  CHECK(build_kb(cats.categories, builtin_template(PromptVariant::kDesigned), ctx, opts) == kb);
  CHECK(kb == [&] {
    auto committed = load_kb(data_dir() / "kb" / "idrid-designed.json");
    committed.kb_id = "idrid-test";
    return committed;
  }());
}

TEST_CASE("a cold cache without an endpoint fails and names the class") {
  medzs::testing::TempDir dir;
  ResponseCache cache(dir.path());
  LlmContext ctx;
  ctx.cache = &cache;
  const std::vector<CategorySpec> cats{{"normal", "Normal lungs"}, {"tb", "Tuberculosis"}};
  const auto msg = message_of([&] { build_kb(cats, builtin_template(PromptVariant::kDesigned), ctx, {}); });
  CHECK(msg.find("Normal lungs") != std::string::npos);
  CHECK(code_of([&] { build_kb(cats, builtin_template(PromptVariant::kDesigned), ctx, {}); }) ==
        ErrorCode::kTransport);
  CHECK(code_of([&] { build_kb({}, builtin_template(PromptVariant::kDesigned), ctx, {}); }) == ErrorCode::kEmptyInput);
  const std::vector<CategorySpec> dup{{"a", "Same"}, {"b", "Same"}};
  CHECK(code_of([&] { build_kb(dup, builtin_template(PromptVariant::kDesigned), ctx, {}); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("category-name knowledge base") {
  const auto source = load_kb(data_dir() / "kb" / "montgomery-designed.json");
  const auto base = make_baseline_kb(source);
  REQUIRE(base.classes.size() == source.classes.size());
  for (std::size_t i = 0; i < base.classes.size(); ++i) {
    CHECK(base.classes[i].class_id == source.classes[i].class_id);
    CHECK(base.classes[i].symptoms == std::vector<std::string>{source.classes[i].display_name});
    CHECK(base.classes[i].source == DescriptorSource::kManual);
  }
  CHECK(base.dataset_id == source.dataset_id);
  CHECK(kb_from_json(kb_to_json(base)) == base);
}
