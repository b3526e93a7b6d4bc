// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <json.hpp>
#include <random>

#include "medzs/error.hpp"
#include "medzs/report.hpp"
#include "test_support.hpp"

using namespace medzs;
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

ScoreReport hand_report() {
  ScoreReport r;
  r.classes.push_back({"normal", {{"clear fields", 0.20}, {"sharp angles", 0.22}}, 0.21});
  r.classes.push_back({"tb", {{"a", 0.31}, {"b", 0.28}, {"c", 0.35}}, 0.31333333333333335});
  r.classes.push_back({"other", {{"x", 0.25}}, 0.25});
  r.predicted_index = 1;
  return r;
}

std::vector<std::string> symptom_names(const std::vector<SymptomScore>& v) {
  std::vector<std::string> out;
  for (const auto& s : v) out.push_back(s.symptom);
  return out;
}

ScoreReport random_report(std::mt19937_64& rng) {
  const std::size_t d = 16;
  std::vector<ClassEmbeddings> classes;
  std::uniform_int_distribution<int> m(1, 6);
  for (int c = 0; c < 4; ++c) {
    ClassEmbeddings ce;
    ce.class_id = "class_" + std::to_string(c);
    for (int i = m(rng); i > 0; --i) {
      ce.symptoms.push_back("symptom " + std::to_string(c) + "." + std::to_string(i));
      ce.embeddings.push_back(medzs::testing::random_unit(rng, d));
    }
    classes.push_back(std::move(ce));
  }
  return classify(medzs::testing::random_unit(rng, d), classes, AggregationMode::kMean);
}

}  // namespace

TEST_CASE("evidence is ranked by score") {
  const auto rep = build_case_report(hand_report(), "img.png", {{"kb", "toy"}});
  CHECK(rep.predicted == "tb");
  CHECK(symptom_names(rep.top_evidence) == std::vector<std::string>{"c", "a", "b"});
  REQUIRE(rep.classes.size() == 3);
  CHECK(rep.classes[0].class_id == "tb");
  CHECK(rep.classes[1].class_id == "other");
  CHECK(rep.classes[2].class_id == "normal");
  CHECK(symptom_names(rep.classes[2].ranked) == std::vector<std::string>{"sharp angles", "clear fields"});
  CHECK(rep.config.at("kb") == "toy");
}

TEST_CASE("ties keep knowledge-base order") {
  ScoreReport r;
  r.classes.push_back({"first", {{"p", 0.5}, {"q", 0.5}, {"r", 0.6}}, 0.5});
  r.classes.push_back({"second", {{"s", 0.1}}, 0.5});
  r.classes.push_back({"third", {{"t", 0.1}}, 0.5});
  r.predicted_index = 0;
  const auto rep = build_case_report(r, "i");
  CHECK(symptom_names(rep.top_evidence) == std::vector<std::string>{"r", "p", "q"});
  CHECK(rep.classes[1].class_id == "second");
  CHECK(rep.classes[2].class_id == "third");
}

TEST_CASE("single class and single symptom") {
  ScoreReport r;
  r.classes.push_back({"only", {{"lonely", -0.1}}, -0.1});
  const auto rep = build_case_report(r, "i");
  CHECK(rep.predicted == "only");
  CHECK(rep.top_evidence.size() == 1);
  for (auto f : {ReportFormat::kJson, ReportFormat::kCsv, ReportFormat::kText}) CHECK_FALSE(export_report(rep, f).empty());
  CHECK(code_of([] { build_case_report(ScoreReport{}, "i"); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("JSON round trip preserves scores exactly") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto scores = random_report(rng);
    const auto rep = build_case_report(scores, "case-" + std::to_string(trial), {{"encoder", "e07317e481f7"}});
    const auto text = export_report(rep, ReportFormat::kJson);
    const auto back = report_from_json(text);
    CHECK(back == rep);
    CHECK(export_report(back, ReportFormat::kJson) == text);
    // Scores match the ScoreReport bit for bit.
    for (const auto& c : back.classes) {
      const auto& src = *std::find_if(scores.classes.begin(), scores.classes.end(),
                                      [&](const ClassScore& s) { return s.class_id == c.class_id; });
      CHECK(c.aggregate == src.aggregate);
      for (const auto& s : c.ranked) {
        const auto it = std::find_if(src.symptom_scores.begin(), src.symptom_scores.end(),
                                     [&](const SymptomScore& x) { return x.symptom == s.symptom; });
        REQUIRE(it != src.symptom_scores.end());
        CHECK(it->score == s.score);
      }
    }
  }
}

TEST_CASE("CSV has one row per class and symptom") {
  std::mt19937_64 rng(22);
  const auto scores = random_report(rng);
  const auto rep = build_case_report(scores, "x.png");
  const auto csv = export_report(rep, ReportFormat::kCsv);
  std::size_t symptoms = 0;
  for (const auto& c : scores.classes) symptoms += c.symptom_scores.size();
  CHECK(csv.starts_with("image_id,class,symptom,score,predicted\n"));
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == symptoms + 1);
  CHECK(csv.find("," + rep.predicted + "\n") != std::string::npos);

  const auto both = export_reports({rep, rep}, ReportFormat::kCsv);
  CHECK(static_cast<std::size_t>(std::count(both.begin(), both.end(), '\n')) == 2 * symptoms + 1);
}

TEST_CASE("text puts the predicted class first") {
  const auto rep = build_case_report(hand_report(), "img.png", {{"kb", "toy"}});
  const auto text = export_report(rep, "text");
  const auto tb = text.find("\ntb  score 0.31  <- predicted");
  const auto other = text.find("\nother  score 0.25");
  const auto normal = text.find("\nnormal  score 0.21");
  REQUIRE(tb != std::string::npos);
  REQUIRE(other != std::string::npos);
  REQUIRE(normal != std::string::npos);
  CHECK(tb < other);
  CHECK(other < normal);
  CHECK(text.find("img.png") != std::string::npos);
  CHECK(text.find("0.35  c") != std::string::npos);
}

TEST_CASE("rendering is deterministic") {
  std::mt19937_64 rng(23);
  const auto rep = build_case_report(random_report(rng), "d");
  for (auto f : {ReportFormat::kJson, ReportFormat::kCsv, ReportFormat::kText}) {
    CHECK(export_report(rep, f) == export_report(rep, f));
    CHECK(export_report(rep, to_string(f)) == export_report(rep, f));
  }
}

TEST_CASE("formats and parse errors") {
  CHECK(parse_report_format("json") == ReportFormat::kJson);
  CHECK(parse_report_format("csv") == ReportFormat::kCsv);
  CHECK(parse_report_format("text") == ReportFormat::kText);
  CHECK(code_of([] { parse_report_format("xml"); }) == ErrorCode::kInvalidArgument);
  const auto rep = build_case_report(hand_report(), "i");
  CHECK(code_of([&] { export_report(rep, "yaml"); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { report_from_json("{"); }) == ErrorCode::kParse);
  CHECK(code_of([] { report_from_json("{\"image_id\": 3}"); }) == ErrorCode::kSchema);

  const auto many = export_reports({rep, rep}, ReportFormat::kJson);
  CHECK(json::parse(many).size() == 2);
  CHECK(reports_from_json(many) == std::vector<CaseReport>{rep, rep});
  CHECK(reports_from_json(export_report(rep, ReportFormat::kJson)) == std::vector<CaseReport>{rep});
}
