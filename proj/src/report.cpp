// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#include "medzs/report.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "medzs/error.hpp"
#include "medzs/eval.hpp"

namespace medzs {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kBarCells = 24;

std::vector<SymptomScore> ranked(const std::vector<SymptomScore>& scores) {
  std::vector<SymptomScore> out = scores;
  std::stable_sort(out.begin(), out.end(),
                   [](const SymptomScore& a, const SymptomScore& b) { return a.score > b.score; });
  return out;
}

ordered_json symptoms_json(const std::vector<SymptomScore>& list) {
  ordered_json arr = ordered_json::array();
  for (const auto& s : list) arr.push_back({{"symptom", s.symptom}, {"score", s.score}});
  return arr;
}

ordered_json report_json(const CaseReport& r) {
  ordered_json doc;
  doc["image_id"] = r.image_id;
  doc["predicted"] = r.predicted;
  doc["aggregation"] = std::string(to_string(r.aggregation));
  ordered_json classes = ordered_json::array();
  for (const auto& c : r.classes) {
    ordered_json j;
    j["class_id"] = c.class_id;
    j["aggregate"] = c.aggregate;
    j["symptoms"] = symptoms_json(c.ranked);
    classes.push_back(std::move(j));
  }
  doc["classes"] = std::move(classes);
  doc["top_evidence"] = symptoms_json(r.top_evidence);
  doc["config"] = r.config;
  return doc;
}

[[noreturn]] void schema_error(std::string_view what) {
  throw Error(ErrorCode::kSchema, fmt::format("case report: {}", what));
}

const nlohmann::json& field(const nlohmann::json& obj, const char* name) {
  if (!obj.is_object() || !obj.contains(name)) schema_error(fmt::format("missing '{}'", name));
  return obj.at(name);
}

std::string string_field(const nlohmann::json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_string()) schema_error(fmt::format("'{}' must be a string", name));
  return v.get<std::string>();
}

double number_field(const nlohmann::json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_number()) schema_error(fmt::format("'{}' must be a number", name));
  return v.get<double>();
}

std::vector<SymptomScore> symptoms_from(const nlohmann::json& arr) {
  if (!arr.is_array()) schema_error("symptom list must be an array");
  std::vector<SymptomScore> out;
  for (const auto& s : arr) out.push_back({string_field(s, "symptom"), number_field(s, "score")});
  return out;
}

CaseReport report_from(const nlohmann::json& doc) {
  CaseReport r;
  r.image_id = string_field(doc, "image_id");
  r.predicted = string_field(doc, "predicted");
  r.aggregation = parse_aggregation_mode(string_field(doc, "aggregation"));
  const auto& classes = field(doc, "classes");
  if (!classes.is_array()) schema_error("'classes' must be an array");
  for (const auto& c : classes) {
    r.classes.push_back({string_field(c, "class_id"), number_field(c, "aggregate"), symptoms_from(field(c, "symptoms"))});
  }
  r.top_evidence = symptoms_from(field(doc, "top_evidence"));
  const auto& cfg = field(doc, "config");
  if (!cfg.is_object()) schema_error("'config' must be an object");
  for (const auto& [k, v] : cfg.items()) {
    if (!v.is_string()) schema_error("config values must be strings");
    r.config[k] = v.get<std::string>();
  }
  return r;
}

nlohmann::json parse_json(std::string_view text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("case report: {}", e.what()));
  }
}

// Horizontal bar of kBarCells cells with eighth-block resolution.
std::string bar(double score, double max_score) {
  static constexpr const char* kPartial[] = {"", "▏", "▎", "▍", "▌", "▋", "▊", "▉"};
  int eighths = 0;
  if (max_score > 0.0 && score > 0.0) {
    eighths = static_cast<int>(std::lround(score / max_score * kBarCells * 8));
    eighths = std::clamp(eighths, 0, kBarCells * 8);
  }
  std::string out;
  int cells = 0;
  for (; cells < eighths / 8; ++cells) out += "█";
  if (eighths % 8 != 0) {
    out += kPartial[eighths % 8];
    ++cells;
  }
  out.append(static_cast<std::size_t>(kBarCells - cells), ' ');
  return out;
}

std::string text_block(const CaseReport& r) {
  double max_score = 0.0;
  for (const auto& c : r.classes) {
    for (const auto& s : c.ranked) max_score = std::max(max_score, s.score);
  }
  std::string out;
  out += fmt::format("image       {}\n", r.image_id);
  out += fmt::format("predicted   {} ({})\n", r.predicted, to_string(r.aggregation));
  for (const auto& [k, v] : r.config) out += fmt::format("{:<11} {}\n", k, v);
  for (const auto& c : r.classes) {
    out += fmt::format("\n{}  score {:.2f}{}\n", c.class_id, c.aggregate, c.class_id == r.predicted ? "  <- predicted" : "");
    for (const auto& s : c.ranked) out += fmt::format("  {} {:>5.2f}  {}\n", bar(s.score, max_score), s.score, s.symptom);
  }
  return out;
}

void csv_rows(const CaseReport& r, std::string& out) {
  for (const auto& c : r.classes) {
    for (const auto& s : c.ranked) {
      out += fmt::format("{},{},{},{},{}\n", csv_escape(r.image_id), csv_escape(c.class_id), csv_escape(s.symptom),
                         s.score, csv_escape(r.predicted));
    }
  }
}

constexpr std::string_view kCsvHeader = "image_id,class,symptom,score,predicted\n";

}  // namespace

CaseReport build_case_report(const ScoreReport& scores, std::string image_id,
                             std::map<std::string, std::string> config) {
  if (scores.classes.empty() || scores.predicted_index >= scores.classes.size()) {
    throw Error(ErrorCode::kInvalidArgument, "score report has no predicted class");
  }
  CaseReport r;
  r.image_id = std::move(image_id);
  r.predicted = scores.predicted();
  r.aggregation = scores.aggregation;
  r.config = std::move(config);

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < scores.classes.size(); ++i) {
    if (i != scores.predicted_index) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores.classes[a].aggregate > scores.classes[b].aggregate;
  });
  order.insert(order.begin(), scores.predicted_index);
  for (const auto i : order) {
    const auto& c = scores.classes[i];
    r.classes.push_back({c.class_id, c.aggregate, ranked(c.symptom_scores)});
  }
  r.top_evidence = r.classes.front().ranked;
  return r;
}

std::string_view to_string(ReportFormat format) {
  switch (format) {
    case ReportFormat::kJson: return "json";
    case ReportFormat::kCsv: return "csv";
    case ReportFormat::kText: return "text";
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown report format");
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "json") return ReportFormat::kJson;
  if (text == "csv") return ReportFormat::kCsv;
  if (text == "text") return ReportFormat::kText;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown report format '{}' (expected json, csv or text)", text));
}

std::string export_report(const CaseReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::kJson: return report_json(report).dump(2) + "\n";
    case ReportFormat::kCsv: {
      std::string out(kCsvHeader);
      csv_rows(report, out);
      return out;
    }
    case ReportFormat::kText: return text_block(report);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown report format");
}

std::string export_report(const CaseReport& report, std::string_view format) {
  return export_report(report, parse_report_format(format));
}

CaseReport report_from_json(std::string_view text) { return report_from(parse_json(text)); }

std::string export_reports(const std::vector<CaseReport>& reports, ReportFormat format) {
  switch (format) {
    case ReportFormat::kJson: {
      ordered_json arr = ordered_json::array();
      for (const auto& r : reports) arr.push_back(report_json(r));
      return arr.dump(2) + "\n";
    }
    case ReportFormat::kCsv: {
      std::string out(kCsvHeader);
      for (const auto& r : reports) csv_rows(r, out);
      return out;
    }
    case ReportFormat::kText: {
      std::string out;
      for (std::size_t i = 0; i < reports.size(); ++i) {
        if (i > 0) out += "\n";
        out += text_block(reports[i]);
      }
      return out;
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown report format");
}

std::vector<CaseReport> reports_from_json(std::string_view text) {
  const auto doc = parse_json(text);
  std::vector<CaseReport> out;
  if (doc.is_array()) {
    for (const auto& r : doc) out.push_back(report_from(r));
  } else {
    out.push_back(report_from(doc));
  }
  return out;
}

}  // namespace medzs
