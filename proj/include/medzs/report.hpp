// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "medzs/scoring.hpp"

namespace medzs {

/// Symptom ranking for one class. Scores are copied from the ScoreReport.
struct ClassEvidence {
  std::string class_id;
  double aggregate = 0.0;
  std::vector<SymptomScore> ranked;  // score descending, ties in KB order

  friend bool operator==(const ClassEvidence&, const ClassEvidence&) = default;
};

/// Per-image explanation: the predicted class, each class's ranked symptom
/// similarities and the evidence for the prediction.
struct CaseReport {
  std::string image_id;
  std::string predicted;
  AggregationMode aggregation = AggregationMode::kMean;
  /// Predicted class first, then by aggregate descending (KB order on ties).
  std::vector<ClassEvidence> classes;
  /// Symptoms of the predicted class, ranked.
  std::vector<SymptomScore> top_evidence;
  /// Free-form run settings (kb id, encoder, prompt variant, ...).
  std::map<std::string, std::string> config;

  friend bool operator==(const CaseReport&, const CaseReport&) = default;
};

CaseReport build_case_report(const ScoreReport& scores, std::string image_id,
                             std::map<std::string, std::string> config = {});

enum class ReportFormat { kJson, kCsv, kText };

std::string_view to_string(ReportFormat format);
/// "json", "csv" or "text"; anything else raises kInvalidArgument.
ReportFormat parse_report_format(std::string_view text);

/// Deterministic rendering. JSON round-trips through report_from_json; CSV
/// has one row per (class, symptom); TEXT draws bars scaled to the largest
/// score in the report.
std::string export_report(const CaseReport& report, ReportFormat format);
std::string export_report(const CaseReport& report, std::string_view format);

CaseReport report_from_json(std::string_view text);

/// Several reports in one document (JSON array, one CSV table, or TEXT
/// blocks separated by blank lines).
std::string export_reports(const std::vector<CaseReport>& reports, ReportFormat format);
std::vector<CaseReport> reports_from_json(std::string_view text);

}  // namespace medzs
