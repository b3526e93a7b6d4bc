// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#include "medzs/scoring.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "medzs/error.hpp"
#include "medzs/kernels.hpp"

namespace medzs {

Embedding::Embedding(std::vector<double> values, bool normalized)
    : values_(std::move(values)), normalized_(normalized) {
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "embedding has a non-finite entry");
  }
  if (normalized_) {
    double sq = 0.0;
    for (double v : values_) sq += v * v;
    if (std::abs(std::sqrt(sq) - 1.0) >= 1e-4) {
      throw Error(ErrorCode::kNormalization,
                  fmt::format("embedding marked normalized has norm {}", std::sqrt(sq)));
    }
  }
}

std::string_view to_string(AggregationMode mode) {
  return mode == AggregationMode::kMean ? "mean" : "max";
}

AggregationMode parse_aggregation_mode(std::string_view text) {
  if (text == "mean" || text == "MEAN") return AggregationMode::kMean;
  if (text == "max" || text == "MAX") return AggregationMode::kMax;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown aggregation mode '{}'", text));
}

double dot(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimension,
                fmt::format("dimension mismatch: {} vs {}", a.size(), b.size()));
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

double l2_norm(const Embedding& v) {
  double sq = 0.0;
  for (double x : v.values()) sq += x * x;
  return std::sqrt(sq);
}

Embedding l2_normalize(const Embedding& v) {
  const double norm = l2_norm(v);
  if (!(norm > 0.0)) throw Error(ErrorCode::kNormalization, "cannot normalize a zero vector");
  std::vector<double> out(v.values().begin(), v.values().end());
  for (double& x : out) x /= norm;
  return Embedding(std::move(out), true);
}

namespace {

double aggregate(std::span<const double> scores, AggregationMode mode) {
  if (mode == AggregationMode::kMax) return *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

void check_classes(std::span<const ClassEmbeddings> classes, std::size_t dim) {
  if (classes.empty()) throw Error(ErrorCode::kEmptyInput, "no classes to score against");
  for (const auto& c : classes) {
    if (c.embeddings.empty()) {
      throw Error(ErrorCode::kEmptyDescriptor,
                  fmt::format("class '{}' has no symptom embeddings", c.class_id));
    }
    if (c.symptoms.size() != c.embeddings.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("class '{}' has {} symptoms but {} embeddings", c.class_id,
                              c.symptoms.size(), c.embeddings.size()));
    }
    for (const auto& g : c.embeddings) {
      if (g.size() != dim) {
        throw Error(ErrorCode::kDimension,
                    fmt::format("class '{}': embedding dimension {} does not match {}",
                                c.class_id, g.size(), dim));
      }
    }
  }
}

std::size_t argmax_first(const std::vector<ClassScore>& classes) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < classes.size(); ++c) {
    if (classes[c].aggregate > classes[best].aggregate) best = c;
  }
  return best;
}

}  // namespace

double score(const Embedding& f, std::span<const Embedding> g, AggregationMode mode) {
  if (g.empty()) throw Error(ErrorCode::kEmptyDescriptor, "empty symptom embedding list");
  std::vector<double> scores;
  scores.reserve(g.size());
  for (const auto& gi : g) scores.push_back(dot(f, gi));
  return aggregate(scores, mode);
}

ScoreReport classify(const Embedding& f, std::span<const ClassEmbeddings> classes,
                     AggregationMode mode) {
  check_classes(classes, f.size());
  ScoreReport report;
  report.aggregation = mode;
  report.classes.reserve(classes.size());
  for (const auto& c : classes) {
    ClassScore cs;
    cs.class_id = c.class_id;
    std::vector<double> scores;
    scores.reserve(c.embeddings.size());
    for (std::size_t i = 0; i < c.embeddings.size(); ++i) {
      const double s = dot(f, c.embeddings[i]);
      scores.push_back(s);
      cs.symptom_scores.push_back({c.symptoms[i], s});
    }
    cs.aggregate = aggregate(scores, mode);
    report.classes.push_back(std::move(cs));
  }
  report.predicted_index = argmax_first(report.classes);
  return report;
}

std::vector<ScoreReport> classify_batch(std::span<const Embedding> images,
                                        std::span<const ClassEmbeddings> classes,
                                        AggregationMode mode, bool parallel) {
  if (images.empty()) return {};
  const std::size_t dim = images.front().size();
  check_classes(classes, dim);

  std::vector<double> x;
  x.reserve(images.size() * dim);
  for (const auto& f : images) {
    if (f.size() != dim) {
      throw Error(ErrorCode::kDimension, "image embeddings in a batch differ in dimension");
    }
    x.insert(x.end(), f.values().begin(), f.values().end());
  }
  std::vector<double> y;
  std::size_t total = 0;
  for (const auto& c : classes) {
    for (const auto& g : c.embeddings) y.insert(y.end(), g.values().begin(), g.values().end());
    total += c.embeddings.size();
  }

  const auto rows = static_cast<std::int64_t>(images.size());
  const auto cols = static_cast<std::int64_t>(total);
  std::vector<double> sims(images.size() * total);
  kernels::similarity_matrix(parallel ? kernels::Exec::kParallel : kernels::Exec::kSerial, rows,
                             cols, static_cast<std::int64_t>(dim), x, y, sims);

  std::vector<ScoreReport> reports(images.size());
  for (std::size_t r = 0; r < images.size(); ++r) {
    ScoreReport& report = reports[r];
    report.aggregation = mode;
    std::size_t col = 0;
    for (const auto& c : classes) {
      ClassScore cs;
      cs.class_id = c.class_id;
      std::vector<double> scores(sims.begin() + static_cast<std::ptrdiff_t>(r * total + col),
                                 sims.begin() + static_cast<std::ptrdiff_t>(r * total + col + c.embeddings.size()));
      for (std::size_t i = 0; i < scores.size(); ++i) cs.symptom_scores.push_back({c.symptoms[i], scores[i]});
      cs.aggregate = aggregate(scores, mode);
      col += c.embeddings.size();
      report.classes.push_back(std::move(cs));
    }
    report.predicted_index = argmax_first(report.classes);
  }
  return reports;
}

}  // namespace medzs
