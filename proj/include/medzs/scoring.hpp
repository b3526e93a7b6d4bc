// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace medzs {

/// Fixed-dimension real vector produced by an encoder.
///
/// Construction validates finiteness. `normalized()` is true only for
/// vectors produced by l2_normalize (or explicitly marked after a check
/// that the norm is within 1e-4 of one).
class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(std::vector<double> values, bool normalized = false);

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  bool normalized() const noexcept { return normalized_; }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<double> values_;
  bool normalized_ = false;
};

enum class AggregationMode { kMean, kMax };

std::string_view to_string(AggregationMode mode);
AggregationMode parse_aggregation_mode(std::string_view text);

double dot(const Embedding& a, const Embedding& b);
double l2_norm(const Embedding& v);
Embedding l2_normalize(const Embedding& v);

/// Aggregate of f . g_i over one class's symptom embeddings.
double score(const Embedding& f, std::span<const Embedding> g, AggregationMode mode);

/// One knowledge-base class with its encoded symptoms, in KB order.
struct ClassEmbeddings {
  std::string class_id;
  std::vector<std::string> symptoms;
  std::vector<Embedding> embeddings;
};

struct SymptomScore {
  std::string symptom;
  double score = 0.0;

  friend bool operator==(const SymptomScore&, const SymptomScore&) = default;
};

struct ClassScore {
  std::string class_id;
  std::vector<SymptomScore> symptom_scores;
  double aggregate = 0.0;

  friend bool operator==(const ClassScore&, const ClassScore&) = default;
};

struct ScoreReport {
  std::vector<ClassScore> classes;  // knowledge-base order
  std::size_t predicted_index = 0;
  AggregationMode aggregation = AggregationMode::kMean;

  const std::string& predicted() const { return classes.at(predicted_index).class_id; }

  friend bool operator==(const ScoreReport&, const ScoreReport&) = default;
};

/// Scores `f` against every class and picks the argmax; ties go to the
/// earliest class in `classes`.
ScoreReport classify(const Embedding& f, std::span<const ClassEmbeddings> classes,
                     AggregationMode mode);

/// Batched variant used by the evaluation harness. Produces exactly the same
/// reports as calling classify() per image.
std::vector<ScoreReport> classify_batch(std::span<const Embedding> images,
                                        std::span<const ClassEmbeddings> classes,
                                        AggregationMode mode, bool parallel = true);

}  // namespace medzs
