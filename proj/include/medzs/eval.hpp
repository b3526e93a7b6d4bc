// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "medzs/encoders.hpp"
#include "medzs/error.hpp"
#include "medzs/knowledge.hpp"
#include "medzs/scoring.hpp"

namespace medzs {

// --- Dataset manifests ------------------------------------------------------

struct ManifestEntry {
  std::string path;  // relative to the manifest's image root
  std::string class_id;
};

/// Labeled image list. `classes` fixes the label set for evaluation.
struct DatasetManifest {
  std::string dataset_id;
  std::vector<std::string> classes;
  std::vector<ManifestEntry> entries;
  std::filesystem::path image_root;

  std::filesystem::path resolve(const ManifestEntry& entry) const;
  /// Order-independent content hash of id, classes and entries.
  std::string content_id() const;
};

/// Raises kSchema (empty, duplicate paths) or kManifestMismatch (label not
/// in the class list).
void validate_manifest(const DatasetManifest& manifest);

/// JSON ({"dataset_id", "classes", "entries": [{"path", "label"}],
/// "image_root"?}) or CSV with a "path,label" header and a sidecar
/// "<stem>.classes.txt" listing one class id per line. Relative image roots
/// resolve against the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
std::string manifest_to_json(const DatasetManifest& manifest);

// --- Embedding caches -------------------------------------------------------

/// Thread-safe memo of text and image embeddings keyed by provider
/// fingerprint. Image entries are keyed by the SHA-256 of the encoded file
/// and can be persisted under `disk_dir`.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::optional<std::filesystem::path> disk_dir = std::nullopt);

  /// Embeddings for `texts` in order; misses are encoded in one batch.
  std::vector<Embedding> texts(const EmbeddingProvider& provider, std::span<const std::string> texts);
  Embedding image(const EmbeddingProvider& provider, std::span<const std::uint8_t> encoded);

  std::size_t text_hits() const noexcept { return text_hits_.load(); }
  std::size_t text_misses() const noexcept { return text_misses_.load(); }
  std::size_t image_hits() const noexcept { return image_hits_.load(); }
  std::size_t image_misses() const noexcept { return image_misses_.load(); }

 private:
  std::optional<Embedding> load_image_from_disk(const std::string& fingerprint, const std::string& digest,
                                                std::size_t dim) const;
  void store_image_on_disk(const std::string& fingerprint, const std::string& digest, const Embedding& e) const;

  std::optional<std::filesystem::path> disk_dir_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, Embedding, std::less<>> text_;
  std::map<std::string, Embedding, std::less<>> image_;
  std::atomic<std::size_t> text_hits_{0};
  std::atomic<std::size_t> text_misses_{0};
  std::atomic<std::size_t> image_hits_{0};
  std::atomic<std::size_t> image_misses_{0};
};

/// Encodes every symptom of `kb` (through the cache) in KB order.
std::vector<ClassEmbeddings> embed_knowledge_base(const KnowledgeBase& kb, const EmbeddingProvider& provider,
                                                  EmbeddingCache& cache);

// --- Evaluation -------------------------------------------------------------

struct EvalConfig {
  AggregationMode mode = AggregationMode::kMean;
  /// Abort on the first unreadable image (default); otherwise record and
  /// exclude it from the denominator.
  bool strict = true;
  int workers = 1;
};

struct EvalItem {
  std::string path;
  std::string truth;
  std::optional<std::string> predicted;
  std::optional<std::string> error;
};

struct EvalResult {
  std::string dataset_id;
  std::string manifest_id;
  std::string kb_id;
  std::string encoder_fingerprint;
  std::string prompt_variant;
  AggregationMode aggregation = AggregationMode::kMean;
  /// Knowledge-base class order; indexes the confusion matrix.
  std::vector<std::string> classes;
  /// confusion[truth][predicted]
  std::vector<std::vector<std::size_t>> confusion;
  /// Ground-truth count per class among scored images.
  std::vector<std::size_t> support;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t failures = 0;
  double accuracy = 0.0;
  std::vector<EvalItem> items;  // manifest order
};

/// Fails with kManifestMismatch when manifest classes are not all in the KB
/// and kConfigMismatch when the KB pins a different encoder fingerprint.
EvalResult evaluate(const DatasetManifest& manifest, const KnowledgeBase& kb, const EmbeddingProvider& provider,
                    const EvalConfig& config, EmbeddingCache& cache);

/// Builds an EvalResult from (truth, prediction) pairs over `classes`.
EvalResult tally(std::span<const std::string> classes, std::span<const EvalItem> items);

// --- Comparison and sweeps --------------------------------------------------

struct GainRow {
  std::string dataset_id;
  double ours = 0.0;      // percent
  double baseline = 0.0;  // percent
  double gain = 0.0;      // ours - baseline, percent

  std::string ours_display() const;
  std::string baseline_display() const;
  std::string gain_display() const;
};

/// Percent with two decimals ("50.76").
std::string format_percent(double percent);
/// Signed two-decimal gain ("+11.73"); zero prints as "+0.00".
std::string format_gain(double gain);

/// Gain from two percentages (full precision).
GainRow gain_row(std::string dataset_id, double ours_percent, double baseline_percent);
/// Requires matching manifests (kManifestMismatch) and encoder fingerprints
/// (kConfigMismatch).
GainRow compare(const EvalResult& ours, const EvalResult& baseline);

struct SweepKb {
  std::string label;
  KnowledgeBase kb;
};

struct SweepEncoder {
  std::string label;
  const EmbeddingProvider* provider = nullptr;
};

struct SweepCell {
  std::string kb_label;
  AggregationMode mode = AggregationMode::kMean;
  std::string encoder_label;
  std::optional<EvalResult> result;
  std::optional<std::string> error;
  std::optional<ErrorCode> error_code;
};

/// Rows are (kb, mode) pairs; columns are encoders. `best` holds the
/// column-wise maximum accuracy over successful cells.
struct SweepResult {
  std::string dataset_id;
  std::vector<std::string> row_labels;
  std::vector<std::string> column_labels;
  std::vector<SweepCell> cells;  // row-major
  std::vector<std::optional<double>> best;

  const SweepCell& at(std::size_t row, std::size_t column) const { return cells.at(row * column_labels.size() + column); }
};

/// Evaluates every (kb, mode, encoder) combination. A failing cell is
/// recorded in place and the remaining cells still run.
SweepResult sweep(const DatasetManifest& manifest, std::span<const SweepKb> kbs,
                  std::span<const SweepEncoder> encoders, std::span<const AggregationMode> modes,
                  const EvalConfig& config, EmbeddingCache& cache);

// --- Rendering --------------------------------------------------------------

std::string eval_result_to_json(const EvalResult& result);
std::string eval_result_to_text(const EvalResult& result);
std::string eval_result_to_csv(const EvalResult& result);

std::string gain_rows_to_json(std::span<const GainRow> rows);
std::string gain_rows_to_text(std::span<const GainRow> rows);
std::string gain_rows_to_csv(std::span<const GainRow> rows);

std::string sweep_to_json(const SweepResult& result);
std::string sweep_to_text(const SweepResult& result);
std::string sweep_to_csv(const SweepResult& result);

/// Left-aligned first column, right-aligned others, two-space gutters.
std::string render_table(std::span<const std::string> headers, std::span<const std::vector<std::string>> rows);

/// RFC 4180 quoting when needed.
std::string csv_escape(std::string_view field);

}  // namespace medzs
