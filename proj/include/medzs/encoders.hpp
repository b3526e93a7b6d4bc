// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "medzs/image.hpp"
#include "medzs/runtime.hpp"
#include "medzs/scoring.hpp"
#include "medzs/tokenizer.hpp"

namespace medzs {

/// One serialized encoder graph referenced by a bundle manifest.
struct GraphAsset {
  std::string file;
  std::string input;
  std::string output;
  std::string sha256;
};

/// Parsed `manifest.json` of an encoder bundle.
struct BundleManifest {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  std::string name;
  std::string description;
  std::size_t embedding_dim = 0;
  GraphAsset visual;
  GraphAsset text;
  std::string merges_file;
  std::string merges_sha256;
  int context_length = 77;
  std::int64_t pad_id = 0;
  PreprocessConfig preprocess;

  /// Validates structure and values; raises kSchema / kVersion / kParse.
  static BundleManifest parse(std::string_view json_text);
};

/// Visual and text towers plus tokenizer and preprocessing constants.
/// Immutable after load; every method is safe to call concurrently.
class EncoderBundle {
 public:
  /// `location` is either the bundle directory or its manifest file. Each
  /// asset's SHA-256 is checked against the manifest (kIntegrity on mismatch).
  static std::shared_ptr<const EncoderBundle> load(const std::filesystem::path& location,
                                                   const runtime::Backend& backend);
  static std::shared_ptr<const EncoderBundle> load(const std::filesystem::path& location);

  const BundleManifest& manifest() const noexcept { return manifest_; }
  const std::filesystem::path& directory() const noexcept { return dir_; }
  /// Content hash over asset digests and constants; stable across loads.
  const std::string& fingerprint() const noexcept { return fingerprint_; }
  std::size_t dimension() const noexcept { return manifest_.embedding_dim; }
  const BpeTokenizer& tokenizer() const noexcept { return *tokenizer_; }

  ImageTensor preprocess(std::span<const std::uint8_t> encoded) const;
  TokenSequence tokenize(std::string_view text) const { return tokenizer_->tokenize(text); }

  /// Unit-norm image embedding.
  Embedding encode_image(const ImageTensor& image) const;
  std::vector<Embedding> encode_images(std::span<const ImageTensor> images) const;

  /// Unit-norm text embeddings in input order. Empty input raises kEmptyInput.
  std::vector<Embedding> encode_texts(std::span<const std::string> texts) const;

 private:
  EncoderBundle() = default;

  std::vector<Embedding> run_tower(const runtime::GraphSession& session, const GraphAsset& asset,
                                   runtime::Tensor input) const;

  BundleManifest manifest_;
  std::filesystem::path dir_;
  std::string fingerprint_;
  std::unique_ptr<BpeTokenizer> tokenizer_;
  std::unique_ptr<runtime::GraphSession> visual_;
  std::unique_ptr<runtime::GraphSession> text_;
};

/// What the evaluation and CLI layers need from an encoder: unit-norm
/// embeddings for raw image bytes and for strings, plus an identity.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual const std::string& fingerprint() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual Embedding embed_image(std::span<const std::uint8_t> encoded) const = 0;
  virtual std::vector<Embedding> embed_texts(std::span<const std::string> texts) const = 0;
};

/// EmbeddingProvider over an EncoderBundle. An optional wrapper template
/// containing "{}" (e.g. "a photo of {}.") is applied to every text before
/// encoding; it is folded into the fingerprint.
class BundleEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit BundleEmbeddingProvider(std::shared_ptr<const EncoderBundle> bundle,
                                   std::optional<std::string> text_template = std::nullopt);

  const std::string& fingerprint() const override { return fingerprint_; }
  std::size_t dimension() const override { return bundle_->dimension(); }
  Embedding embed_image(std::span<const std::uint8_t> encoded) const override;
  std::vector<Embedding> embed_texts(std::span<const std::string> texts) const override;

  const EncoderBundle& bundle() const noexcept { return *bundle_; }
  const std::optional<std::string>& text_template() const noexcept { return template_; }

 private:
  std::shared_ptr<const EncoderBundle> bundle_;
  std::optional<std::string> template_;
  std::string fingerprint_;
};

/// Substitutes `text` for the single "{}" in `tmpl`.
std::string apply_text_template(std::string_view tmpl, std::string_view text);

}  // namespace medzs
