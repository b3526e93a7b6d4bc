// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace medzs {

/// Fixed-length id sequence fed to the text encoder.
struct TokenSequence {
  std::vector<std::int64_t> ids;
};

/// Decodes HTML character references (named and numeric).
std::string html_unescape(std::string_view text);

/// Normalization applied before tokenization: HTML unescape (twice),
/// whitespace collapse, trim, lowercase.
std::string clean_text(std::string_view text);

/// Splits cleaned text into pre-tokens (letter runs, single digits,
/// punctuation runs, English contractions, special markers).
std::vector<std::string> pre_tokenize(std::string_view cleaned);

/// Byte-level BPE tokenizer compatible with the CLIP text encoder family.
class BpeTokenizer {
 public:
  using Merge = std::pair<std::string, std::string>;

  BpeTokenizer(std::vector<Merge> merges, int context_length = 77, std::int64_t pad_id = 0);

  /// Reads a merges file: optional "#version" header, then one
  /// space-separated pair per line in rank order.
  static BpeTokenizer from_file(const std::filesystem::path& merges_path, int context_length = 77,
                                std::int64_t pad_id = 0);

  /// Ids for the text without start/end markers.
  std::vector<std::int64_t> encode(std::string_view text) const;

  /// Start marker, ids, end marker, truncated to the context length with the
  /// end marker kept in the last slot, then padded.
  TokenSequence tokenize(std::string_view text) const;

  std::int64_t sot_id() const noexcept { return sot_id_; }
  std::int64_t eot_id() const noexcept { return eot_id_; }
  std::int64_t pad_id() const noexcept { return pad_id_; }
  int context_length() const noexcept { return context_length_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }

 private:
  std::vector<std::string> bpe(const std::string& token) const;

  std::unordered_map<std::string, std::int64_t> encoder_;
  std::unordered_map<std::string, int> ranks_;
  std::string byte_encoder_[256];
  std::int64_t sot_id_ = 0;
  std::int64_t eot_id_ = 0;
  std::int64_t pad_id_ = 0;
  int context_length_ = 77;
  std::size_t vocab_size_ = 0;
};

}  // namespace medzs
