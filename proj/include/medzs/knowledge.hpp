// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "medzs/llm.hpp"

namespace medzs {

enum class PromptVariant { kDesigned, kBaseline };

std::string_view to_string(PromptVariant variant);
PromptVariant parse_prompt_variant(std::string_view text);

/// LLM query template with a single "{Diagnostic Category}" placeholder.
struct PromptTemplate {
  static constexpr std::string_view kPlaceholder = "{Diagnostic Category}";

  std::string id;
  std::string text;
  PromptVariant variant = PromptVariant::kDesigned;

  /// Validates that the placeholder occurs exactly once.
  static PromptTemplate make(std::string id, std::string text, PromptVariant variant);
};

/// Built-in templates; ids are "designed" and "baseline".
const PromptTemplate& builtin_template(PromptVariant variant);

/// Substitutes the category verbatim. Empty category raises kInvalidArgument.
std::string render_prompt(const PromptTemplate& tmpl, std::string_view category);

/// Turns a free-text list answer into symptom phrases: one per line, list
/// markers and a trailing period removed, headers and fragments dropped,
/// exact repeats collapsed. Raises kParse when nothing survives.
std::vector<std::string> parse_symptoms(std::string_view raw);

enum class DescriptorSource { kLlm, kManual };

std::string_view to_string(DescriptorSource source);

struct ClassDescriptor {
  std::string class_id;
  std::string display_name;
  std::vector<std::string> symptoms;
  std::string prompt_id;
  std::string raw_response;
  DescriptorSource source = DescriptorSource::kManual;
  std::string created_at;

  bool operator==(const ClassDescriptor&) const = default;
};

struct KnowledgeBase {
  static constexpr int kSchemaVersion = 1;

  std::string kb_id;
  std::vector<ClassDescriptor> classes;
  std::optional<std::string> dataset_id;
  std::optional<std::string> encoder_fingerprint;

  /// Index of `class_id` in declaration order, if present.
  std::optional<std::size_t> find(std::string_view class_id) const;

  bool operator==(const KnowledgeBase&) const = default;
};

/// Enforces KB invariants; raises kSchema describing the first violation.
void validate_kb(const KnowledgeBase& kb);

std::string kb_to_json(const KnowledgeBase& kb);
/// Errors: kParse (malformed JSON), kVersion (newer schema or unknown
/// fields), kSchema (missing/invalid fields, invariant violations).
KnowledgeBase kb_from_json(std::string_view text);

void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path);
KnowledgeBase load_kb(const std::filesystem::path& path);

/// A diagnostic category to describe.
struct CategorySpec {
  std::string class_id;
  std::string display_name;
};

/// Lowercase identifier derived from a display name ("Normal lungs" ->
/// "normal_lungs").
std::string slugify(std::string_view name);

/// Reads a category list: either a preset JSON file ({"classes": [{"class_id",
/// "display_name"}], "dataset_id"?}) or plain text with one display name per
/// line, optionally "class_id<TAB>display name". Blank lines and lines
/// starting with '#' are ignored.
struct CategoryList {
  std::optional<std::string> dataset_id;
  std::vector<CategorySpec> categories;
};
CategoryList load_categories(const std::filesystem::path& path);

struct BuildOptions {
  std::string kb_id;
  std::optional<std::string> dataset_id;
  /// Concurrent LLM queries.
  int workers = 1;
};

/// One descriptor per category via render -> query -> parse, in input
/// order. Any per-class failure raises an Error naming the class; no partial
/// result is returned.
KnowledgeBase build_kb(std::span<const CategorySpec> categories, const PromptTemplate& tmpl,
                       const LlmContext& llm, const BuildOptions& options);

/// Category-name KB: each class's only symptom is its display name.
KnowledgeBase make_baseline_kb(const KnowledgeBase& source, std::string_view created_at = "1970-01-01T00:00:00Z");
KnowledgeBase make_baseline_kb(std::span<const CategorySpec> categories, std::string kb_id,
                               std::string_view created_at = "1970-01-01T00:00:00Z");

}  // namespace medzs
