// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#include "medzs/knowledge.hpp"

#include <algorithm>
#include <cctype>
#include <exception>
#include <set>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "medzs/error.hpp"
#include "medzs/io.hpp"

namespace medzs {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr std::string_view kDesignedText =
    "Q: According to published literature, what are useful medical visual features for distinguishing "
    "{Diagnostic Category} in a photo?";
constexpr std::string_view kBaselineText =
    "Q: What are useful visual features for distinguishing {Diagnostic Category} in a photo?";

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ws(s.back())) s.remove_suffix(1);
  return s;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Removes one leading list marker; returns false when none is present.
bool strip_marker(std::string_view& s) {
  static constexpr std::string_view kBullet = "•";
  if (s.starts_with(kBullet)) {
    s.remove_prefix(kBullet.size());
    return true;
  }
  if (!s.empty() && (s.front() == '-' || s.front() == '*')) {
    s.remove_prefix(1);
    return true;
  }
  std::size_t i = 0;
  while (i < s.size() && is_digit(s[i])) ++i;
  if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')') && (i + 1 == s.size() || !is_digit(s[i + 1]))) {
    s.remove_prefix(i + 1);
    return true;
  }
  return false;
}

std::size_t code_points(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

[[noreturn]] void schema_error(const std::string& what) { throw Error(ErrorCode::kSchema, what); }

DescriptorSource parse_source(const std::string& s) {
  if (s == "LLM") return DescriptorSource::kLlm;
  if (s == "MANUAL") return DescriptorSource::kManual;
  schema_error(fmt::format("unknown descriptor source '{}'", s));
}

void reject_unknown_fields(const json& obj, std::initializer_list<std::string_view> known, std::string_view where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorCode::kVersion,
                  fmt::format("{}: unknown field '{}' (written by a newer version?)", where, key));
    }
  }
}

std::string get_string(const json& obj, const char* key, std::string_view where) {
  if (!obj.contains(key) || !obj.at(key).is_string()) {
    schema_error(fmt::format("{}: field '{}' must be a string", where, key));
  }
  return obj.at(key).get<std::string>();
}

std::optional<std::string> get_optional_string(const json& obj, const char* key) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  if (!obj.at(key).is_string()) schema_error(fmt::format("knowledge base: field '{}' must be a string", key));
  return obj.at(key).get<std::string>();
}

}  // namespace

std::string_view to_string(PromptVariant variant) {
  return variant == PromptVariant::kDesigned ? "designed" : "baseline";
}

PromptVariant parse_prompt_variant(std::string_view text) {
  if (text == "designed" || text == "DESIGNED") return PromptVariant::kDesigned;
  if (text == "baseline" || text == "BASELINE") return PromptVariant::kBaseline;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown prompt variant '{}' (designed|baseline)", text));
}

PromptTemplate PromptTemplate::make(std::string id, std::string text, PromptVariant variant) {
  const auto first = text.find(kPlaceholder);
  if (first == std::string::npos || text.find(kPlaceholder, first + 1) != std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("prompt template '{}' must contain {} exactly once", id, kPlaceholder));
  }
  if (id.empty()) throw Error(ErrorCode::kInvalidArgument, "prompt template id must not be empty");
  return PromptTemplate{std::move(id), std::move(text), variant};
}

const PromptTemplate& builtin_template(PromptVariant variant) {
  static const PromptTemplate designed =
      PromptTemplate::make("designed", std::string(kDesignedText), PromptVariant::kDesigned);
  static const PromptTemplate baseline =
      PromptTemplate::make("baseline", std::string(kBaselineText), PromptVariant::kBaseline);
  return variant == PromptVariant::kDesigned ? designed : baseline;
}

std::string render_prompt(const PromptTemplate& tmpl, std::string_view category) {
  if (category.empty()) throw Error(ErrorCode::kInvalidArgument, "category must not be empty");
  const auto pos = tmpl.text.find(PromptTemplate::kPlaceholder);
  if (pos == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("prompt template '{}' has no placeholder", tmpl.id));
  }
  std::string out = tmpl.text.substr(0, pos);
  out += category;
  out += tmpl.text.substr(pos + PromptTemplate::kPlaceholder.size());
  return out;
}

std::vector<std::string> parse_symptoms(std::string_view raw) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  std::size_t start = 0;
  while (start <= raw.size()) {
    auto end = raw.find('\n', start);
    if (end == std::string_view::npos) end = raw.size();
    std::string_view line = trim(raw.substr(start, end - start));
    start = end + 1;
    while (strip_marker(line)) line = trim(line);
    if (line.ends_with(':')) continue;
    if (line.ends_with('.')) line = trim(line.substr(0, line.size() - 1));
    if (code_points(line) < 3) continue;
    std::string phrase(line);
    if (seen.insert(phrase).second) out.push_back(std::move(phrase));
  }
  if (out.empty()) throw Error(ErrorCode::kParse, "no symptom phrases found in the response");
  return out;
}

std::string_view to_string(DescriptorSource source) {
  return source == DescriptorSource::kLlm ? "LLM" : "MANUAL";
}

std::optional<std::size_t> KnowledgeBase::find(std::string_view class_id) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i].class_id == class_id) return i;
  }
  return std::nullopt;
}

void validate_kb(const KnowledgeBase& kb) {
  if (kb.kb_id.empty()) schema_error("knowledge base: kb_id must not be empty");
  if (kb.classes.empty()) schema_error(fmt::format("knowledge base '{}' has no classes", kb.kb_id));
  std::set<std::string, std::less<>> ids;
  for (const auto& c : kb.classes) {
    if (c.class_id.empty()) schema_error(fmt::format("knowledge base '{}': empty class_id", kb.kb_id));
    if (!ids.insert(c.class_id).second) {
      schema_error(fmt::format("knowledge base '{}': duplicate class_id '{}'", kb.kb_id, c.class_id));
    }
    const std::string where = fmt::format("knowledge base '{}', class '{}'", kb.kb_id, c.class_id);
    if (c.display_name.empty()) schema_error(where + ": display_name must not be empty");
    if (c.symptoms.empty()) schema_error(where + ": needs at least one symptom");
    std::set<std::string_view> seen;
    for (const auto& s : c.symptoms) {
      if (trim(s).empty()) schema_error(where + ": empty symptom string");
      if (!seen.insert(s).second) schema_error(fmt::format("{}: duplicate symptom '{}'", where, s));
    }
    if (c.source == DescriptorSource::kLlm && c.raw_response.empty()) {
      schema_error(where + ": LLM-sourced descriptors must keep the raw response");
    }
    if (c.prompt_id.empty()) schema_error(where + ": prompt_id must not be empty");
    if (c.created_at.empty()) schema_error(where + ": created_at must not be empty");
  }
}

std::string kb_to_json(const KnowledgeBase& kb) {
  validate_kb(kb);
  ordered_json doc;
  doc["schema_version"] = KnowledgeBase::kSchemaVersion;
  doc["kb_id"] = kb.kb_id;
  if (kb.dataset_id) doc["dataset_id"] = *kb.dataset_id;
  if (kb.encoder_fingerprint) doc["encoder_fingerprint"] = *kb.encoder_fingerprint;
  ordered_json classes = ordered_json::array();
  for (const auto& c : kb.classes) {
    ordered_json e;
    e["class_id"] = c.class_id;
    e["display_name"] = c.display_name;
    e["symptoms"] = c.symptoms;
    e["prompt_id"] = c.prompt_id;
    e["raw_response"] = c.raw_response;
    e["source"] = std::string(to_string(c.source));
    e["created_at"] = c.created_at;
    classes.push_back(std::move(e));
  }
  doc["classes"] = std::move(classes);
  return doc.dump(2) + "\n";
}

KnowledgeBase kb_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("knowledge base: {}", e.what()));
  }
  if (!doc.is_object()) schema_error("knowledge base: top level must be an object");
  if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer()) {
    schema_error("knowledge base: missing integer schema_version");
  }
  const auto version = doc["schema_version"].get<std::int64_t>();
  if (version > KnowledgeBase::kSchemaVersion) {
    throw Error(ErrorCode::kVersion, fmt::format("knowledge base schema_version {} is newer than supported ({})",
                                                 version, KnowledgeBase::kSchemaVersion));
  }
  if (version < 1) schema_error("knowledge base: schema_version must be positive");
  reject_unknown_fields(doc, {"schema_version", "kb_id", "dataset_id", "encoder_fingerprint", "classes"},
                        "knowledge base");
  KnowledgeBase kb;
  kb.kb_id = get_string(doc, "kb_id", "knowledge base");
  kb.dataset_id = get_optional_string(doc, "dataset_id");
  kb.encoder_fingerprint = get_optional_string(doc, "encoder_fingerprint");
  if (!doc.contains("classes") || !doc["classes"].is_array()) schema_error("knowledge base: 'classes' must be an array");
  for (const auto& e : doc["classes"]) {
    if (!e.is_object()) schema_error("knowledge base: class entries must be objects");
    reject_unknown_fields(
        e, {"class_id", "display_name", "symptoms", "prompt_id", "raw_response", "source", "created_at"},
        "knowledge base class");
    ClassDescriptor c;
    c.class_id = get_string(e, "class_id", "knowledge base class");
    const std::string where = fmt::format("knowledge base class '{}'", c.class_id);
    c.display_name = get_string(e, "display_name", where);
    if (!e.contains("symptoms") || !e["symptoms"].is_array()) schema_error(where + ": 'symptoms' must be an array");
    for (const auto& s : e["symptoms"]) {
      if (!s.is_string()) schema_error(where + ": symptoms must be strings");
      c.symptoms.push_back(s.get<std::string>());
    }
    c.prompt_id = get_string(e, "prompt_id", where);
    c.raw_response = get_string(e, "raw_response", where);
    c.source = parse_source(get_string(e, "source", where));
    c.created_at = get_string(e, "created_at", where);
    kb.classes.push_back(std::move(c));
  }
  validate_kb(kb);
  return kb;
}

void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path) { write_file_atomic(path, kb_to_json(kb)); }

KnowledgeBase load_kb(const std::filesystem::path& path) {
  try {
    return kb_from_json(read_text_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIo) throw;
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string slugify(std::string_view name) {
  std::string out;
  bool pending = false;
  for (char ch : name) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) != 0 && c < 0x80) {
      if (pending && !out.empty()) out.push_back('_');
      pending = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      pending = true;
    }
  }
  if (out.empty()) throw Error(ErrorCode::kInvalidArgument, fmt::format("cannot derive a class id from '{}'", name));
  return out;
}

CategoryList load_categories(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  CategoryList list;
  if (path.extension() == ".json") {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, fmt::format("{}: {}", path.string(), e.what()));
    }
    if (!doc.is_object() || !doc.contains("classes") || !doc["classes"].is_array()) {
      schema_error(fmt::format("{}: expected an object with a 'classes' array", path.string()));
    }
    if (doc.contains("dataset_id") && doc["dataset_id"].is_string()) list.dataset_id = doc["dataset_id"];
    for (const auto& c : doc["classes"]) {
      if (!c.is_object()) schema_error(fmt::format("{}: class entries must be objects", path.string()));
      const std::string display = get_string(c, "display_name", path.string());
      const std::string id = c.contains("class_id") ? get_string(c, "class_id", path.string()) : slugify(display);
      list.categories.push_back({id, display});
    }
  } else {
    std::size_t start = 0;
    while (start < text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      const std::string_view line = trim(std::string_view(text).substr(start, end - start));
      start = end + 1;
      if (line.empty() || line.front() == '#') continue;
      const auto tab = line.find('\t');
      if (tab != std::string_view::npos) {
        list.categories.push_back({std::string(trim(line.substr(0, tab))), std::string(trim(line.substr(tab + 1)))});
      } else {
        list.categories.push_back({slugify(line), std::string(line)});
      }
    }
  }
  if (list.categories.empty()) throw Error(ErrorCode::kEmptyInput, fmt::format("{}: no categories", path.string()));
  return list;
}

KnowledgeBase build_kb(std::span<const CategorySpec> categories, const PromptTemplate& tmpl, const LlmContext& llm,
                       const BuildOptions& options) {
  if (categories.empty()) throw Error(ErrorCode::kEmptyInput, "no categories to describe");
  std::set<std::string, std::less<>> names;
  std::set<std::string, std::less<>> ids;
  for (const auto& c : categories) {
    if (c.display_name.empty()) throw Error(ErrorCode::kInvalidArgument, "category names must not be empty");
    if (!names.insert(c.display_name).second) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("duplicate category '{}'", c.display_name));
    }
    if (!ids.insert(c.class_id).second) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("duplicate class id '{}'", c.class_id));
    }
  }

  const auto n = static_cast<std::int64_t>(categories.size());
  std::vector<ClassDescriptor> descriptors(categories.size());
  std::vector<std::exception_ptr> failures(categories.size());
  const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(n)));
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& cat = categories[static_cast<std::size_t>(i)];
    try {
      const std::string prompt = render_prompt(tmpl, cat.display_name);
      LlmAnswer answer = query_llm(tmpl.id, cat.display_name, prompt, llm);
      ClassDescriptor d;
      d.class_id = cat.class_id;
      d.display_name = cat.display_name;
      d.symptoms = parse_symptoms(answer.text);
      d.prompt_id = tmpl.id;
      d.raw_response = std::move(answer.text);
      d.source = DescriptorSource::kLlm;
      d.created_at = std::move(answer.captured_at);
      descriptors[static_cast<std::size_t>(i)] = std::move(d);
    } catch (...) {
      failures[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i]) continue;
    try {
      std::rethrow_exception(failures[i]);
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("class '{}': {}", categories[i].display_name, e.what()));
    }
  }

  KnowledgeBase kb;
  kb.kb_id = options.kb_id.empty() ? fmt::format("kb-{}", tmpl.id) : options.kb_id;
  kb.classes = std::move(descriptors);
  kb.dataset_id = options.dataset_id;
  validate_kb(kb);
  return kb;
}

KnowledgeBase make_baseline_kb(std::span<const CategorySpec> categories, std::string kb_id,
                               std::string_view created_at) {
  KnowledgeBase kb;
  kb.kb_id = std::move(kb_id);
  for (const auto& c : categories) {
    ClassDescriptor d;
    d.class_id = c.class_id;
    d.display_name = c.display_name;
    d.symptoms = {c.display_name};
    d.prompt_id = "category-name";
    d.source = DescriptorSource::kManual;
    d.created_at = std::string(created_at);
    kb.classes.push_back(std::move(d));
  }
  validate_kb(kb);
  return kb;
}

KnowledgeBase make_baseline_kb(const KnowledgeBase& source, std::string_view created_at) {
  std::vector<CategorySpec> cats;
  cats.reserve(source.classes.size());
  for (const auto& c : source.classes) cats.push_back({c.class_id, c.display_name});
  KnowledgeBase kb = make_baseline_kb(cats, source.kb_id + "-category-names", created_at);
  kb.dataset_id = source.dataset_id;
  return kb;
}

}  // namespace medzs
