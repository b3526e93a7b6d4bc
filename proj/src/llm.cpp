// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#include "medzs/llm.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>

#include <fmt/format.h>
#include <json.hpp>

#include "medzs/error.hpp"
#include "medzs/hash.hpp"
#include "medzs/io.hpp"

namespace medzs {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

std::string string_field(const json& obj, const char* key, const std::filesystem::path& path) {
  if (!obj.contains(key) || !obj.at(key).is_string()) {
    throw Error(ErrorCode::kSchema, fmt::format("{}: missing string field '{}'", path.string(), key));
  }
  return obj.at(key).get<std::string>();
}

}  // namespace

std::string chat_request_body(std::string_view model, std::string_view prompt, double temperature) {
  ordered_json body;
  body["model"] = std::string(model);
  body["messages"] = ordered_json::array({ordered_json{{"role", "user"}, {"content", std::string(prompt)}}});
  body["temperature"] = temperature;
  return body.dump();
}

std::string chat_response_content(std::string_view body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception&) {
    throw Error(ErrorCode::kTransport, "LLM endpoint returned a non-JSON body");
  }
  const json* content = nullptr;
  if (doc.is_object() && doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty()) {
    const json& choice = doc["choices"][0];
    if (choice.is_object() && choice.contains("message") && choice["message"].is_object() &&
        choice["message"].contains("content")) {
      content = &choice["message"]["content"];
    }
  }
  if (content == nullptr) throw Error(ErrorCode::kTransport, "LLM response has no choices[0].message.content");
  if (content->is_null()) return {};
  if (!content->is_string()) throw Error(ErrorCode::kTransport, "LLM response content is not a string");
  return content->get<std::string>();
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string ResponseCache::key(std::string_view template_id, std::string_view category, std::string_view model) {
  return Sha256()
      .update("medzs-llm-cache/1\n")
      .update(template_id)
      .update("\n")
      .update(category)
      .update("\n")
      .update(model)
      .hex_digest();
}

std::optional<CachedResponse> ResponseCache::get(std::string_view template_id, std::string_view category,
                                                 std::string_view model) const {
  const auto path = dir_ / (key(template_id, category, model) + ".json");
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    ++misses_;
    return std::nullopt;
  }
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("{}: {}", path.string(), e.what()));
  }
  CachedResponse entry;
  entry.template_id = string_field(doc, "template_id", path);
  entry.category = string_field(doc, "category", path);
  entry.model = string_field(doc, "model", path);
  entry.prompt = string_field(doc, "prompt", path);
  entry.response = string_field(doc, "response", path);
  entry.captured_at = string_field(doc, "captured_at", path);
  if (doc.contains("capture") && doc["capture"].is_string()) entry.capture = doc["capture"];
  if (entry.template_id != template_id || entry.category != category || entry.model != model) {
    throw Error(ErrorCode::kIntegrity, fmt::format("{}: cache entry does not match its key", path.string()));
  }
  ++hits_;
  return entry;
}

void ResponseCache::put(const CachedResponse& entry) {
  ordered_json doc;
  doc["template_id"] = entry.template_id;
  doc["category"] = entry.category;
  doc["model"] = entry.model;
  doc["prompt"] = entry.prompt;
  doc["response"] = entry.response;
  doc["captured_at"] = entry.captured_at;
  doc["capture"] = entry.capture;
  const auto path = dir_ / (key(entry.template_id, entry.category, entry.model) + ".json");
  std::lock_guard lock(write_mutex_);
  write_file_atomic(path, doc.dump(2) + "\n");
}

std::unique_ptr<ChatTransport> transport_from_env(const LlmConfig& config) {
  const char* key = std::getenv(config.api_key_env.c_str());
  if (key == nullptr || *key == '\0') return nullptr;
  return std::make_unique<HttpChatTransport>(config.endpoint, key, config.timeout_seconds);
}

LlmAnswer query_llm(std::string_view template_id, std::string_view category, std::string_view prompt,
                    const LlmContext& ctx) {
  if (ctx.cache != nullptr) {
    if (auto hit = ctx.cache->get(template_id, category, ctx.config.model)) {
      if (is_blank(hit->response)) {
        throw Error(ErrorCode::kEmptyResponse, fmt::format("cached answer for '{}' is empty", category));
      }
      return {hit->response, hit->captured_at, true};
    }
  }
  if (ctx.transport == nullptr) {
    throw Error(ErrorCode::kTransport,
                fmt::format("no cached answer for '{}' and no LLM endpoint is configured (set {})", category,
                            ctx.config.api_key_env));
  }
  std::string text = ctx.transport->complete(ctx.config.model, prompt, ctx.config.temperature);
  if (is_blank(text)) throw Error(ErrorCode::kEmptyResponse, fmt::format("LLM returned an empty answer for '{}'", category));
  LlmAnswer answer{std::move(text), utc_timestamp_now(), false};
  if (ctx.cache != nullptr) {
    ctx.cache->put({std::string(template_id), std::string(category), ctx.config.model, std::string(prompt),
                    answer.text, answer.captured_at, "live"});
  }
  return answer;
}

std::string utc_timestamp_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace medzs
