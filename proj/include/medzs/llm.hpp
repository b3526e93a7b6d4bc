// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace medzs {

struct LlmConfig {
  /// Chat-completions endpoint (http or https URL).
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.0;
  /// Name of the environment variable holding the API key.
  std::string api_key_env = "MEDZS_LLM_API_KEY";
  int timeout_seconds = 60;
};

/// Sends one single-turn prompt and returns the completion text.
/// Implementations raise kTransport on network/protocol failure.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string complete(std::string_view model, std::string_view prompt, double temperature) const = 0;
};

/// Chat-completions JSON over HTTP(S). The key is sent as a bearer token and
/// never appears in error messages.
class HttpChatTransport final : public ChatTransport {
 public:
  HttpChatTransport(std::string endpoint, std::string api_key, int timeout_seconds = 60);
  std::string complete(std::string_view model, std::string_view prompt, double temperature) const override;

 private:
  std::string origin_;  // scheme://host[:port]
  std::string path_;
  std::string api_key_;
  int timeout_seconds_;
};

/// Builds an HttpChatTransport when the configured key variable is set,
/// otherwise returns null (cache-only operation).
std::unique_ptr<ChatTransport> transport_from_env(const LlmConfig& config);

/// Request body in the chat-completions shape.
std::string chat_request_body(std::string_view model, std::string_view prompt, double temperature);
/// Extracts choices[0].message.content; kTransport when malformed.
std::string chat_response_content(std::string_view body);

struct CachedResponse {
  std::string template_id;
  std::string category;
  std::string model;
  std::string prompt;
  std::string response;
  std::string captured_at;  // ISO-8601 UTC
  /// Free-form provenance, e.g. "live" or "authored".
  std::string capture;
};

/// Content-addressed store of LLM answers: one JSON file per
/// (template id, category, model). Reads are lock-free; writes are
/// serialized and atomic.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  static std::string key(std::string_view template_id, std::string_view category, std::string_view model);

  std::optional<CachedResponse> get(std::string_view template_id, std::string_view category,
                                    std::string_view model) const;
  void put(const CachedResponse& entry);

  const std::filesystem::path& directory() const noexcept { return dir_; }
  std::size_t hits() const noexcept { return hits_.load(); }
  std::size_t misses() const noexcept { return misses_.load(); }

 private:
  std::filesystem::path dir_;
  mutable std::mutex write_mutex_;
  mutable std::atomic<std::size_t> hits_{0};
  mutable std::atomic<std::size_t> misses_{0};
};

struct LlmContext {
  LlmConfig config;
  ResponseCache* cache = nullptr;            // optional
  const ChatTransport* transport = nullptr;  // optional; null means offline
};

struct LlmAnswer {
  std::string text;
  std::string captured_at;
  bool from_cache = false;
};

/// Returns the answer for `prompt`, consulting the cache first. Errors:
/// kTransport when no cached entry exists and the endpoint is unavailable,
/// kEmptyResponse when the model returns only whitespace.
LlmAnswer query_llm(std::string_view template_id, std::string_view category, std::string_view prompt,
                    const LlmContext& ctx);

/// Current time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp_now();

}  // namespace medzs
