// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

// HTTP client kept in its own translation unit; the header is heavy.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <fmt/format.h>

#include "medzs/error.hpp"
#include "medzs/llm.hpp"

namespace medzs {

HttpChatTransport::HttpChatTransport(std::string endpoint, std::string api_key, int timeout_seconds)
    : api_key_(std::move(api_key)), timeout_seconds_(timeout_seconds) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("LLM endpoint '{}' is not an http(s) URL", endpoint));
  }
  const std::string scheme = endpoint.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("unsupported LLM endpoint scheme '{}'", scheme));
  }
  const auto path_start = endpoint.find('/', scheme_end + 3);
  origin_ = endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : endpoint.substr(path_start);
  if (origin_.size() <= scheme_end + 3) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("LLM endpoint '{}' has no host", endpoint));
  }
}

std::string HttpChatTransport::complete(std::string_view model, std::string_view prompt, double temperature) const {
  httplib::Client client(origin_);
  client.set_connection_timeout(timeout_seconds_, 0);
  client.set_read_timeout(timeout_seconds_, 0);
  client.set_write_timeout(timeout_seconds_, 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  const auto res = client.Post(path_, headers, chat_request_body(model, prompt, temperature), "application/json");
  if (!res) {
    throw Error(ErrorCode::kTransport,
                fmt::format("LLM request to {} failed: {}", origin_, httplib::to_string(res.error())));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::kTransport, fmt::format("LLM endpoint {} answered HTTP {}", origin_, res->status));
  }
  return chat_response_content(res->body);
}

}  // namespace medzs
