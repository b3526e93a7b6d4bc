// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

// Matches the configuration the library compiles the client with.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <doctest.h>

#include <json.hpp>
#include <thread>

#include "medzs/error.hpp"
#include "medzs/io.hpp"
#include "medzs/llm.hpp"
#include "test_support.hpp"

using namespace medzs;
using nlohmann::json;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

class FakeTransport final : public ChatTransport {
 public:
  explicit FakeTransport(std::string answer) : answer_(std::move(answer)) {}
  std::string complete(std::string_view, std::string_view prompt, double) const override {
    ++calls;
    last_prompt = std::string(prompt);
    return answer_;
  }
  mutable int calls = 0;
  mutable std::string last_prompt;

 private:
  std::string answer_;
};

// Local chat-completions stub on an ephemeral port.
class StubServer {
 public:
  StubServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      auth_header = req.get_header_value("Authorization");
      body = req.body;
      res.status = status;
      json out{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}};
      res.set_content(status == 200 ? out.dump() : std::string("oops"), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }

  int status = 200;
  std::string content = "- opacity\n- consolidation";
  std::string auth_header;
  std::string body;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("request and response bodies use the chat-completions shape") {
  const auto req = json::parse(chat_request_body("m1", "hello", 0.0));
  CHECK(req["model"] == "m1");
  CHECK(req["temperature"] == 0.0);
  REQUIRE(req["messages"].size() == 1);
  CHECK(req["messages"][0]["role"] == "user");
  CHECK(req["messages"][0]["content"] == "hello");

  CHECK(chat_response_content(R"({"choices":[{"message":{"content":"x"}}]})") == "x");
  CHECK(code_of([] { chat_response_content("not json"); }) == ErrorCode::kTransport);
  CHECK(code_of([] { chat_response_content(R"({"choices":[]})"); }) == ErrorCode::kTransport);
  CHECK(code_of([] { chat_response_content(R"({"choices":[{"message":{"content":3}}]})"); }) == ErrorCode::kTransport);
}

TEST_CASE("response cache keys, storage and integrity") {
  medzs::testing::TempDir dir;
  ResponseCache cache(dir.path());
  const auto k = ResponseCache::key("designed", "tuberculosis", "gpt-3.5-turbo");
  CHECK(k.size() == 64);
  CHECK(k == ResponseCache::key("designed", "tuberculosis", "gpt-3.5-turbo"));
  CHECK(k != ResponseCache::key("designed", "tuberculosis", "gpt-4"));
  CHECK(k != ResponseCache::key("baseline", "tuberculosis", "gpt-3.5-turbo"));

  CHECK_FALSE(cache.get("designed", "tuberculosis", "gpt-3.5-turbo").has_value());
  CHECK(cache.misses() == 1);
  cache.put({"designed", "tuberculosis", "gpt-3.5-turbo", "prompt", "- cavity", "2026-01-01T00:00:00Z", "authored"});
  const auto hit = cache.get("designed", "tuberculosis", "gpt-3.5-turbo");
  REQUIRE(hit.has_value());
  CHECK(hit->response == "- cavity");
  CHECK(hit->captured_at == "2026-01-01T00:00:00Z");
  CHECK(hit->capture == "authored");
  CHECK(cache.hits() == 1);

  // An entry stored under another key's file name is rejected.
  const auto other = dir / (ResponseCache::key("designed", "normal", "gpt-3.5-turbo") + ".json");
  std::filesystem::copy_file(dir / (k + ".json"), other);
  CHECK(code_of([&] { cache.get("designed", "normal", "gpt-3.5-turbo"); }) == ErrorCode::kIntegrity);
  write_file_atomic(other, std::string_view("{broken"));
  CHECK(code_of([&] { cache.get("designed", "normal", "gpt-3.5-turbo"); }) == ErrorCode::kParse);
}

TEST_CASE("committed fixture answers are well formed") {
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(medzs::testing::data_dir() / "cache" / "llm")) {
    const auto doc = json::parse(read_text_file(e.path()));
    ResponseCache cache(e.path().parent_path());
    const auto hit = cache.get(doc["template_id"].get<std::string>(), doc["category"].get<std::string>(),
                               doc["model"].get<std::string>());
    REQUIRE(hit.has_value());
    CHECK_FALSE(hit->response.empty());
    CHECK(e.path().stem().string() == ResponseCache::key(hit->template_id, hit->category, hit->model));
    ++n;
  }
  CHECK(n >= 10);
}

TEST_CASE("query consults the cache before the transport") {
  medzs::testing::TempDir dir;
  ResponseCache cache(dir.path());
  FakeTransport transport("- cavitation\n- apical opacity");
  LlmContext ctx;
  ctx.cache = &cache;
  ctx.transport = &transport;

  const auto first = query_llm("designed", "tuberculosis", "the prompt", ctx);
  CHECK_FALSE(first.from_cache);
  CHECK(first.text == "- cavitation\n- apical opacity");
  CHECK(transport.calls == 1);
  CHECK(transport.last_prompt == "the prompt");
  CHECK(first.captured_at.size() == 20);

  const auto second = query_llm("designed", "tuberculosis", "the prompt", ctx);
  CHECK(second.from_cache);
  CHECK(second.text == first.text);
  CHECK(transport.calls == 1);
}

TEST_CASE("offline and empty answers") {
  medzs::testing::TempDir dir;
  ResponseCache cache(dir.path());
  LlmContext ctx;
  ctx.cache = &cache;
  CHECK(code_of([&] { query_llm("designed", "x", "p", ctx); }) == ErrorCode::kTransport);
  const auto msg = message_of([&] { query_llm("designed", "lung nodule", "p", ctx); });
  CHECK(msg.find("lung nodule") != std::string::npos);

  FakeTransport blank(" \n\t ");
  ctx.transport = &blank;
  CHECK(code_of([&] { query_llm("designed", "x", "p", ctx); }) == ErrorCode::kEmptyResponse);
  CHECK_FALSE(cache.get("designed", "x", ctx.config.model).has_value());

  cache.put({"designed", "y", ctx.config.model, "p", "   ", "2026-01-01T00:00:00Z", "authored"});
  CHECK(code_of([&] { query_llm("designed", "y", "p", ctx); }) == ErrorCode::kEmptyResponse);
}

TEST_CASE("transport from environment requires the key variable") {
  LlmConfig cfg;
  cfg.api_key_env = "MEDZS_TEST_KEY_THAT_IS_NOT_SET";
  ::unsetenv(cfg.api_key_env.c_str());
  CHECK(transport_from_env(cfg) == nullptr);
  ::setenv(cfg.api_key_env.c_str(), "k", 1);
  CHECK(transport_from_env(cfg) != nullptr);
  ::unsetenv(cfg.api_key_env.c_str());
}

TEST_CASE("HTTP transport against a local server") {
  StubServer server;
  const std::string secret = "sk-test-secret-value";
  HttpChatTransport transport(server.url(), secret, 5);
  CHECK(transport.complete("m", "list symptoms", 0.0) == "- opacity\n- consolidation");
  CHECK(server.auth_header == "Bearer " + secret);
  CHECK(json::parse(server.body)["messages"][0]["content"] == "list symptoms");

  server.status = 500;
  const auto msg = message_of([&] { transport.complete("m", "p", 0.0); });
  CHECK(msg.find("500") != std::string::npos);
  CHECK(msg.find(secret) == std::string::npos);
  CHECK(code_of([&] { transport.complete("m", "p", 0.0); }) == ErrorCode::kTransport);
}

TEST_CASE("unreachable endpoints and malformed URLs") {
  // Bind then release a port so nothing listens on it.
  int port = 0;
  {
    httplib::Server s;
    port = s.bind_to_any_port("127.0.0.1");
  }
  HttpChatTransport transport("http://127.0.0.1:" + std::to_string(port) + "/v1/chat", "secret-key", 2);
  const auto msg = message_of([&] { transport.complete("m", "p", 0.0); });
  CHECK(code_of([&] { transport.complete("m", "p", 0.0); }) == ErrorCode::kTransport);
  CHECK(msg.find("secret-key") == std::string::npos);

  CHECK(code_of([] { HttpChatTransport("ftp://host/x", "k"); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { HttpChatTransport("no-scheme", "k"); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { HttpChatTransport("http:///path", "k"); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("timestamps are ISO-8601 UTC") {
  const auto ts = utc_timestamp_now();
  REQUIRE(ts.size() == 20);
  CHECK(ts[4] == '-');
  CHECK(ts[10] == 'T');
  CHECK(ts.back() == 'Z');
}
