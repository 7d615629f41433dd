#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "rfkg/error.hpp"
#include "rfkg/llm_client.hpp"
#include "rfkg/prompt.hpp"

using namespace rfkg;
namespace fs = std::filesystem;

namespace {

// Local chat-completion stand-in. The first `failures` requests get `fail_status`.
class FakeEndpoint {
 public:
  FakeEndpoint(int failures, int fail_status) : failures_(failures), fail_status_(fail_status) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = ++requests_;
      last_auth_ = req.get_header_value("Authorization");
      last_body_ = req.body;
      if (n <= failures_) {
        res.status = fail_status_;
        res.set_content("{\"error\":\"busy\"}", "application/json");
        return;
      }
      const auto body = nlohmann::json::parse(req.body);
      const auto prompt = body.at("messages").at(0).at("content").get<std::string>();
      nlohmann::json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "Answer: " + mock_complete(prompt)}}}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  int requests() const { return requests_; }
  std::string last_auth() const { return last_auth_; }
  std::string last_body() const { return last_body_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  int failures_;
  int fail_status_;
  std::atomic<int> requests_{0};
  std::string last_auth_, last_body_;
};

ClientConfig live_config(const std::string& url) {
  ClientConfig cfg;
  cfg.mode = ClientMode::kLive;
  cfg.endpoint = url;
  cfg.model = "test-model";
  cfg.token_env = "RFKG_TEST_TOKEN";
  cfg.initial_backoff = std::chrono::milliseconds(5);
  cfg.timeout_seconds = 5;
  return cfg;
}

const std::string kPrompt = build_prompt("Who?", {"A -> r -> Bee"}, default_exemplars(), 1).text;

}  // namespace

TEST_CASE("client config validation") {
  ClientConfig cfg;
  cfg.mode = ClientMode::kLive;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.model = "m";
  CHECK_NOTHROW(cfg.validate());
  cfg.temperature = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  ClientConfig replay;
  replay.mode = ClientMode::kReplay;
  CHECK_THROWS_AS(replay.validate(), ConfigError);
  CHECK(parse_client_mode("mock") == ClientMode::kMock);
  CHECK_THROWS_AS(parse_client_mode("gpt"), ConfigError);
}

TEST_CASE("live mode without a token fails before any request") {
  FakeEndpoint server(0, 200);
  ::unsetenv("RFKG_TEST_TOKEN");
  CHECK_THROWS_AS(LlmClient(live_config(server.url())), ConfigError);
  CHECK(server.requests() == 0);
}

TEST_CASE("live mode retries on rate limits and server errors") {
  ::setenv("RFKG_TEST_TOKEN", "sekrit", 1);
  {
    FakeEndpoint server(2, 429);
    LlmClient client(live_config(server.url()));
    CHECK(client.complete(kPrompt) == "Answer: Bee");
    CHECK(client.last_attempts() == 3);
    CHECK(server.last_auth() == "Bearer sekrit");
    const auto body = nlohmann::json::parse(server.last_body());
    CHECK(body.at("model") == "test-model");
    CHECK(body.at("temperature") == 0.0);
    CHECK(body.at("messages").at(0).at("role") == "user");
    CHECK(body.at("messages").at(0).at("content") == kPrompt);
  }
  {
    FakeEndpoint server(10, 503);
    auto cfg = live_config(server.url());
    cfg.max_retries = 2;
    LlmClient client(cfg);
    CHECK_THROWS_AS(client.complete(kPrompt), TransportError);
    CHECK(server.requests() == 3);
  }
  {
    FakeEndpoint server(10, 400);
    LlmClient client(live_config(server.url()));
    CHECK_THROWS_AS(client.complete(kPrompt), TransportError);
    CHECK(server.requests() == 1);
  }
  ::unsetenv("RFKG_TEST_TOKEN");
}

TEST_CASE("live mode reports unreachable endpoints as transport errors") {
  ::setenv("RFKG_TEST_TOKEN", "x", 1);
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  auto cfg = live_config("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions");
  cfg.max_retries = 1;
  LlmClient client(cfg);
  CHECK_THROWS_AS(client.complete(kPrompt), TransportError);
  CHECK(client.last_attempts() == 2);
  ::unsetenv("RFKG_TEST_TOKEN");
}

TEST_CASE("minimum request interval spaces out calls") {
  ::setenv("RFKG_TEST_TOKEN", "x", 1);
  FakeEndpoint server(0, 200);
  auto cfg = live_config(server.url());
  cfg.min_interval = std::chrono::milliseconds(150);
  LlmClient client(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  client.complete(kPrompt);
  client.complete(kPrompt);
  CHECK(std::chrono::steady_clock::now() - t0 >= std::chrono::milliseconds(150));
  ::unsetenv("RFKG_TEST_TOKEN");
}

TEST_CASE("chat response parsing") {
  CHECK(parse_chat_response(R"({"choices":[{"message":{"content":"hi"}}]})") == "hi");
  CHECK_THROWS_AS(parse_chat_response("{}"), TransportError);
  CHECK_THROWS_AS(parse_chat_response("not json"), TransportError);
}

TEST_CASE("record then replay gives identical completions without a network") {
  const auto dir = fs::temp_directory_path() / "rfkg_replay_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto log = dir / "session.jsonl";
  const std::vector<std::string> prompts{kPrompt, build_prompt("Other?", {}, default_exemplars(), 0).text,
                                         build_prompt("Third?", {"P -> q -> R"}, default_exemplars(), 3).text};
  std::vector<std::string> recorded;
  {
    ClientConfig cfg;
    cfg.replay_file = log;
    LlmClient mock(cfg);
    for (const auto& p : prompts) recorded.push_back(mock.complete(p));
  }
  std::ifstream in(log);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    const auto rec = nlohmann::json::parse(line);
    CHECK(rec.at("prompt_hash") == prompt_hash(prompts[lines]));
    CHECK(rec.at("prompt") == prompts[lines]);
    CHECK(rec.contains("timestamp"));
    ++lines;
  }
  CHECK(lines == 3);

  ClientConfig cfg;
  cfg.mode = ClientMode::kReplay;
  cfg.replay_file = log;
  LlmClient replay(cfg);
  for (std::size_t i = 0; i < prompts.size(); ++i) CHECK(replay.complete(prompts[i]) == recorded[i]);
  CHECK_THROWS_AS(replay.complete("Question: never seen\nPaths:\n(none)\nThink:\n"), TransportError);
  fs::remove_all(dir);
}

TEST_CASE("prompt hash is stable FNV-1a") {
  CHECK(prompt_hash("") == "cbf29ce484222325");
  CHECK(prompt_hash("a") == "af63dc4c8601ec8c");
}
