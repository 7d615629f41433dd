#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "rfkg/llm_client.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "rfkg/error.hpp"
#include "rfkg/hash.hpp"

namespace rfkg {

ClientMode parse_client_mode(std::string_view text) {
  if (text == "live") return ClientMode::kLive;
  if (text == "mock") return ClientMode::kMock;
  if (text == "replay") return ClientMode::kReplay;
  throw ConfigError("client mode must be live, mock or replay (got '" + std::string(text) + "')");
}

std::string_view to_string(ClientMode mode) {
  switch (mode) {
    case ClientMode::kLive: return "live";
    case ClientMode::kMock: return "mock";
    case ClientMode::kReplay: return "replay";
  }
  return "?";
}

void ClientConfig::validate() const {
  if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (mode == ClientMode::kLive && (endpoint.empty() || model.empty()))
    throw ConfigError("live mode needs both an endpoint and a model name");
  if (mode == ClientMode::kReplay && replay_file.empty())
    throw ConfigError("replay mode needs a replay file");
}

// --- answers -------------------------------------------------------------------

std::string normalize_answer(std::string_view text) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  auto trim = [&](std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
  };
  std::string_view s = trim(text);
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    while (!s.empty() && s.back() == '.') {
      s.remove_suffix(1);
      changed = true;
    }
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
      s = s.substr(1, s.size() - 2);
      changed = true;
    }
    s = trim(s);
  }
  std::string out(s);
  for (auto& c : out)
    if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

AnswerSet parse_answer(std::string_view completion) {
  AnswerSet out;
  out.raw = std::string(completion);
  std::string_view body = completion;
  std::size_t marker = std::string_view::npos;
  for (auto p = completion.find(kAnswerHeader); p != std::string_view::npos;
       p = completion.find(kAnswerHeader, p + 1))
    if (p == 0 || completion[p - 1] == '\n') marker = p;
  if (marker != std::string_view::npos) body = completion.substr(marker + kAnswerHeader.size());
  std::size_t start = 0;
  for (std::size_t i = 0; i <= body.size(); ++i) {
    if (i == body.size() || body[i] == ',' || body[i] == '\n') {
      auto piece = normalize_answer(body.substr(start, i - start));
      if (!piece.empty() && std::find(out.answers.begin(), out.answers.end(), piece) == out.answers.end())
        out.answers.push_back(std::move(piece));
      start = i + 1;
    }
  }
  return out;
}

std::string mock_complete(std::string_view prompt) {
  const auto block = parse_live_block(prompt);
  if (block.paths.empty()) return std::string(kUnknownAnswer);
  return split_path(block.paths.front()).back();
}

// --- wire format ---------------------------------------------------------------

std::string prompt_hash(std::string_view prompt) { return hex64(fnv1a(prompt)); }

std::string build_chat_request(std::string_view model, std::string_view prompt, double temperature) {
  nlohmann::json body = {
      {"model", model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", temperature},
  };
  return body.dump();
}

std::string parse_chat_response(std::string_view body) {
  try {
    const auto doc = nlohmann::json::parse(body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed chat-completion response: ") + e.what());
  }
}

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint must be an absolute URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

// --- client --------------------------------------------------------------------

LlmClient::LlmClient(ClientConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.mode == ClientMode::kLive) {
    const char* token = std::getenv(cfg_.token_env.c_str());
    if (token == nullptr || *token == '\0')
      throw ConfigError("live mode: environment variable " + cfg_.token_env + " is not set");
    token_ = token;
    split_url(cfg_.endpoint);
  }
  if (cfg_.mode == ClientMode::kReplay) {
    std::ifstream in(cfg_.replay_file);
    if (!in) throw ConfigError("cannot open replay file: " + cfg_.replay_file.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        const auto rec = nlohmann::json::parse(line);
        const auto hash = rec.at("prompt_hash").get<std::string>();
        replay_[hash] = rec.at("completion").get<std::string>();
        replay_prompts_[hash] = rec.at("prompt").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(cfg_.replay_file.string(), line_no, e.what());
      }
    }
  }
}

int LlmClient::last_attempts() const {
  std::lock_guard lock(mutex_);
  return last_attempts_;
}

std::string LlmClient::complete(const RenderedPrompt& prompt) { return complete(prompt.text); }

std::string LlmClient::complete(std::string_view prompt) {
  std::string completion;
  switch (cfg_.mode) {
    case ClientMode::kMock:
      completion = mock_complete(prompt);
      break;
    case ClientMode::kReplay: {
      const auto hash = prompt_hash(prompt);
      auto it = replay_.find(hash);
      if (it == replay_.end() || replay_prompts_.at(hash) != prompt)
        throw TransportError("replay file has no completion for prompt " + hash);
      return it->second;
    }
    case ClientMode::kLive:
      completion = complete_live(prompt);
      break;
  }
  if (!cfg_.replay_file.empty()) append_record(prompt, completion);
  return completion;
}

std::string LlmClient::complete_live(std::string_view prompt) {
  const auto [origin, path] = split_url(cfg_.endpoint);
  httplib::Client http(origin);
  const auto timeout = std::chrono::duration<double>(cfg_.timeout_seconds);
  http.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  http.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  http.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  http.set_bearer_token_auth(token_);
  const auto body = build_chat_request(cfg_.model, prompt, cfg_.temperature);

  std::string last_error;
  auto delay = std::chrono::duration<double, std::milli>(cfg_.initial_backoff);
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= cfg_.backoff_factor;
    }
    if (cfg_.min_interval.count() > 0) {
      std::unique_lock lock(mutex_);
      const auto ready = last_request_ + cfg_.min_interval;
      const auto now = std::chrono::steady_clock::now();
      if (ready > now) std::this_thread::sleep_for(ready - now);
      last_request_ = std::chrono::steady_clock::now();
    }
    {
      std::lock_guard lock(mutex_);
      last_attempts_ = attempt + 1;
    }
    auto res = http.Post(path, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return parse_chat_response(res->body);
    last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
    const bool transient = res->status == 429 || res->status >= 500;
    if (!transient) throw TransportError("request rejected (" + last_error + ")");
  }
  throw TransportError("giving up after " + std::to_string(cfg_.max_retries + 1) +
                       " attempts; last error: " + last_error);
}

void LlmClient::append_record(std::string_view prompt, std::string_view completion) {
  nlohmann::json rec = {{"prompt_hash", prompt_hash(prompt)},
                        {"prompt", prompt},
                        {"completion", completion},
                        {"timestamp", utc_timestamp()}};
  std::lock_guard lock(mutex_);
  std::ofstream out(cfg_.replay_file, std::ios::app);
  if (!out) throw Error("cannot append to replay file: " + cfg_.replay_file.string());
  out << rec.dump() << '\n';
}

}  // namespace rfkg
