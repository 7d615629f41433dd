#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rfkg/prompt.hpp"

namespace rfkg {

enum class ClientMode { kLive, kMock, kReplay };

ClientMode parse_client_mode(std::string_view text);
std::string_view to_string(ClientMode mode);

struct ClientConfig {
  ClientMode mode = ClientMode::kMock;
  /// Full URL of a chat-completions endpoint, e.g. https://host/v1/chat/completions.
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model;
  std::string token_env = "OPENAI_API_KEY";
  double temperature = 0.0;
  double timeout_seconds = 60.0;
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{1000};
  double backoff_factor = 2.0;
  /// Minimum spacing between live requests; zero disables rate limiting.
  std::chrono::milliseconds min_interval{0};
  /// Replay mode reads this file; other modes append to it when non-empty.
  std::filesystem::path replay_file;

  void validate() const;
};

/// Normalized answers in completion order, plus the raw text.
struct AnswerSet {
  std::vector<std::string> answers;
  std::string raw;
};

/// Lowercase, trim, strip surrounding quotes and trailing periods.
std::string normalize_answer(std::string_view text);

/// Uses the text after the last "Answer:" marker when present, then splits on
/// commas and newlines. Empty pieces are dropped; duplicates keep first position.
AnswerSet parse_answer(std::string_view completion);

inline constexpr std::string_view kUnknownAnswer = "unknown";

/// Terminal entity label of the first live path, or "unknown" without paths.
std::string mock_complete(std::string_view prompt);

/// One record of the append-only replay log.
struct ReplayRecord {
  std::string prompt_hash;
  std::string prompt;
  std::string completion;
  std::string timestamp;
};

std::string prompt_hash(std::string_view prompt);

/// Chat-completion body: {"model", "messages": [{"role": "user", ...}], "temperature"}.
std::string build_chat_request(std::string_view model, std::string_view prompt, double temperature);
/// Extracts choices[0].message.content; throws TransportError on malformed bodies.
std::string parse_chat_response(std::string_view body);

/// Sends prompts to a live endpoint, the in-process mock, or a replay log.
/// Safe to share between threads.
class LlmClient {
 public:
  /// Live mode fails here with ConfigError when the token variable is unset.
  explicit LlmClient(ClientConfig cfg);

  std::string complete(const RenderedPrompt& prompt);
  std::string complete(std::string_view prompt_text);

  const ClientConfig& config() const noexcept { return cfg_; }
  /// Attempts made by the most recent live request (1 = no retries).
  int last_attempts() const;

 private:
  std::string complete_live(std::string_view prompt);
  void append_record(std::string_view prompt, std::string_view completion);

  ClientConfig cfg_;
  std::string token_;
  std::unordered_map<std::string, std::string> replay_;  // hash -> completion
  std::unordered_map<std::string, std::string> replay_prompts_;
  mutable std::mutex mutex_;
  std::chrono::steady_clock::time_point last_request_{};
  int last_attempts_ = 0;
};

}  // namespace rfkg
