#pragma once

// Minimal chat-completion client used by RemoteLLM agents.
//
// Request body:  {"model", "messages": [{"role", "content"}...], "temperature"}
// Response body: {"choices": [{"message": {"content"}}], "usage": {...}}
// Usage accepts either prompt_tokens/completion_tokens or
// input_tokens/output_tokens. Missing usage is recorded as zero with
// `usage_missing` set.

#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rvb/records.hpp"

namespace rvb::llm {

struct ChatMessage {
  std::string role;
  std::string content;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_delay{500};
  double backoff_factor = 2.0;
};

struct AdapterSettings {
  std::string url;  // full endpoint, e.g. http://host:port/v1/chat/completions
  std::string api_key;
  std::string model;
  double temperature = 0.0;
  RetryPolicy retry;
  std::chrono::seconds timeout{120};

  // Reads RVB_LLM_URL and RVB_LLM_KEY. Throws AdapterError when the URL is unset.
  static AdapterSettings from_environment(std::string model, double temperature);
};

// One HTTP round trip, kept for the run's raw exchange log.
struct Exchange {
  std::string agent;
  int attempt = 0;
  std::string request;
  int status = 0;
  std::string response;
  std::string error;
};

nlohmann::json exchange_to_json(const Exchange& e);

struct Completion {
  std::string content;
  TokenUsage usage;
};

class ChatClient {
 public:
  explicit ChatClient(AdapterSettings settings);

  // Sends the transcript; retries transport failures and non-2xx statuses
  // with exponential backoff. Throws AdapterError once attempts run out or
  // when a 2xx body is malformed.
  Completion complete(std::span<const ChatMessage> transcript, std::string_view agent);

  const AdapterSettings& settings() const { return settings_; }
  std::vector<Exchange> take_exchanges();

 private:
  AdapterSettings settings_;
  std::vector<Exchange> exchanges_;
};

// First balanced JSON object embedded in a model reply, if any.
std::optional<nlohmann::json> extract_json_object(std::string_view content);

// Builds the request body the client sends.
nlohmann::json build_request(const AdapterSettings& settings,
                             std::span<const ChatMessage> transcript);

// Parses a chat-completion response body. Throws AdapterError if malformed.
Completion parse_response(std::string_view body, std::string_view agent, std::string_view model);

}  // namespace rvb::llm
