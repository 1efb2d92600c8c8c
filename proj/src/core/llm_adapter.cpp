#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "rvb/llm_adapter.hpp"

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "rvb/errors.hpp"

namespace rvb::llm {

namespace {

using nlohmann::json;

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::kAdapterError, "endpoint URL needs a scheme: '" + url + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::int64_t usage_field(const json& usage, const char* a, const char* b, bool& missing) {
  if (usage.contains(a) && usage[a].is_number_integer()) return usage[a].get<std::int64_t>();
  if (usage.contains(b) && usage[b].is_number_integer()) return usage[b].get<std::int64_t>();
  missing = true;
  return 0;
}

}  // namespace

AdapterSettings AdapterSettings::from_environment(std::string model, double temperature) {
  AdapterSettings s;
  const char* url = std::getenv("RVB_LLM_URL");
  if (!url || !*url) throw Error(ErrorKind::kAdapterError, "RVB_LLM_URL is not set");
  s.url = url;
  if (const char* key = std::getenv("RVB_LLM_KEY")) s.api_key = key;
  s.model = std::move(model);
  s.temperature = temperature;
  return s;
}

json exchange_to_json(const Exchange& e) {
  return json{{"agent", e.agent},   {"attempt", e.attempt},   {"request", e.request},
              {"status", e.status}, {"response", e.response}, {"error", e.error}};
}

json build_request(const AdapterSettings& settings, std::span<const ChatMessage> transcript) {
  json messages = json::array();
  for (const auto& m : transcript) messages.push_back({{"role", m.role}, {"content", m.content}});
  return json{{"model", settings.model}, {"messages", messages}, {"temperature", settings.temperature}};
}

Completion parse_response(std::string_view body, std::string_view agent, std::string_view model) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kAdapterError, std::string("response is not JSON: ") + e.what());
  }
  Completion out;
  try {
    out.content = doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::kAdapterError, "response lacks choices[0].message.content");
  }
  out.usage.agent = std::string(agent);
  out.usage.model = std::string(model);
  const auto it = doc.find("usage");
  if (it == doc.end() || !it->is_object()) {
    out.usage.usage_missing = true;
  } else {
    bool missing = false;
    out.usage.input_tokens = usage_field(*it, "prompt_tokens", "input_tokens", missing);
    out.usage.output_tokens = usage_field(*it, "completion_tokens", "output_tokens", missing);
    out.usage.usage_missing = missing;
  }
  return out;
}

ChatClient::ChatClient(AdapterSettings settings) : settings_(std::move(settings)) {
  if (settings_.retry.max_attempts < 1) settings_.retry.max_attempts = 1;
}

Completion ChatClient::complete(std::span<const ChatMessage> transcript, std::string_view agent) {
  const auto url = split_url(settings_.url);
  const std::string body = build_request(settings_, transcript).dump();

  httplib::Client client(url.origin);
  client.set_connection_timeout(settings_.timeout);
  client.set_read_timeout(settings_.timeout);
  client.set_write_timeout(settings_.timeout);
  httplib::Headers headers;
  if (!settings_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + settings_.api_key);
  }

  auto delay = settings_.retry.initial_delay;
  std::string last_error;
  for (int attempt = 1; attempt <= settings_.retry.max_attempts; ++attempt) {
    Exchange ex;
    ex.agent = std::string(agent);
    ex.attempt = attempt;
    ex.request = body;
    auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
      ex.error = httplib::to_string(res.error());
      last_error = "transport failure: " + ex.error;
    } else {
      ex.status = res->status;
      ex.response = res->body;
      if (res->status >= 200 && res->status < 300) {
        exchanges_.push_back(ex);
        return parse_response(res->body, agent, settings_.model);
      }
      last_error = "status " + std::to_string(res->status);
    }
    exchanges_.push_back(std::move(ex));
    if (attempt < settings_.retry.max_attempts) {
      std::this_thread::sleep_for(delay);
      delay = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(delay.count()) * settings_.retry.backoff_factor));
    }
  }
  throw Error(ErrorKind::kAdapterError, "giving up after " +
                                            std::to_string(settings_.retry.max_attempts) +
                                            " attempts: " + last_error);
}

std::vector<Exchange> ChatClient::take_exchanges() {
  std::vector<Exchange> out;
  out.swap(exchanges_);
  return out;
}

std::optional<json> extract_json_object(std::string_view content) {
  for (std::size_t start = content.find('{'); start != std::string_view::npos;
       start = content.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < content.size(); ++i) {
      const char c = content[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        try {
          return json::parse(content.substr(start, i - start + 1));
        } catch (const json::exception&) {
          break;
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace rvb::llm
