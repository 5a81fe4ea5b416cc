#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "idcurate/attr_model.hpp"

namespace idcurate::llm {

struct LlmConfig {
  bool enabled = false;
  std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model = "Qwen2.5-7B-Instruct";
  double timeout_seconds = 30.0;
  int max_retries = 2;
  double temperature = 0.7;
  std::size_t max_in_flight = 4;
  std::string api_key_env = "IDCURATE_LLM_API_KEY";
  std::string system_prompt;  // empty: default_system_prompt()
};

const std::string& default_system_prompt();

LlmConfig parse_llm_config(std::string_view json_text);
LlmConfig load_llm_config(const std::filesystem::path& path);
/// Throws ValidationError unless timeout > 0, retries >= 0, max_in_flight >= 1.
void validate(const LlmConfig& config);

struct HttpRequest {
  std::string url;
  std::string body;
  double timeout_seconds = 30.0;
  std::vector<std::pair<std::string, std::string>> headers;
};

struct HttpResponse {
  int status = 0;  // 0: transport failure (see error)
  std::string body;
  std::string error;
};

/// POSTs a JSON body. Implementations must be safe to call concurrently.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// cpp-httplib client. Connect and read each get half of the timeout, so a
/// silent server costs at most one timeout per attempt.
class HttpTransport final : public Transport {
 public:
  HttpResponse post(const HttpRequest& request) override;
};

/// Serves recorded responses keyed by the canonical request body. Repeated
/// identical requests (retries) consume recorded responses in order.
class ReplayTransport final : public Transport {
 public:
  explicit ReplayTransport(const std::filesystem::path& transcript);
  explicit ReplayTransport(std::string_view transcript_json);
  HttpResponse post(const HttpRequest& request) override;

 private:
  void load(std::string_view text);
  std::mutex mu_;
  std::map<std::string, std::deque<HttpResponse>> responses_;
};

/// Forwards to another transport and records every exchange.
class RecordingTransport final : public Transport {
 public:
  explicit RecordingTransport(Transport& inner) : inner_(inner) {}
  HttpResponse post(const HttpRequest& request) override;
  std::string transcript_json() const;
  void save(const std::filesystem::path& path) const;

 private:
  Transport& inner_;
  mutable std::mutex mu_;
  std::vector<std::pair<std::string, HttpResponse>> exchanges_;
};

struct Metrics {
  std::atomic<std::uint64_t> requests{0};
  std::atomic<std::uint64_t> fallbacks{0};
  std::atomic<std::uint64_t> validation_failures{0};
};

struct Expansion {
  std::string text;
  bool fallback = false;
  int attempts = 0;
  std::string reason;  // why the fallback was taken
};

/// OpenAI-compatible chat-completion request for one profile.
std::string build_request_body(const attr::IdentityProfile& profile, const LlmConfig& config);
/// choices[0].message.content, or nullopt for a malformed response.
std::optional<std::string> response_text(std::string_view body);
/// Case-insensitive containment of every selected attribute label.
bool mentions_all_attributes(std::string_view text, const attr::IdentityProfile& profile);

/// Returns service text that mentions every selected attribute, or the
/// profile's template prompt unchanged. Attempts never exceed
/// max_retries + 1, and an output that drops attributes is retried once.
Expansion expand_prompt(const attr::IdentityProfile& profile, const LlmConfig& config, Transport& transport,
                        Metrics* metrics = nullptr);

/// At most config.max_in_flight concurrent requests; results in input order.
std::vector<Expansion> expand_prompts(const std::vector<attr::IdentityProfile>& profiles, const LlmConfig& config,
                                      Transport& transport, Metrics* metrics = nullptr);

}  // namespace idcurate::llm
