#include "idcurate/llm_client.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "idcurate/error.hpp"
#include "io_util.hpp"

namespace idcurate::llm {

using detail::ordered_json;

const std::string& default_system_prompt() {
  static const std::string text =
      "You write prompts for a text-to-image model that produces passport-style face photos. "
      "Rewrite the given identity description as one fluent paragraph. Mention every listed attribute "
      "using its exact wording, add no new identity attributes, and keep the frontal pose, neutral "
      "expression and plain white background.";
  return text;
}

LlmConfig parse_llm_config(std::string_view json_text) {
  const ordered_json j = detail::parse_json(json_text, "llm config");
  if (!j.is_object()) throw ValidationError("llm config: expected object");
  LlmConfig c;
  try {
    c.enabled = j.value("enabled", c.enabled);
    c.endpoint = j.value("endpoint", c.endpoint);
    c.model = j.value("model", c.model);
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.temperature = j.value("temperature", c.temperature);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.system_prompt = j.value("system_prompt", c.system_prompt);
  } catch (const nlohmann::json::type_error& e) {
    throw ValidationError(std::string("llm config: ") + e.what());
  }
  validate(c);
  return c;
}

LlmConfig load_llm_config(const std::filesystem::path& path) {
  return parse_llm_config(detail::read_text_file(path));
}

void validate(const LlmConfig& c) {
  if (!(c.timeout_seconds > 0.0) || !std::isfinite(c.timeout_seconds))
    throw ValidationError("llm config: timeout_seconds must be > 0");
  if (c.max_retries < 0) throw ValidationError("llm config: max_retries must be >= 0");
  if (c.max_in_flight < 1) throw ValidationError("llm config: max_in_flight must be >= 1");
}

// ---------------------------------------------------------------------------
// Transports

namespace {

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

UrlParts split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ValidationError("llm endpoint must be an absolute URL: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

std::string canonical(std::string_view body) {
  try {
    return nlohmann::json::parse(body).dump();
  } catch (const nlohmann::json::parse_error&) {
    return std::string(body);
  }
}

ordered_json response_to_json(const HttpResponse& r) {
  ordered_json j;
  j["status"] = r.status;
  j["body"] = r.body;
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

}  // namespace

HttpResponse HttpTransport::post(const HttpRequest& request) {
  HttpResponse out;
  UrlParts parts;
  try {
    parts = split_url(request.url);
  } catch (const ValidationError& e) {
    out.error = e.what();
    return out;
  }
  httplib::Client client(parts.origin);
  if (!client.is_valid()) {
    out.error = "unsupported endpoint " + parts.origin;
    return out;
  }
  const auto half = std::chrono::duration<double>(request.timeout_seconds / 2.0);
  const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(half);
  client.set_connection_timeout(usec);
  client.set_read_timeout(usec);
  client.set_write_timeout(usec);
  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);
  auto res = client.Post(parts.path, headers, request.body, "application/json");
  if (!res) {
    out.error = httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  return out;
}

ReplayTransport::ReplayTransport(const std::filesystem::path& transcript) {
  load(detail::read_text_file(transcript));
}

ReplayTransport::ReplayTransport(std::string_view transcript_json) { load(transcript_json); }

void ReplayTransport::load(std::string_view text) {
  const ordered_json j = detail::parse_json(text, "transcript");
  const auto& ex = detail::require(j, "exchanges", "transcript");
  if (!ex.is_array()) throw ValidationError("transcript.exchanges: expected array");
  for (const auto& e : ex) {
    const auto& req = detail::require(e, "request", "transcript.exchanges[]");
    const auto& res = detail::require(e, "response", "transcript.exchanges[]");
    HttpResponse r;
    r.status = res.value("status", 0);
    r.body = res.value("body", "");
    r.error = res.value("error", "");
    const std::string key = req.is_string() ? canonical(req.get<std::string>()) : nlohmann::json(req).dump();
    responses_[key].push_back(std::move(r));
  }
}

HttpResponse ReplayTransport::post(const HttpRequest& request) {
  std::lock_guard lock(mu_);
  auto it = responses_.find(canonical(request.body));
  if (it == responses_.end() || it->second.empty()) return {0, "", "no recorded response for request"};
  HttpResponse r = std::move(it->second.front());
  it->second.pop_front();
  return r;
}

HttpResponse RecordingTransport::post(const HttpRequest& request) {
  HttpResponse r = inner_.post(request);
  std::lock_guard lock(mu_);
  exchanges_.emplace_back(request.body, r);
  return r;
}

std::string RecordingTransport::transcript_json() const {
  std::lock_guard lock(mu_);
  ordered_json j;
  j["exchanges"] = ordered_json::array();
  for (const auto& [body, res] : exchanges_) {
    ordered_json e;
    try {
      e["request"] = ordered_json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
      e["request"] = body;
    }
    e["response"] = response_to_json(res);
    j["exchanges"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

void RecordingTransport::save(const std::filesystem::path& path) const { detail::write_file(path, transcript_json()); }

// ---------------------------------------------------------------------------
// Expansion

std::string build_request_body(const attr::IdentityProfile& profile, const LlmConfig& config) {
  std::string attributes;
  for (const auto& [cls, label] : profile.selections) {
    if (!attributes.empty()) attributes += "; ";
    attributes += cls + ": " + label;
  }
  ordered_json j;
  j["model"] = config.model;
  j["temperature"] = config.temperature;
  j["messages"] = ordered_json::array();
  j["messages"].push_back(
      {{"role", "system"}, {"content", config.system_prompt.empty() ? default_system_prompt() : config.system_prompt}});
  j["messages"].push_back(
      {{"role", "user"}, {"content", "Description: " + profile.prompt + "\nAttributes: " + attributes}});
  return j.dump();
}

std::optional<std::string> response_text(std::string_view body) {
  try {
    const auto j = nlohmann::json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) return std::nullopt;
    return content.get<std::string>();
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

namespace {
std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}
}  // namespace

bool mentions_all_attributes(std::string_view text, const attr::IdentityProfile& profile) {
  const std::string hay = lower(text);
  return std::all_of(profile.selections.begin(), profile.selections.end(),
                     [&](const auto& sel) { return hay.find(lower(sel.second)) != std::string::npos; });
}

Expansion expand_prompt(const attr::IdentityProfile& profile, const LlmConfig& config, Transport& transport,
                        Metrics* metrics) {
  Expansion out;
  auto fallback = [&](std::string reason) {
    out.text = profile.prompt;
    out.fallback = true;
    out.reason = std::move(reason);
    if (metrics) ++metrics->fallbacks;
    return out;
  };
  if (!config.enabled) return fallback("disabled");

  HttpRequest req;
  req.url = config.endpoint;
  req.body = build_request_body(profile, config);
  req.timeout_seconds = config.timeout_seconds;
  req.headers.emplace_back("Accept", "application/json");
  if (!config.api_key_env.empty())
    if (const char* key = std::getenv(config.api_key_env.c_str()); key && *key)
      req.headers.emplace_back("Authorization", std::string("Bearer ") + key);

  const int max_attempts = config.max_retries + 1;
  int validation_failures = 0;
  std::string last = "no attempts";
  while (out.attempts < max_attempts) {
    ++out.attempts;
    if (metrics) ++metrics->requests;
    const HttpResponse res = transport.post(req);
    if (res.status == 0) {
      last = "transport error: " + res.error;
      continue;
    }
    if (res.status < 200 || res.status >= 300) {
      last = "http status " + std::to_string(res.status);
      continue;
    }
    auto text = response_text(res.body);
    if (!text) return fallback("malformed response");
    if (mentions_all_attributes(*text, profile)) {
      out.text = std::move(*text);
      return out;
    }
    if (metrics) ++metrics->validation_failures;
    last = "response omitted selected attributes";
    if (++validation_failures > 1) break;
  }
  return fallback(last);
}

std::vector<Expansion> expand_prompts(const std::vector<attr::IdentityProfile>& profiles, const LlmConfig& config,
                                      Transport& transport, Metrics* metrics) {
  validate(config);
  std::vector<Expansion> out(profiles.size());
  if (!config.enabled) {
    for (std::size_t i = 0; i < profiles.size(); ++i) out[i] = expand_prompt(profiles[i], config, transport, metrics);
    return out;
  }
  std::atomic<std::size_t> next{0};
  const std::size_t workers = std::min(config.max_in_flight, std::max<std::size_t>(profiles.size(), 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < profiles.size(); i = next++)
          out[i] = expand_prompt(profiles[i], config, transport, metrics);
      });
  }
  return out;
}

}  // namespace idcurate::llm
