#include "palign/http_backend.hpp"

#include "palign/errors.hpp"
#include "palign/util.hpp"

#ifdef PALIGN_WITH_TLS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <json.hpp>

#include <cmath>

namespace palign {

namespace {

using nlohmann::json;

struct ParsedUrl {
  std::string origin;  // scheme://host[:port], what httplib::Client wants
  std::string prefix;  // path prefix before /v1/...
};

ParsedUrl parse_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint_url must include a scheme: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

class HttpTransport : public Transport {
 public:
  explicit HttpTransport(ClientPolicy policy) : policy_(std::move(policy)) {
    url_ = parse_endpoint(policy_.endpoint_url);
    if (auto key = read_env(policy_.api_key_env)) api_key_ = *key;
  }

  Candidate complete(const GenerationRequest& request) override;
  std::vector<double> score(const std::string& prompt, const std::string& completion) override;
  bool supports_scoring() const override { return true; }  // probed per call

 private:
  json post(const std::string& path, const json& body);

  ClientPolicy policy_;
  ParsedUrl url_;
  std::string api_key_;
};

json HttpTransport::post(const std::string& path, const json& body) {
  httplib::Client client(url_.origin);
  const auto timeout_s = static_cast<time_t>(policy_.timeout_ms / 1000);
  const auto timeout_us = static_cast<time_t>((policy_.timeout_ms % 1000) * 1000);
  client.set_connection_timeout(timeout_s, timeout_us);
  client.set_read_timeout(timeout_s, timeout_us);
  client.set_write_timeout(timeout_s, timeout_us);

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto result = client.Post(url_.prefix + path, headers, body.dump(), "application/json");
  if (!result) {
    throw TransientError("connection failure against " + url_.origin + ": " +
                         httplib::to_string(result.error()));
  }
  if (result->status == 429 || result->status >= 500 || result->status == 408) {
    throw TransientError("HTTP " + std::to_string(result->status) + " from " + path);
  }
  if (result->status == 404) {
    throw CapabilityError("endpoint does not serve " + path);
  }
  if (result->status < 200 || result->status >= 300) {
    throw CapabilityError("HTTP " + std::to_string(result->status) + " from " + path + ": " +
                          result->body);
  }
  json payload = json::parse(result->body, nullptr, false);
  if (payload.is_discarded()) {
    throw TransientError("unparseable response body from " + path);
  }
  return payload;
}

FinishReason finish_from_api(const std::string& reason) {
  if (reason == "length") return FinishReason::Length;
  return FinishReason::Stop;
}

Candidate HttpTransport::complete(const GenerationRequest& request) {
  // Chat endpoint first; 404 falls through to legacy completions.
  try {
    json body{{"model", policy_.model},
              {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})},
              {"temperature", request.cfg.temperature},
              {"max_tokens", request.cfg.max_response_tokens},
              {"n", 1},
              {"logprobs", true}};
    json payload = post("/v1/chat/completions", body);
    const json& choice = payload.at("choices").at(0);
    Candidate candidate;
    candidate.text = choice.at("message").value("content", "");
    candidate.finish_reason = finish_from_api(choice.value("finish_reason", "stop"));
    if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("content")) {
      for (const auto& entry : choice["logprobs"]["content"]) {
        double lp = entry.at("logprob").get<double>();
        candidate.token_logprobs.push_back(std::min(lp, 0.0));
      }
    }
    return candidate;
  } catch (const CapabilityError&) {
    // fall through
  }

  json body{{"model", policy_.model},
            {"prompt", request.prompt},
            {"temperature", request.cfg.temperature},
            {"max_tokens", request.cfg.max_response_tokens},
            {"n", 1},
            {"logprobs", 0}};
  json payload = post("/v1/completions", body);
  const json& choice = payload.at("choices").at(0);
  Candidate candidate;
  candidate.text = choice.value("text", "");
  candidate.finish_reason = finish_from_api(choice.value("finish_reason", "stop"));
  if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
      choice["logprobs"].contains("token_logprobs")) {
    for (const auto& entry : choice["logprobs"]["token_logprobs"]) {
      if (entry.is_null()) continue;
      candidate.token_logprobs.push_back(std::min(entry.get<double>(), 0.0));
    }
  }
  return candidate;
}

std::vector<double> HttpTransport::score(const std::string& prompt, const std::string& completion) {
  // Teacher-forced scoring: echo the concatenated text with max_tokens=0 and
  // read back token_logprobs for the completion's suffix.
  json body{{"model", policy_.model},
            {"prompt", prompt + completion},
            {"max_tokens", 0},
            {"echo", true},
            {"logprobs", 0},
            {"temperature", 0.0}};
  json payload;
  try {
    payload = post("/v1/completions", body);
  } catch (const CapabilityError& error) {
    throw CapabilityError(std::string("teacher-forced scoring unavailable (") + error.what() +
                          "); use the mock backend or a score-capable endpoint");
  }
  const json& choice = payload.at("choices").at(0);
  if (!choice.contains("logprobs") || !choice["logprobs"].is_object()) {
    throw CapabilityError("endpoint returned no logprobs for echo scoring");
  }
  const json& logprobs = choice["logprobs"];
  const auto& token_logprobs = logprobs.at("token_logprobs");
  const auto& offsets = logprobs.at("text_offset");
  const std::size_t completion_start = prompt.size();
  std::vector<double> out;
  for (std::size_t i = 0; i < token_logprobs.size() && i < offsets.size(); ++i) {
    if (offsets[i].get<std::size_t>() < completion_start) continue;
    if (token_logprobs[i].is_null()) continue;
    out.push_back(std::min(token_logprobs[i].get<double>(), 0.0));
  }
  if (out.empty()) {
    throw CapabilityError("echo scoring yielded no completion tokens");
  }
  return out;
}

}  // namespace

std::shared_ptr<Transport> make_http_transport(const ClientPolicy& policy) {
  return std::make_shared<HttpTransport>(policy);
}

}  // namespace palign
