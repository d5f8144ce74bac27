#include "palign/run_config.hpp"

#include "palign/errors.hpp"
#include "palign/rewriter.hpp"
#include "palign/util.hpp"
#include "palign/verifier.hpp"

namespace palign {

using nlohmann::json;

RunConfig RunConfig::from_file(const std::string& path) {
  json doc = json::parse(read_text_file(path), nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
  return from_json(doc);
}

RunConfig RunConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig config;
  config.corpus_path = doc.value("corpus_path", "");
  config.output_dir = doc.value("output_dir", "");

  if (doc.contains("endpoint")) {
    const json& endpoint = doc["endpoint"];
    config.endpoint.endpoint_url = endpoint.value("endpoint_url", "");
    config.endpoint.model = endpoint.value("model", "default");
    config.endpoint.api_key_env = endpoint.value("api_key_env", "PALIGN_API_KEY");
    config.endpoint.max_in_flight = endpoint.value("max_in_flight", std::size_t{4});
    config.endpoint.timeout_ms = endpoint.value("timeout_ms", std::uint64_t{30000});
    if (endpoint.contains("retry")) {
      const json& retry = endpoint["retry"];
      config.endpoint.retry.max_attempts = retry.value("max_attempts", std::size_t{3});
      config.endpoint.retry.backoff_base_ms = retry.value("backoff_base_ms", std::uint64_t{100});
      config.endpoint.retry.backoff_cap_ms = retry.value("backoff_cap_ms", std::uint64_t{5000});
    }
    config.mock_fixture = endpoint.value("mock_fixture", "");
  }

  if (doc.contains("sampling")) {
    const json& sampling = doc["sampling"];
    config.sampling.num_samples = sampling.value("num_samples", std::size_t{10});
    config.sampling.temperature = sampling.value("temperature", 1.0);
    config.sampling.max_response_tokens =
        sampling.value("max_response_tokens", std::size_t{2048});
    config.sampling.seed = sampling.value("seed", std::uint64_t{0});
  }

  config.template_path = doc.value("template_path", "");
  config.problem_prompt_template = doc.value("problem_prompt_template", "{statement}");
  config.max_tokens = doc.value("max_tokens", std::size_t{4096});
  if (doc.contains("seed")) config.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("aggregation")) {
    config.aggregation = aggregation_from_string(doc["aggregation"].get<std::string>());
  }
  return config;
}

json RunConfig::to_json() const {
  json endpoint_json{{"endpoint_url", endpoint.endpoint_url},
                     {"model", endpoint.model},
                     {"api_key_env", endpoint.api_key_env},
                     {"max_in_flight", endpoint.max_in_flight},
                     {"retry",
                      json{{"max_attempts", endpoint.retry.max_attempts},
                           {"backoff_base_ms", endpoint.retry.backoff_base_ms},
                           {"backoff_cap_ms", endpoint.retry.backoff_cap_ms}}},
                     {"timeout_ms", endpoint.timeout_ms},
                     {"mock_fixture", mock_fixture}};
  json sampling_json{{"num_samples", sampling.num_samples},
                     {"temperature", sampling.temperature},
                     {"max_response_tokens", sampling.max_response_tokens},
                     {"seed", sampling.seed}};
  json doc{{"corpus_path", corpus_path},
           {"output_dir", output_dir},
           {"endpoint", endpoint_json},
           {"sampling", sampling_json},
           {"template_path", template_path},
           {"problem_prompt_template", problem_prompt_template},
           {"max_tokens", max_tokens},
           {"aggregation", to_string(aggregation)}};
  if (seed.has_value()) doc["seed"] = *seed;
  return doc;
}

std::string RunConfig::digest() const {
  RetellPromptTemplate tmpl = template_path.empty() ? RetellPromptTemplate::builtin()
                                                    : RetellPromptTemplate::from_file(template_path);
  std::string canonical = to_json().dump();
  canonical += "|template:" + tmpl.name + ":" + tmpl.version;
  canonical += "|";
  canonical += kNormalizationVersion;
  return to_hex(fnv1a64(canonical));
}

}  // namespace palign
