#pragma once

#include <memory>
#include <string>

#include "palign/policy_client.hpp"

namespace palign {

/// OpenAI-compatible HTTP backend. Sampling goes through
/// {endpoint_url}/v1/chat/completions with logprobs enabled, falling back to
/// /v1/completions; scoring uses the completions echo+logprobs mechanism.
/// The API key is read from the environment variable named in ClientPolicy.
std::shared_ptr<Transport> make_http_transport(const ClientPolicy& policy);

}  // namespace palign
