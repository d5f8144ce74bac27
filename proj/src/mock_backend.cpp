#include "palign/mock_backend.hpp"

#include "palign/errors.hpp"
#include "palign/util.hpp"

#include <chrono>
#include <cmath>
#include <thread>

namespace palign {

using nlohmann::json;

namespace {

std::uint64_t attempt_key(std::uint64_t prompt_hash, std::size_t request_index) {
  return prompt_hash ^ (0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(request_index) + 1));
}

std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
  x ^= x >> 33;
  x *= 0xFF51AFD7ED558CCDull;
  x ^= x >> 33;
  return x;
}

std::string scoring_mode_name(MockScoringMode mode) {
  switch (mode) {
    case MockScoringMode::Candidates: return "candidates";
    case MockScoringMode::Uniform: return "uniform";
    case MockScoringMode::ProbOne: return "prob_one";
    case MockScoringMode::Bigram: return "bigram";
    case MockScoringMode::Scripted: return "scripted";
    case MockScoringMode::None: return "none";
  }
  return "none";
}

MockScoringMode scoring_mode_from_name(const std::string& name) {
  if (name == "candidates") return MockScoringMode::Candidates;
  if (name == "uniform") return MockScoringMode::Uniform;
  if (name == "prob_one") return MockScoringMode::ProbOne;
  if (name == "bigram") return MockScoringMode::Bigram;
  if (name == "scripted") return MockScoringMode::Scripted;
  if (name == "none") return MockScoringMode::None;
  throw ConfigError("unknown mock scoring mode: " + name);
}

std::uint64_t parse_hex64(const std::string& hex) {
  if (hex.empty() || hex.size() > 16) throw ConfigError("bad prompt hash key: " + hex);
  std::uint64_t value = 0;
  for (char c : hex) {
    value <<= 4;
    if (c >= '0' && c <= '9') {
      value |= static_cast<std::uint64_t>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      value |= static_cast<std::uint64_t>(c - 'a' + 10);
    } else {
      throw ConfigError("bad prompt hash key: " + hex);
    }
  }
  return value;
}

}  // namespace

void MockFixture::add_prompt(const std::string& prompt, MockPromptScript script) {
  prompts[fnv1a64(prompt)] = std::move(script);
}

void MockFixture::add_compact(const std::string& prompt, std::size_t k,
                              std::vector<std::size_t> correct_indices, std::string gold) {
  MockPromptScript script;
  script.compact = CompactScript{k, std::move(correct_indices), std::move(gold)};
  prompts[fnv1a64(prompt)] = std::move(script);
}

std::string synth_candidate_text(bool correct, std::size_t index, const std::string& gold) {
  std::string text = "Worked solution " + std::to_string(index) +
                     " for this problem. The final answer is \\boxed{";
  text += correct ? gold : std::string("no-valid-answer");
  text += "}.";
  return text;
}

std::vector<double> synth_logprobs(std::uint64_t prompt_hash, std::size_t index,
                                   std::size_t token_count) {
  std::vector<double> out;
  out.reserve(token_count);
  const std::uint64_t base = mix64(prompt_hash, index);
  for (std::size_t j = 0; j < token_count; ++j) {
    const std::uint64_t v = mix64(base, j) % 400;
    out.push_back(-(static_cast<double>(v) + 1.0) / 100.0);
  }
  return out;
}

json MockFixture::to_json() const {
  json prompts_json = json::object();
  for (const auto& [hash, script] : prompts) {
    json entry = json::object();
    if (script.always_fail) {
      entry["always_fail"] = true;
    } else if (script.compact) {
      entry["k"] = script.compact->k;
      entry["correct_indices"] = script.compact->correct_indices;
      entry["gold"] = script.compact->gold;
    } else {
      json list = json::array();
      for (const auto& candidate : script.candidates) {
        json c{{"text", candidate.text}, {"finish_reason", to_string(candidate.finish_reason)}};
        if (candidate.logprobs) c["logprobs"] = *candidate.logprobs;
        if (candidate.fail_times > 0) c["fail_times"] = candidate.fail_times;
        list.push_back(std::move(c));
      }
      entry["candidates"] = std::move(list);
    }
    prompts_json[to_hex(hash)] = std::move(entry);
  }

  json scoring_json{{"mode", scoring_mode_name(scoring.mode)}};
  if (scoring.mode == MockScoringMode::Uniform) scoring_json["vocab_size"] = scoring.vocab_size;
  if (scoring.mode == MockScoringMode::Bigram) scoring_json["table"] = scoring.bigram;
  if (scoring.mode == MockScoringMode::Scripted) {
    json entries = json::array();
    for (const auto& [key, logprobs] : scoring.scripted) {
      entries.push_back(json{{"prompt_hash", to_hex(key.first)},
                             {"completion_hash", to_hex(key.second)},
                             {"logprobs", logprobs}});
    }
    scoring_json["entries"] = std::move(entries);
  }

  return json{{"version", 1},
              {"latency_us", json{{"min", latency_us_min}, {"max", latency_us_max}}},
              {"scoring", scoring_json},
              {"prompts", prompts_json}};
}

MockFixture MockFixture::from_json(const json& doc) {
  MockFixture fixture;
  if (doc.value("version", 1) != 1) throw ConfigError("unsupported mock fixture version");
  if (doc.contains("latency_us")) {
    fixture.latency_us_min = doc["latency_us"].value("min", 0u);
    fixture.latency_us_max = doc["latency_us"].value("max", 0u);
  }
  if (doc.contains("scoring")) {
    const json& scoring_json = doc["scoring"];
    fixture.scoring.mode = scoring_mode_from_name(scoring_json.value("mode", "candidates"));
    fixture.scoring.vocab_size = scoring_json.value("vocab_size", std::size_t{0});
    if (scoring_json.contains("table")) {
      fixture.scoring.bigram = scoring_json["table"].get<std::map<std::string, double>>();
    }
    if (scoring_json.contains("entries")) {
      for (const auto& entry : scoring_json["entries"]) {
        auto key = std::make_pair(parse_hex64(entry.at("prompt_hash").get<std::string>()),
                                  parse_hex64(entry.at("completion_hash").get<std::string>()));
        fixture.scoring.scripted[key] = entry.at("logprobs").get<std::vector<double>>();
      }
    }
  }
  if (doc.contains("prompts")) {
    for (const auto& [hex, entry] : doc["prompts"].items()) {
      MockPromptScript script;
      if (entry.value("always_fail", false)) {
        script.always_fail = true;
      } else if (entry.contains("k")) {
        CompactScript compact;
        compact.k = entry.at("k").get<std::size_t>();
        compact.correct_indices = entry.at("correct_indices").get<std::vector<std::size_t>>();
        compact.gold = entry.at("gold").get<std::string>();
        script.compact = std::move(compact);
      } else {
        for (const auto& c : entry.at("candidates")) {
          MockCandidateScript candidate;
          candidate.text = c.at("text").get<std::string>();
          if (c.contains("logprobs")) candidate.logprobs = c["logprobs"].get<std::vector<double>>();
          candidate.fail_times = c.value("fail_times", std::size_t{0});
          candidate.finish_reason = finish_reason_from_string(c.value("finish_reason", "stop"));
          script.candidates.push_back(std::move(candidate));
        }
      }
      fixture.prompts[parse_hex64(hex)] = std::move(script);
    }
  }
  return fixture;
}

void MockFixture::save(const std::string& path) const {
  write_text_file(path, to_json().dump());
}

MockFixture MockFixture::from_file(const std::string& path) {
  return from_json(json::parse(read_text_file(path)));
}

MockTransport::MockTransport(MockFixture fixture) : fixture_(std::move(fixture)) {}

void MockTransport::apply_latency() {
  if (fixture_.latency_us_max == 0) return;
  const std::uint32_t span = fixture_.latency_us_max - fixture_.latency_us_min + 1;
  const std::uint64_t draw = mix64(latency_state_.fetch_add(1), 0xD6E8FEB86659FD93ull);
  const std::uint32_t wait = fixture_.latency_us_min + static_cast<std::uint32_t>(draw % span);
  if (wait > 0) std::this_thread::sleep_for(std::chrono::microseconds(wait));
}

Candidate MockTransport::build_candidate(std::uint64_t prompt_hash,
                                         const MockPromptScript& script,
                                         const GenerationRequest& request) const {
  const std::size_t i = request.request_index;
  Candidate candidate;
  if (script.compact) {
    const CompactScript& compact = *script.compact;
    if (i >= compact.k) {
      throw ConfigError("mock fixture scripts only " + std::to_string(compact.k) +
                        " candidates; request_index " + std::to_string(i));
    }
    const bool correct = std::find(compact.correct_indices.begin(), compact.correct_indices.end(),
                                   i) != compact.correct_indices.end();
    candidate.text = synth_candidate_text(correct, i, compact.gold);
    candidate.token_logprobs =
        synth_logprobs(prompt_hash, i, whitespace_token_count(candidate.text));
    candidate.finish_reason = FinishReason::Stop;
    return candidate;
  }
  if (i >= script.candidates.size()) {
    throw ConfigError("mock fixture scripts only " + std::to_string(script.candidates.size()) +
                      " candidates; request_index " + std::to_string(i));
  }
  const MockCandidateScript& scripted = script.candidates[i];
  candidate.text = scripted.text;
  if (scripted.logprobs) {
    candidate.token_logprobs = *scripted.logprobs;
  } else {
    candidate.token_logprobs =
        synth_logprobs(prompt_hash, i, whitespace_token_count(scripted.text));
  }
  candidate.finish_reason = scripted.finish_reason;
  if (candidate.finish_reason == FinishReason::Length &&
      candidate.token_logprobs.size() != request.cfg.max_response_tokens) {
    throw ConfigError("mock fixture candidate marked length must carry max_response_tokens tokens");
  }
  return candidate;
}

Candidate MockTransport::complete(const GenerationRequest& request) {
  const std::uint64_t prompt_hash = fnv1a64(request.prompt);

  const std::size_t now = in_flight_.fetch_add(1) + 1;
  std::size_t seen = max_in_flight_observed_.load();
  while (now > seen && !max_in_flight_observed_.compare_exchange_weak(seen, now)) {
  }
  total_complete_calls_.fetch_add(1);

  struct Gauge {
    std::atomic<std::size_t>& counter;
    ~Gauge() { counter.fetch_sub(1); }
  } gauge{in_flight_};

  apply_latency();

  std::size_t attempt = 0;
  const MockPromptScript* script = nullptr;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    attempt = ++attempts_[attempt_key(prompt_hash, request.request_index)];
    ++calls_per_prompt_[prompt_hash];
    auto it = fixture_.prompts.find(prompt_hash);
    if (it != fixture_.prompts.end()) script = &it->second;
  }

  if (!script) {
    throw ConfigError("mock fixture has no script for prompt hash " + to_hex(prompt_hash));
  }
  if (script->always_fail) {
    throw TransientError("scripted unconditional failure");
  }
  if (!script->compact && request.request_index < script->candidates.size()) {
    const auto& scripted = script->candidates[request.request_index];
    if (attempt <= scripted.fail_times) {
      throw TransientError("scripted failure " + std::to_string(attempt) + "/" +
                           std::to_string(scripted.fail_times));
    }
  }
  return build_candidate(prompt_hash, *script, request);
}

std::vector<double> MockTransport::score(const std::string& prompt, const std::string& completion) {
  const std::uint64_t prompt_hash = fnv1a64(prompt);
  apply_latency();
  switch (fixture_.scoring.mode) {
    case MockScoringMode::None:
      throw CapabilityError("mock fixture scoring mode is 'none'");
    case MockScoringMode::ProbOne:
      return std::vector<double>(whitespace_token_count(completion), 0.0);
    case MockScoringMode::Uniform: {
      if (fixture_.scoring.vocab_size < 1) throw ConfigError("uniform scoring needs vocab_size");
      const double lp = -std::log(static_cast<double>(fixture_.scoring.vocab_size));
      return std::vector<double>(whitespace_token_count(completion), lp);
    }
    case MockScoringMode::Bigram: {
      std::vector<double> out;
      std::string prev = "<s>";
      for (const auto& token : split_whitespace(completion)) {
        auto it = fixture_.scoring.bigram.find(prev + " " + token);
        if (it == fixture_.scoring.bigram.end()) {
          throw ConfigError("bigram table has no entry for '" + prev + " " + token + "'");
        }
        out.push_back(std::log(it->second));
        prev = token;
      }
      return out;
    }
    case MockScoringMode::Scripted: {
      auto it = fixture_.scoring.scripted.find({prompt_hash, fnv1a64(completion)});
      if (it == fixture_.scoring.scripted.end()) {
        throw ConfigError("no scripted score for this (prompt, completion) pair");
      }
      return it->second;
    }
    case MockScoringMode::Candidates: {
      const MockPromptScript* script = nullptr;
      {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = fixture_.prompts.find(prompt_hash);
        if (it != fixture_.prompts.end()) script = &it->second;
      }
      if (!script) {
        throw ConfigError("mock fixture has no script for prompt hash " + to_hex(prompt_hash));
      }
      if (script->compact) {
        const CompactScript& compact = *script->compact;
        for (std::size_t i = 0; i < compact.k; ++i) {
          const bool correct = std::find(compact.correct_indices.begin(),
                                         compact.correct_indices.end(),
                                         i) != compact.correct_indices.end();
          if (synth_candidate_text(correct, i, compact.gold) == completion) {
            return synth_logprobs(prompt_hash, i, whitespace_token_count(completion));
          }
        }
      } else {
        for (std::size_t i = 0; i < script->candidates.size(); ++i) {
          if (script->candidates[i].text == completion) {
            if (script->candidates[i].logprobs) return *script->candidates[i].logprobs;
            return synth_logprobs(prompt_hash, i, whitespace_token_count(completion));
          }
        }
      }
      throw ConfigError("completion is not a scripted candidate of this prompt");
    }
  }
  throw ConfigError("unhandled mock scoring mode");
}

bool MockTransport::supports_scoring() const {
  return fixture_.scoring.mode != MockScoringMode::None;
}

std::size_t MockTransport::attempts_for(std::uint64_t prompt_hash,
                                        std::size_t request_index) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = attempts_.find(attempt_key(prompt_hash, request_index));
  return it == attempts_.end() ? 0 : it->second;
}

std::unordered_map<std::uint64_t, std::size_t> MockTransport::complete_calls_per_prompt() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return calls_per_prompt_;
}

void MockTransport::reset_instrumentation() {
  std::lock_guard<std::mutex> lock(mutex_);
  attempts_.clear();
  calls_per_prompt_.clear();
  in_flight_.store(0);
  max_in_flight_observed_.store(0);
  total_complete_calls_.store(0);
}

}  // namespace palign
