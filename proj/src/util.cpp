#include "palign/util.hpp"

#include "palign/errors.hpp"

#include <cctype>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

namespace palign {

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t hash = seed;
  for (unsigned char c : data) {
    hash ^= static_cast<std::uint64_t>(c);
    hash *= 1099511628211ull;
  }
  return hash;
}

std::string to_hex(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

std::size_t whitespace_token_count(std::string_view text) {
  std::size_t count = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) ++count;
  }
  return count;
}

std::optional<std::string> read_env(const std::string& name) {
  const char* value = std::getenv(name.c_str());
  if (!value) return std::nullopt;
  return std::string(value);
}

std::string utc_timestamp() {
  std::time_t now = 0;
  if (auto pinned = read_env("SOURCE_DATE_EPOCH")) {
    now = static_cast<std::time_t>(std::strtoll(pinned->c_str(), nullptr, 10));
  } else {
    now = std::time(nullptr);
  }
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failure: " + path);
  return buf.str();
}

void write_text_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failure: " + path);
}

UniformDraw uniform_index(std::mt19937_64& rng, std::size_t n) {
  if (n == 0) throw NumericError("uniform_index over empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t threshold = limit - (limit % n);
  std::uint64_t draw = rng();
  while (draw >= threshold) draw = rng();
  return {static_cast<std::size_t>(draw % n), draw};
}

std::uint64_t substream_seed(std::uint64_t run_seed, std::string_view problem_id,
                             std::string_view stage) {
  std::string key;
  key.reserve(problem_id.size() + stage.size() + 24);
  key.append(std::to_string(run_seed));
  key.push_back(':');
  key.append(problem_id);
  key.push_back(':');
  key.append(stage);
  return fnv1a64(key);
}

}  // namespace palign
