#pragma once

#include <functional>
#include <string>

#include <json.hpp>

namespace palign {

constexpr int kSchemaVersion = 1;

/// First record of every line-delimited output file.
struct FileHeader {
  int schema_version = kSchemaVersion;
  std::string created_at;     // RFC 3339 UTC
  std::string config_digest;  // hex digest of the resolved run configuration

  static FileHeader make(const std::string& config_digest);
};

nlohmann::json header_to_json(const FileHeader& header);
bool is_header_record(const nlohmann::json& record);
FileHeader header_from_json(const nlohmann::json& record);

/// Streams a JSONL file line by line. `fn` receives the 1-based line number and
/// the parsed record. Malformed lines raise ConfigError naming the line.
void for_each_jsonl_record(const std::string& path,
                           const std::function<void(std::size_t, const nlohmann::json&)>& fn);

std::string dump_record(const nlohmann::json& record);

}  // namespace palign
