#include "palign/records.hpp"

#include "palign/errors.hpp"
#include "palign/util.hpp"

#include <fstream>

namespace palign {

using nlohmann::json;

FileHeader FileHeader::make(const std::string& config_digest) {
  FileHeader header;
  header.created_at = utc_timestamp();
  header.config_digest = config_digest;
  return header;
}

json header_to_json(const FileHeader& header) {
  return json{{"schema_version", header.schema_version},
              {"created_at", header.created_at},
              {"config_digest", header.config_digest}};
}

bool is_header_record(const json& record) {
  return record.is_object() && record.contains("schema_version");
}

FileHeader header_from_json(const json& record) {
  FileHeader header;
  header.schema_version = record.at("schema_version").get<int>();
  header.created_at = record.value("created_at", "");
  header.config_digest = record.value("config_digest", "");
  if (header.schema_version != kSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(header.schema_version));
  }
  return header;
}

void for_each_jsonl_record(const std::string& path,
                           const std::function<void(std::size_t, const json&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for reading: " + path);
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded()) {
      throw ConfigError("malformed record at line " + std::to_string(line_number) + " of " + path);
    }
    fn(line_number, record);
  }
  if (in.bad()) throw IoError("read failure: " + path);
}

std::string dump_record(const json& record) { return record.dump(); }

}  // namespace palign
