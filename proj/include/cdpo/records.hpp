#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cdpo/microworld.hpp"
#include "cdpo/optim.hpp"
#include "cdpo/qgen.hpp"

// Line-delimited JSON schemas. Every file starts with a header record
// {"record":"header","kind":...,"schema_version":1,"config_hash":...}.
namespace cdpo::records {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

json world_to_json(const microworld::World& world, const microworld::EventLog& factual);
std::pair<microworld::World, microworld::EventLog> world_from_json(const json& j);

json question_to_json(const qgen::Question& q);
qgen::Question question_from_json(const json& j);

json metrics_to_json(const optim::StepMetrics& m);

void write_jsonl(const std::string& path, const std::string& kind, const std::string& config_hash,
                 const std::vector<json>& records);

struct JsonlFile {
  std::string kind;
  std::string config_hash;
  std::vector<json> records;
};

// Throws IoError on a missing file, bad header or schema mismatch.
JsonlFile read_jsonl(const std::string& path, const std::string& expected_kind);

// Appends one record per call; writes the header on construction.
class JsonlWriter {
 public:
  JsonlWriter(const std::string& path, const std::string& kind, const std::string& config_hash);
  void write(const json& record);

 private:
  std::string path_;
};

void write_json(const std::string& path, const json& value);
json read_json(const std::string& path);

// FNV-1a 64 over the canonical (sorted-key) dump, as 16 hex digits.
std::string config_hash(const json& config);

}  // namespace cdpo::records
