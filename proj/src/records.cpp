#include "cdpo/records.hpp"

#include <cstdio>
#include <fstream>

#include "cdpo/errors.hpp"

namespace cdpo::records {

json world_to_json(const microworld::World& world, const microworld::EventLog& factual) {
  json objects = json::array();
  for (const auto& o : world.objects)
    objects.push_back({{"id", o.id},
                       {"color", microworld::to_string(o.color)},
                       {"shape", microworld::to_string(o.shape)},
                       {"material", microworld::to_string(o.material)},
                       {"position0", o.position0},
                       {"velocity0", o.velocity0}});
  json events = json::array();
  for (const auto& e : factual.events) events.push_back({{"a", e.a}, {"b", e.b}, {"step", e.step}});
  const auto& c = world.config;
  return {{"schema_version", kSchemaVersion},
          {"world_id", world.id},
          {"config",
           {{"num_objects", c.num_objects},
            {"horizon", c.horizon},
            {"arena_length", c.arena_length},
            {"seed", c.seed},
            {"rest_probability", c.rest_probability},
            {"max_speed", c.max_speed}}},
          {"objects", objects},
          {"factual_events", events}};
}

namespace {

template <class E, std::size_t N>
E enum_from_name(const std::string& name, const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    const auto e = static_cast<E>(i);
    if (microworld::to_string(e) == name) return e;
  }
  throw IoError(std::string("unknown ") + what + ": " + name);
}

}  // namespace

std::pair<microworld::World, microworld::EventLog> world_from_json(const json& j) {
  using namespace microworld;
  if (j.value("schema_version", 0) != kSchemaVersion) throw IoError("world record schema mismatch");
  World w;
  w.id = j.at("world_id");
  const auto& c = j.at("config");
  w.config.num_objects = c.at("num_objects");
  w.config.horizon = c.at("horizon");
  w.config.arena_length = c.at("arena_length");
  w.config.seed = c.at("seed");
  w.config.rest_probability = c.at("rest_probability");
  w.config.max_speed = c.at("max_speed");
  for (const auto& o : j.at("objects")) {
    ObjectSpec s;
    s.id = o.at("id");
    s.color = enum_from_name<Color, kNumColors>(o.at("color"), "color");
    s.shape = enum_from_name<Shape, kNumShapes>(o.at("shape"), "shape");
    s.material = enum_from_name<Material, kNumMaterials>(o.at("material"), "material");
    s.position0 = o.at("position0");
    s.velocity0 = o.at("velocity0");
    w.objects.push_back(s);
  }
  EventLog log;
  for (const auto& e : j.at("factual_events"))
    log.events.push_back(CollisionEvent{e.at("a"), e.at("b"), e.at("step")});
  return {std::move(w), std::move(log)};
}

json question_to_json(const qgen::Question& q) {
  json options = json::array();
  json types = json::object();
  for (std::size_t i = 0; i < q.options.size(); ++i) {
    const auto& o = q.options[i];
    const std::string letter(1, to_char(o.letter));
    options.push_back({{"letter", letter}, {"a", o.event.a}, {"b", o.event.b}});
    types[letter] = qgen::to_string(q.option_types[i]);
  }
  json answers = json::array();
  for (char c : q.answer_set.to_string()) answers.push_back(std::string(1, c));
  return {{"schema_version", kSchemaVersion},
          {"world_id", q.world_id},
          {"removed", q.removed ? json(*q.removed) : json(nullptr)},
          {"negated", q.negated},
          {"options", options},
          {"answer_set", answers},
          {"option_types", types},
          {"instance_type", qgen::to_string(q.instance_type)}};
}

qgen::Question question_from_json(const json& j) {
  if (j.value("schema_version", 0) != kSchemaVersion) throw IoError("question record schema mismatch");
  auto letter_of = [](const std::string& s) {
    if (s.size() != 1 || !letter_from_char(s[0])) throw IoError("bad option letter: " + s);
    return *letter_from_char(s[0]);
  };
  qgen::Question q;
  q.world_id = j.at("world_id");
  if (!j.at("removed").is_null()) q.removed = j.at("removed").get<int>();
  q.negated = j.at("negated");
  for (const auto& o : j.at("options")) {
    const Letter l = letter_of(o.at("letter"));
    q.options.push_back(qgen::Option{l, qgen::Event::between(o.at("a"), o.at("b"))});
    q.option_types.push_back(
        qgen::question_type_from_string(j.at("option_types").at(std::string(1, to_char(l)))));
  }
  for (const auto& a : j.at("answer_set")) q.answer_set.insert(letter_of(a));
  q.instance_type = qgen::question_type_from_string(j.at("instance_type"));
  q.validate();
  return q;
}

json metrics_to_json(const optim::StepMetrics& m) {
  return {{"step", m.step},
          {"mode", optim::to_string(m.mode)},
          {"reward_mean", m.reward_mean},
          {"reward_std", m.reward_std},
          {"kl_mean", m.kl_mean},
          {"grad_norm", m.grad_norm},
          {"objective", m.objective}};
}

namespace {

json header_record(const std::string& kind, const std::string& config_hash) {
  return {{"record", "header"},
          {"kind", kind},
          {"schema_version", kSchemaVersion},
          {"config_hash", config_hash}};
}

}  // namespace

void write_jsonl(const std::string& path, const std::string& kind, const std::string& config_hash,
                 const std::vector<json>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << header_record(kind, config_hash).dump() << '\n';
  for (const auto& r : records) out << r.dump() << '\n';
  if (!out) throw IoError("failed writing " + path);
}

JsonlFile read_jsonl(const std::string& path, const std::string& expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  JsonlFile file;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty file: " + path);
  try {
    const auto header = json::parse(line);
    if (header.value("record", "") != "header") throw IoError("missing header record in " + path);
    if (header.value("schema_version", 0) != kSchemaVersion)
      throw IoError("schema version mismatch in " + path);
    file.kind = header.value("kind", "");
    file.config_hash = header.value("config_hash", "");
    if (!expected_kind.empty() && file.kind != expected_kind)
      throw IoError(path + ": expected kind " + expected_kind + ", found " + file.kind);
    while (std::getline(in, line))
      if (!line.empty()) file.records.push_back(json::parse(line));
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + path + ": " + e.what());
  }
  return file;
}

JsonlWriter::JsonlWriter(const std::string& path, const std::string& kind,
                         const std::string& config_hash)
    : path_(path) {
  write_jsonl(path, kind, config_hash, {});
}

void JsonlWriter::write(const json& record) {
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to " + path_);
  out << record.dump() << '\n';
}

void write_json(const std::string& path, const json& value) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << value.dump(2) << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + path + ": " + e.what());
  }
}

std::string config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cdpo::records
