#include "cdpo/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>

#include "cdpo/errors.hpp"
#include "cdpo/kernels.hpp"
#include "cdpo/records.hpp"

namespace cdpo::harness {

namespace fs = std::filesystem;
using optim::Mode;

namespace {

std::string fmt(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

json trainer_to_json(const TrainerConfig& t) {
  return {{"mode", optim::to_string(t.mode)},
          {"group_size", t.group_size},
          {"beta", t.beta},
          {"clip_eps", t.clip_eps},
          {"kl_estimator", optim::to_string(t.kl_estimator)},
          {"kl_cap", t.kl_cap ? json(*t.kl_cap) : json(nullptr)},
          {"learning_rate", t.learning_rate},
          {"steps", t.steps},
          {"batch_size", t.batch_size},
          {"optimizer", optim::to_string(t.optimizer)},
          {"adam_beta1", t.adam_beta1},
          {"adam_beta2", t.adam_beta2},
          {"adam_epsilon", t.adam_epsilon},
          {"use_openmp", t.use_openmp}};
}

TrainerConfig trainer_from_json(const json& j) {
  TrainerConfig t;
  t.mode = optim::mode_from_string(j.at("mode"));
  t.group_size = j.at("group_size");
  t.beta = j.at("beta");
  t.clip_eps = j.at("clip_eps");
  t.kl_estimator = optim::kl_estimator_from_string(j.at("kl_estimator"));
  if (j.contains("kl_cap") && !j.at("kl_cap").is_null()) t.kl_cap = j.at("kl_cap").get<double>();
  t.learning_rate = j.at("learning_rate");
  t.steps = j.at("steps");
  t.batch_size = j.at("batch_size");
  t.optimizer = optim::optimizer_from_string(j.at("optimizer"));
  t.adam_beta1 = j.at("adam_beta1");
  t.adam_beta2 = j.at("adam_beta2");
  t.adam_epsilon = j.at("adam_epsilon");
  t.use_openmp = j.at("use_openmp");
  return t;
}

void check_keys(const json& user, const json& reference, const std::string& path) {
  if (!user.is_object() || !reference.is_object()) return;
  for (const auto& [key, value] : user.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!reference.contains(key)) throw ConfigError("unknown config key: " + where);
    check_keys(value, reference.at(key), where);
  }
}

TrainerConfig tuned(Mode mode) {
  auto t = TrainerConfig::defaults_for(mode);
  t.optimizer = optim::OptimizerKind::sgd;
  t.learning_rate = 0.3;
  t.steps = 500;
  t.batch_size = 16;
  t.group_size = 8;
  return t;
}

}  // namespace

// --- config ---

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  for (std::uint64_t s = 0; s < 10; ++s) c.seeds.push_back(s);
  c.bias_trainer = tuned(Mode::bias_no_kl);
  c.cdpo_trainer = tuned(Mode::cdpo);
  c.grpo_trainer = tuned(Mode::grpo);
  return c;
}

json ExperimentConfig::to_json() const {
  return {{"schema_version", records::kSchemaVersion},
          {"world",
           {{"num_objects", world.num_objects},
            {"horizon", world.horizon},
            {"arena_length", world.arena_length},
            {"rest_probability", world.rest_probability},
            {"max_speed", world.max_speed}}},
          {"data",
           {{"seed", data.seed},
            {"n_train", data.n_train},
            {"n_eval", data.n_eval},
            {"observational_share", data.observational_share},
            {"eval_balanced_share", data.eval_balanced_share},
            {"eval_skewed_share", data.eval_skewed_share},
            {"attempts_per_item", data.attempts_per_item}}},
          {"seeds", seeds},
          {"architecture",
           {{"slot_width", arch.slot_width},
            {"embed_width", arch.embed_width},
            {"hidden_width", arch.hidden_width},
            {"max_len", arch.max_len}}},
          {"warmup",
           {{"steps", warmup.steps},
            {"batch_size", warmup.batch_size},
            {"learning_rate", warmup.learning_rate},
            {"init_scale", warmup.init_scale},
            {"max_think", warmup.max_think},
            {"label_share", warmup.label_share}}},
          {"rewards", {{"accuracy", reward_weights.accuracy}, {"format", reward_weights.format}}},
          {"trainers",
           {{"bias", trainer_to_json(bias_trainer)},
            {"cdpo", trainer_to_json(cdpo_trainer)},
            {"grpo", trainer_to_json(grpo_trainer)}}},
          {"output_dir", output_dir},
          {"checkpoint_every", checkpoint_every}};
}

ExperimentConfig ExperimentConfig::from_json(const json& user) {
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  json j = defaults().to_json();
  check_keys(user, j, "");
  if (user.contains("schema_version") && user.at("schema_version") != records::kSchemaVersion)
    throw ConfigError("config schema_version mismatch");
  j.merge_patch(user);
  ExperimentConfig c;
  try {
    const auto& w = j.at("world");
    c.world.num_objects = w.at("num_objects");
    c.world.horizon = w.at("horizon");
    c.world.arena_length = w.at("arena_length");
    c.world.rest_probability = w.at("rest_probability");
    c.world.max_speed = w.at("max_speed");
    const auto& d = j.at("data");
    c.data.seed = d.at("seed");
    c.data.n_train = d.at("n_train");
    c.data.n_eval = d.at("n_eval");
    c.data.observational_share = d.at("observational_share");
    c.data.eval_balanced_share = d.at("eval_balanced_share");
    c.data.eval_skewed_share = d.at("eval_skewed_share");
    c.data.attempts_per_item = d.at("attempts_per_item");
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    const auto& a = j.at("architecture");
    c.arch.slot_width = a.at("slot_width");
    c.arch.embed_width = a.at("embed_width");
    c.arch.hidden_width = a.at("hidden_width");
    c.arch.max_len = a.at("max_len");
    const auto& wu = j.at("warmup");
    c.warmup.steps = wu.at("steps");
    c.warmup.batch_size = wu.at("batch_size");
    c.warmup.learning_rate = wu.at("learning_rate");
    c.warmup.init_scale = wu.at("init_scale");
    c.warmup.max_think = wu.at("max_think");
    c.warmup.label_share = wu.at("label_share");
    c.reward_weights.accuracy = j.at("rewards").at("accuracy");
    c.reward_weights.format = j.at("rewards").at("format");
    c.bias_trainer = trainer_from_json(j.at("trainers").at("bias"));
    c.cdpo_trainer = trainer_from_json(j.at("trainers").at("cdpo"));
    c.grpo_trainer = trainer_from_json(j.at("trainers").at("grpo"));
    c.output_dir = j.at("output_dir");
    c.checkpoint_every = j.at("checkpoint_every");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

// The output location is not part of an experiment's identity.
std::string ExperimentConfig::hash() const {
  auto j = to_json();
  j.erase("output_dir");
  return records::config_hash(j);
}

void ExperimentConfig::validate() const {
  world.validate();
  arch.validate();
  if (data.n_train <= 0 || data.n_eval <= 0) throw ConfigError("dataset sizes must be positive");
  for (double p : {data.observational_share, data.eval_balanced_share, data.eval_skewed_share})
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("mixture shares must lie in [0, 1]");
  if (data.attempts_per_item <= 0) throw ConfigError("attempts_per_item must be positive");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("duplicate seeds");
  if (warmup.steps < 0 || warmup.batch_size <= 0 || !(warmup.learning_rate > 0.0) ||
      !(warmup.init_scale >= 0.0) || warmup.max_think < 0 ||
      !(warmup.label_share >= 0.0 && warmup.label_share <= 1.0))
    throw ConfigError("invalid warmup settings");
  if (bias_trainer.mode != Mode::bias_no_kl) throw ConfigError("trainers.bias.mode must be bias");
  if (cdpo_trainer.mode != Mode::cdpo) throw ConfigError("trainers.cdpo.mode must be cdpo");
  if (grpo_trainer.mode != Mode::grpo) throw ConfigError("trainers.grpo.mode must be grpo");
  bias_trainer.validate();
  cdpo_trainer.validate();
  grpo_trainer.validate();
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (output_dir.empty()) throw ConfigError("output_dir must be set");
}

ExperimentConfig load_config(const std::string& path) {
  json j;
  try {
    j = records::read_json(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return ExperimentConfig::from_json(j);
}

ExperimentConfig apply_overrides(const ExperimentConfig& cfg, std::span<const std::string> overrides) {
  json j = cfg.to_json();
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must be key=value: " + o);
    std::string pointer = "/" + o.substr(0, eq);
    std::replace(pointer.begin(), pointer.end(), '.', '/');
    const std::string raw = o.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    const json::json_pointer ptr(pointer);
    if (!j.contains(ptr)) throw ConfigError("unknown config key: " + o.substr(0, eq));
    j[ptr] = value;
  }
  return ExperimentConfig::from_json(j);
}

// --- data ---

std::vector<TrainingExample> make_examples(const std::vector<qgen::LabeledItem>& items) {
  std::vector<TrainingExample> out(items.size());
  kernels::parallel_for(items.size(), [&](std::size_t i) {
    const auto& it = items[i];
    const auto outcome =
        it.question.removed ? microworld::simulate(it.world, it.question.removed) : it.factual_log;
    out[i] = TrainingExample{policy::encode_question(it.question, it.world, it.factual_log, outcome),
                             it.question};
  });
  return out;
}

namespace {

std::vector<qgen::LabeledItem> generate_split(const ExperimentConfig& cfg, int count, double share,
                                              std::int64_t world_base, std::uint64_t split_index) {
  qgen::DatasetSpec spec;
  spec.world = cfg.world;
  spec.count = count;
  spec.observational_share = share;
  spec.seed = split_index == 0 ? cfg.data.seed
                               : make_stream(cfg.data.seed, StreamTag::dataset, 0, split_index)();
  spec.world_id_base = world_base;
  spec.attempts_per_item = cfg.data.attempts_per_item;
  std::vector<qgen::LabeledItem> items(static_cast<std::size_t>(count));
  kernels::parallel_for(items.size(), [&](std::size_t i) {
    items[i] = qgen::generate_item(spec, static_cast<int>(i));
  });
  return items;
}

Split make_split(std::string name, std::vector<qgen::LabeledItem> items) {
  Split s;
  s.name = std::move(name);
  s.items = std::move(items);
  s.examples = make_examples(s.items);
  return s;
}

}  // namespace

DataBundle build_data(const ExperimentConfig& cfg) {
  cfg.validate();
  DataBundle d;
  d.train = make_split("train", generate_split(cfg, cfg.data.n_train, cfg.data.observational_share,
                                                kTrainWorldBase, 0));
  d.bias = make_split("bias", qgen::build_bias_dataset(d.train.items));
  d.eval_balanced = make_split("eval_balanced",
                               generate_split(cfg, cfg.data.n_eval, cfg.data.eval_balanced_share,
                                              kEvalBalancedWorldBase, 1));
  d.eval_skewed = make_split("eval_skewed", generate_split(cfg, cfg.data.n_eval,
                                                           cfg.data.eval_skewed_share,
                                                           kEvalSkewedWorldBase, 2));
  check_split_hygiene(d);
  return d;
}

void check_split_hygiene(const DataBundle& data) {
  std::set<std::int64_t> train_ids;
  for (const auto& it : data.train.items) train_ids.insert(it.world.id);
  for (const Split* s : {&data.eval_balanced, &data.eval_skewed})
    for (const auto& it : s->items)
      if (train_ids.count(it.world.id))
        throw DatasetError("world id " + std::to_string(it.world.id) + " appears in train and " +
                           s->name);
}

namespace {

template <class Bundle>
auto* split_list(Bundle& d, std::size_t i) {
  decltype(&d.train) all[] = {&d.train, &d.bias, &d.eval_balanced, &d.eval_skewed};
  return all[i];
}

const char* kSplitNames[] = {"train", "bias", "eval_balanced", "eval_skewed"};

}  // namespace

void write_data(const DataBundle& data, const std::string& dir, const std::string& config_hash) {
  fs::create_directories(dir);
  json manifest = {{"schema_version", records::kSchemaVersion},
                   {"config_hash", config_hash},
                   {"splits", json::object()}};
  for (std::size_t s = 0; s < 4; ++s) {
    const Split& split = *split_list(data, s);
    std::vector<json> rows;
    rows.reserve(split.items.size());
    std::int64_t lo = 0, hi = 0;
    for (std::size_t i = 0; i < split.items.size(); ++i) {
      const auto& it = split.items[i];
      rows.push_back({{"record", "item"},
                      {"index", i},
                      {"world", records::world_to_json(it.world, it.factual_log)},
                      {"question", records::question_to_json(it.question)}});
      lo = i ? std::min(lo, it.world.id) : it.world.id;
      hi = i ? std::max(hi, it.world.id) : it.world.id;
    }
    const std::string file = std::string(kSplitNames[s]) + ".jsonl";
    records::write_jsonl((fs::path(dir) / file).string(), std::string("dataset:") + kSplitNames[s],
                         config_hash, rows);
    manifest["splits"][kSplitNames[s]] = {{"file", file},
                                          {"count", split.items.size()},
                                          {"observational_share",
                                           split.items.empty() ? 0.0
                                                               : qgen::observational_share(split.items)},
                                          {"world_id_min", lo},
                                          {"world_id_max", hi}};
  }
  records::write_json((fs::path(dir) / "manifest.json").string(), manifest);
}

DataBundle load_data(const std::string& dir, std::string* config_hash) {
  DataBundle d;
  std::string hash;
  for (std::size_t s = 0; s < 4; ++s) {
    const auto file = records::read_jsonl((fs::path(dir) / (std::string(kSplitNames[s]) + ".jsonl")).string(),
                                          std::string("dataset:") + kSplitNames[s]);
    if (s == 0) hash = file.config_hash;
    if (file.config_hash != hash) throw DatasetError("dataset files carry different config hashes");
    std::vector<qgen::LabeledItem> items;
    items.reserve(file.records.size());
    for (const auto& r : file.records) {
      auto [world, log] = records::world_from_json(r.at("world"));
      if (microworld::simulate(world) != log)
        throw DatasetError("stored factual log disagrees with simulation for world " +
                           std::to_string(world.id));
      items.push_back({std::move(world), std::move(log), records::question_from_json(r.at("question"))});
    }
    *split_list(d, s) = make_split(kSplitNames[s], std::move(items));
  }
  check_split_hygiene(d);
  if (config_hash) *config_hash = hash;
  return d;
}

DataBundle gen_data(const ExperimentConfig& cfg) {
  auto data = build_data(cfg);
  write_data(data, (fs::path(cfg.output_dir) / "data").string(), cfg.hash());
  return data;
}

// --- evaluation ---

namespace {

json tally_json(const Tally& t) {
  return {{"correct", t.correct}, {"total", t.total}, {"accuracy", t.accuracy()}};
}

Tally tally_from(const json& j) { return Tally{j.at("correct"), j.at("total")}; }

}  // namespace

json EvalReport::to_json() const {
  return {{"overall", tally_json(overall)},
          {"observational", tally_json(observational)},
          {"inferential", tally_json(inferential)},
          {"questions", tally_json(questions)},
          {"format_failures", format_failures}};
}

EvalReport EvalReport::from_json(const json& j) {
  EvalReport r;
  r.overall = tally_from(j.at("overall"));
  r.observational = tally_from(j.at("observational"));
  r.inferential = tally_from(j.at("inferential"));
  r.questions = tally_from(j.at("questions"));
  r.format_failures = j.at("format_failures");
  return r;
}

EvalReport score_predictions(std::span<const std::optional<LetterSet>> predictions,
                             std::span<const qgen::Question> questions) {
  if (predictions.size() != questions.size())
    throw ConfigError("prediction and question counts differ");
  EvalReport r;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const auto& q = questions[i];
    const LetterSet p = predictions[i].value_or(LetterSet{});
    if (!predictions[i]) ++r.format_failures;
    for (std::size_t k = 0; k < q.options.size(); ++k) {
      const Letter l = q.options[k].letter;
      const bool ok = p.contains(l) == q.answer_set.contains(l);
      Tally& t = q.option_types[k] == qgen::QuestionType::observational ? r.observational
                                                                         : r.inferential;
      t.correct += ok;
      ++t.total;
      r.overall.correct += ok;
      ++r.overall.total;
    }
    r.questions.correct += p == q.answer_set;
    ++r.questions.total;
  }
  return r;
}

EvalReport evaluate(const PolicyParams& params, std::span<const TrainingExample> data, bool parallel) {
  std::vector<policy::QuestionEncoding> encs;
  std::vector<qgen::Question> questions;
  encs.reserve(data.size());
  questions.reserve(data.size());
  for (const auto& ex : data) {
    encs.push_back(ex.encoding);
    questions.push_back(ex.question);
  }
  const auto responses = parallel ? kernels::greedy_decode_parallel(params, encs)
                                  : kernels::greedy_decode_serial(params, encs);
  std::vector<std::optional<LetterSet>> predictions;
  predictions.reserve(responses.size());
  for (const auto& r : responses) predictions.push_back(policy::parse_answer(r.tokens));
  return score_predictions(predictions, questions);
}

// --- training ---

PolicyParams make_init(const ExperimentConfig& cfg, std::uint64_t seed,
                       std::span<const TrainingExample> data) {
  Rng init_rng = make_stream(seed, StreamTag::init);
  auto params = PolicyParams::random(cfg.arch, init_rng, cfg.warmup.init_scale);
  if (cfg.warmup.steps == 0) return params;
  if (data.empty()) throw DatasetError("format warm-up needs training questions");

  Rng rng = make_stream(seed, StreamTag::warmup);
  TrainerConfig opt;
  opt.optimizer = optim::OptimizerKind::adam;
  opt.learning_rate = cfg.warmup.learning_rate;
  optim::AdamMoments moments;
  const int n = static_cast<int>(data.size());
  std::vector<double> grad(params.size());
  for (int step = 0; step < cfg.warmup.steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (int b = 0; b < cfg.warmup.batch_size; ++b) {
      const auto& ex = data[static_cast<std::size_t>(uniform_int(rng, 0, n - 1))];
      const int k = static_cast<int>(ex.question.options.size());
      const int bits = uniform_int(rng, 1, (1 << k) - 1);
      LetterSet letters;
      for (int i = 0; i < k; ++i)
        if (bits & (1 << i)) letters.insert(ex.question.options[static_cast<std::size_t>(i)].letter);
      if (cfg.warmup.label_share > 0.0 && bernoulli(rng, cfg.warmup.label_share))
        letters = ex.question.answer_set;
      const int bare = static_cast<int>(policy::format_answer(letters).size());
      const int think = uniform_int(rng, 0, std::min(cfg.warmup.max_think, cfg.arch.max_len - bare));
      const auto tokens = policy::format_answer(letters, think);
      const auto g = policy::grad_logprob(params, ex.encoding, tokens);
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i] / cfg.warmup.batch_size;
    }
    optim::apply_update(params.values(), grad, opt, moments);
  }
  if (!params.all_finite()) throw NumericError("format warm-up produced non-finite parameters");
  return params;
}

TrainOutcome train_policy(const PolicyParams& init, const std::optional<PolicyParams>& anchor,
                          std::span<const TrainingExample> data, const TrainerConfig& cfg,
                          const rewards::RewardWeights& weights, const StepCallback& on_step) {
  cfg.validate();
  if (data.empty()) throw DatasetError("training on an empty dataset");
  optim::TrainerState state{init, anchor, {}, 0};
  Rng rollout = make_stream(cfg.seed, StreamTag::rollout);
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  std::uint64_t epoch = 0;
  std::vector<TrainingExample> batch;
  TrainOutcome out{init, {}};
  out.metrics.reserve(static_cast<std::size_t>(cfg.steps));
  for (int step = 0; step < cfg.steps; ++step) {
    batch.clear();
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        order.resize(data.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle = make_stream(cfg.seed, StreamTag::batch_order, epoch++);
        std::shuffle(order.begin(), order.end(), shuffle);
        cursor = 0;
      }
      batch.push_back(data[order[cursor++]]);
    }
    const auto m = optim::train_step(state, batch, cfg, weights, rollout);
    out.metrics.push_back(m);
    if (on_step) on_step(m, state.params);
  }
  out.params = std::move(state.params);
  return out;
}

// --- runs ---

std::string params_digest(const PolicyParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : params.values()) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const EvalReport& SeedRun::eval(const std::string& phase, const std::string& split) const {
  for (const auto& e : evals)
    if (e.phase == phase && e.split == split) return e.report;
  throw ConfigError("no evaluation for phase " + phase + " on " + split);
}

namespace {

json phase_eval_json(const PhaseEval& e) {
  return {{"record", "eval"}, {"seed", e.seed}, {"phase", e.phase}, {"split", e.split},
          {"report", e.report.to_json()}};
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

json RunReport::to_json() const {
  json runs_json = json::array();
  std::map<std::string, std::map<std::string, std::map<std::string, std::vector<double>>>> acc;
  for (const auto& r : runs) {
    json evals = json::array();
    for (const auto& e : r.evals) {
      evals.push_back(phase_eval_json(e));
      auto& slot = acc[e.phase][e.split];
      slot["overall"].push_back(e.report.overall.accuracy());
      slot["observational"].push_back(e.report.observational.accuracy());
      slot["inferential"].push_back(e.report.inferential.accuracy());
      slot["question"].push_back(e.report.questions.accuracy());
    }
    runs_json.push_back({{"seed", r.seed},
                         {"init_digest", r.init_digest},
                         {"grpo_init_digest", r.grpo_init_digest},
                         {"cdpo_init_digest", r.cdpo_init_digest},
                         {"evals", evals}});
  }
  json means = json::object();
  for (const auto& [phase, splits] : acc)
    for (const auto& [split, metrics] : splits)
      for (const auto& [metric, values] : metrics) means[phase][split][metric] = mean_of(values);

  json deltas = json::array();
  const std::string trained = kind == "diagnostic" ? "grpo" : "cdpo";
  std::vector<double> inf_delta, obs_delta;
  for (const auto& r : runs) {
    const auto before = std::find_if(r.evals.begin(), r.evals.end(), [](const PhaseEval& e) {
      return e.phase == "init" && e.split == "eval_balanced";
    });
    for (const std::string arm : {"grpo", "cdpo"}) {
      const auto after = std::find_if(r.evals.begin(), r.evals.end(), [&](const PhaseEval& e) {
        return e.phase == arm && e.split == "eval_balanced";
      });
      if (before == r.evals.end() || after == r.evals.end()) continue;
      const double di = after->report.inferential.accuracy() - before->report.inferential.accuracy();
      const double dob =
          after->report.observational.accuracy() - before->report.observational.accuracy();
      deltas.push_back({{"seed", r.seed}, {"arm", arm}, {"inferential_delta", di},
                        {"observational_delta", dob}});
      if (arm == trained) {
        inf_delta.push_back(di);
        obs_delta.push_back(dob);
      }
    }
  }
  const double mean_inf = mean_of(inf_delta);
  return {{"schema_version", records::kSchemaVersion},
          {"kind", kind},
          {"config_hash", config_hash},
          {"beta", {{"grpo", config.grpo_trainer.beta}, {"cdpo", config.cdpo_trainer.beta}}},
          {"clip_eps", config.grpo_trainer.clip_eps},
          {"group_size", config.grpo_trainer.group_size},
          {"seeds", config.seeds},
          {"config", config.to_json()},
          {"runs", runs_json},
          {"means", means},
          {"delta_table", deltas},
          {"mean_inferential_delta",
           {{"arm", trained},
            {"value", mean_inf},
            {"sign", mean_inf > 0 ? "+" : mean_inf < 0 ? "-" : "0"}}},
          {"mean_observational_delta", {{"arm", trained}, {"value", mean_of(obs_delta)}}}};
}

namespace {

class SeedArtifacts {
 public:
  SeedArtifacts(const ExperimentConfig& cfg, std::uint64_t seed, bool enabled)
      : cfg_(cfg), enabled_(enabled), hash_(cfg.hash()) {
    dir_ = fs::path(cfg.output_dir) / ("seed_" + std::to_string(seed));
    if (enabled_) fs::create_directories(dir_ / "checkpoints");
  }

  void checkpoint(const std::string& name, const PolicyParams& p, std::vector<std::string> lineage) {
    if (enabled_)
      policy::save_checkpoint((dir_ / (name + ".ckpt")).string(), p,
                              policy::CheckpointMeta{hash_, std::move(lineage)});
  }

  // Streams metrics and periodic checkpoints while the phase trains.
  StepCallback stream(const std::string& phase, const std::vector<std::string>& lineage) {
    if (!enabled_) return {};
    auto writer = std::make_shared<records::JsonlWriter>(
        (dir_ / ("metrics_" + phase + ".jsonl")).string(), "metrics:" + phase, hash_);
    const int every = cfg_.checkpoint_every;
    const fs::path dir = dir_;
    const std::string hash = hash_;
    return [writer, every, dir, hash, phase, lineage](const optim::StepMetrics& m,
                                                      const PolicyParams& p) {
      writer->write(records::metrics_to_json(m));
      const int done = m.step + 1;
      if (every > 0 && done % every == 0) {
        auto l = lineage;
        l.push_back(phase + ":steps=" + std::to_string(done));
        policy::save_checkpoint(
            (dir / "checkpoints" / (phase + "_step" + std::to_string(done) + ".ckpt")).string(), p,
            policy::CheckpointMeta{hash, l});
      }
    };
  }

  void evals(const std::vector<PhaseEval>& evals) {
    if (!enabled_) return;
    std::vector<json> rows;
    for (const auto& e : evals) rows.push_back(phase_eval_json(e));
    records::write_jsonl((dir_ / "evals.jsonl").string(), "evals", hash_, rows);
  }

 private:
  const ExperimentConfig& cfg_;
  bool enabled_;
  std::string hash_;
  fs::path dir_;
};

TrainerConfig seeded(TrainerConfig t, std::uint64_t seed, bool nested) {
  t.seed = seed;
  if (nested) t.use_openmp = false;
  return t;
}

template <class PerSeed>
RunReport run_seeds(const std::string& kind, const ExperimentConfig& cfg, const DataBundle& data,
                    const RunOptions& options, PerSeed per_seed) {
  cfg.validate();
  check_split_hygiene(data);
  if (data.train.examples.empty()) throw DatasetError("training split is empty");
  RunReport report;
  report.kind = kind;
  report.config_hash = cfg.hash();
  report.config = cfg;
  report.runs.resize(cfg.seeds.size());
  if (options.write_artifacts) {
    fs::create_directories(cfg.output_dir);
    records::write_json((fs::path(cfg.output_dir) / "config.json").string(), cfg.to_json());
  }
  std::mutex log_mutex;
  auto log = [&](const std::string& msg) {
    if (!options.log) return;
    std::lock_guard lock(log_mutex);
    options.log(msg);
  };
  auto body = [&](std::size_t i) {
    report.runs[i] = per_seed(cfg.seeds[i], log, options.parallel_seeds);
  };
  if (options.parallel_seeds) {
    kernels::parallel_for(cfg.seeds.size(), body);
  } else {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) body(i);
  }
  if (options.write_artifacts)
    records::write_json((fs::path(cfg.output_dir) / (kind + "_report.json")).string(),
                        report.to_json());
  return report;
}

}  // namespace

RunReport run_diagnostic(const ExperimentConfig& cfg, const DataBundle& data, const RunOptions& options) {
  return run_seeds("diagnostic", cfg, data, options,
                   [&](std::uint64_t seed, auto& log, bool nested) {
    SeedArtifacts art(cfg, seed, options.write_artifacts);
    SeedRun run;
    run.seed = seed;
    const std::string init_tag = "init:seed=" + std::to_string(seed);
    const auto init = make_init(cfg, seed, data.train.examples);
    run.init_digest = run.grpo_init_digest = params_digest(init);
    art.checkpoint("init", init, {init_tag});
    run.evals.push_back({seed, "init", "eval_balanced", evaluate(init, data.eval_balanced.examples, !nested)});
    log("seed " + std::to_string(seed) + ": init evaluated");

    auto grpo = train_policy(init, init, data.train.examples, seeded(cfg.grpo_trainer, seed, nested),
                             cfg.reward_weights, art.stream("grpo", {init_tag}));
    art.checkpoint("grpo", grpo.params,
                   {init_tag, "grpo:steps=" + std::to_string(cfg.grpo_trainer.steps)});
    run.grpo_metrics = std::move(grpo.metrics);
    run.evals.push_back(
        {seed, "grpo", "eval_balanced", evaluate(grpo.params, data.eval_balanced.examples, !nested)});
    art.evals(run.evals);
    log("seed " + std::to_string(seed) + ": grpo done");
    return run;
  });
}

RunReport run_pipeline(const ExperimentConfig& cfg, const DataBundle& data, const RunOptions& options) {
  if (data.bias.examples.empty()) throw DatasetError("bias split is empty");
  return run_seeds("pipeline", cfg, data, options, [&](std::uint64_t seed, auto& log, bool nested) {
    SeedArtifacts art(cfg, seed, options.write_artifacts);
    SeedRun run;
    run.seed = seed;
    const std::string s = std::to_string(seed);
    const std::string init_tag = "init:seed=" + s;
    auto eval_both = [&](const std::string& phase, const PolicyParams& p) {
      run.evals.push_back({seed, phase, "eval_balanced", evaluate(p, data.eval_balanced.examples, !nested)});
      run.evals.push_back({seed, phase, "eval_skewed", evaluate(p, data.eval_skewed.examples, !nested)});
    };

    const auto init = make_init(cfg, seed, data.train.examples);
    run.init_digest = params_digest(init);
    art.checkpoint("init", init, {init_tag});
    eval_both("init", init);
    log("seed " + s + ": init evaluated");

    const std::string bias_tag = "bias:steps=" + std::to_string(cfg.bias_trainer.steps);
    auto bias = train_policy(init, std::nullopt, data.bias.examples,
                             seeded(cfg.bias_trainer, seed, nested), cfg.reward_weights,
                             art.stream("bias", {init_tag}));
    art.checkpoint("bias", bias.params, {init_tag, bias_tag});
    run.bias_metrics = std::move(bias.metrics);
    eval_both("bias", bias.params);
    log("seed " + s + ": bias model done");

    run.cdpo_init_digest = params_digest(init);
    auto cdpo = train_policy(init, bias.params, data.train.examples,
                             seeded(cfg.cdpo_trainer, seed, nested), cfg.reward_weights,
                             art.stream("cdpo", {init_tag, bias_tag}));
    art.checkpoint("cdpo", cdpo.params,
                   {init_tag, bias_tag, "cdpo:steps=" + std::to_string(cfg.cdpo_trainer.steps)});
    run.cdpo_metrics = std::move(cdpo.metrics);
    eval_both("cdpo", cdpo.params);
    log("seed " + s + ": cdpo done");

    run.grpo_init_digest = params_digest(init);
    auto grpo = train_policy(init, init, data.train.examples, seeded(cfg.grpo_trainer, seed, nested),
                             cfg.reward_weights, art.stream("grpo", {init_tag}));
    art.checkpoint("grpo", grpo.params,
                   {init_tag, "grpo:steps=" + std::to_string(cfg.grpo_trainer.steps)});
    run.grpo_metrics = std::move(grpo.metrics);
    eval_both("grpo", grpo.params);
    art.evals(run.evals);
    log("seed " + s + ": grpo done");
    return run;
  });
}

// --- report ---

const std::vector<std::string>& accuracy_columns() {
  static const std::vector<std::string> cols = {
      "seed",          "phase",           "split",
      "overall_acc",   "observational_acc", "inferential_acc",
      "question_acc",  "overall_correct", "overall_total",
      "observational_correct", "observational_total", "inferential_correct",
      "inferential_total", "questions_correct", "questions_total",
      "format_failures"};
  return cols;
}

namespace {

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
}

bool accuracy_matches(const json& tally) {
  const long c = tally.at("correct"), t = tally.at("total");
  const double expected = t ? static_cast<double>(c) / static_cast<double>(t) : 0.0;
  return std::abs(expected - tally.at("accuracy").get<double>()) <= 1e-12;
}

}  // namespace

ReportSummary report(const std::string& run_dir) {
  ReportSummary out;
  const fs::path root(run_dir);
  std::vector<std::vector<std::string>> rows, long_rows;
  std::map<std::string, std::map<std::string, std::map<std::string, std::vector<double>>>> acc;
  std::map<std::string, std::vector<double>> final_reward;

  std::vector<std::uint64_t> seeds;
  std::string hash;
  if (fs::exists(root / "config.json")) {
    try {
      const auto cfg = ExperimentConfig::from_json(records::read_json((root / "config.json").string()));
      seeds = cfg.seeds;
      hash = cfg.hash();
    } catch (const std::exception& e) {
      out.warnings.push_back(std::string("unreadable config.json: ") + e.what());
    }
  } else {
    out.warnings.push_back("missing config.json");
  }
  if (seeds.empty() && fs::is_directory(root)) {
    std::set<std::uint64_t> found;
    for (const auto& entry : fs::directory_iterator(root)) {
      const auto name = entry.path().filename().string();
      if (entry.is_directory() && name.rfind("seed_", 0) == 0) {
        std::uint64_t s = 0;
        const auto r = std::from_chars(name.data() + 5, name.data() + name.size(), s);
        if (r.ec == std::errc() && r.ptr == name.data() + name.size()) found.insert(s);
      }
    }
    seeds.assign(found.begin(), found.end());
  }

  for (const auto seed : seeds) {
    const fs::path dir = root / ("seed_" + std::to_string(seed));
    const std::string sd = "seed_" + std::to_string(seed);
    const fs::path evals_path = dir / "evals.jsonl";
    if (!fs::exists(evals_path)) {
      out.warnings.push_back("missing " + sd + "/evals.jsonl");
      continue;
    }
    records::JsonlFile file;
    try {
      file = records::read_jsonl(evals_path.string(), "evals");
    } catch (const IoError& e) {
      out.warnings.push_back(e.what());
      continue;
    }
    if (!hash.empty() && file.config_hash != hash)
      out.warnings.push_back(sd + "/evals.jsonl carries config hash " + file.config_hash +
                             ", expected " + hash);
    std::set<std::string> phases;
    for (const auto& rec : file.records) {
      const std::string phase = rec.at("phase"), split = rec.at("split");
      phases.insert(phase);
      const auto& rj = rec.at("report");
      for (const char* k : {"overall", "observational", "inferential", "questions"})
        if (!accuracy_matches(rj.at(k)))
          out.warnings.push_back(sd + " " + phase + "/" + split + ": stored " + k +
                                 " accuracy disagrees with its counts");
      const auto r = EvalReport::from_json(rj);
      if (r.observational.total + r.inferential.total != r.overall.total ||
          r.observational.correct + r.inferential.correct != r.overall.correct)
        out.warnings.push_back(sd + " " + phase + "/" + split +
                               ": per-type counts do not sum to the overall count");
      rows.push_back(std::vector<std::string>{std::to_string(seed), phase, split, fmt(r.overall.accuracy()),
                               fmt(r.observational.accuracy()), fmt(r.inferential.accuracy()),
                               fmt(r.questions.accuracy()), std::to_string(r.overall.correct),
                               std::to_string(r.overall.total), std::to_string(r.observational.correct),
                               std::to_string(r.observational.total),
                               std::to_string(r.inferential.correct),
                               std::to_string(r.inferential.total), std::to_string(r.questions.correct),
                               std::to_string(r.questions.total), std::to_string(r.format_failures)});
      const std::pair<const char*, double> metrics[] = {
          {"overall", r.overall.accuracy()},
          {"observational", r.observational.accuracy()},
          {"inferential", r.inferential.accuracy()},
          {"question", r.questions.accuracy()}};
      for (const auto& [name, value] : metrics) {
        long_rows.push_back({std::to_string(seed), phase, split, name, fmt(value)});
        acc[phase][split][name].push_back(value);
      }
    }
    for (const auto& phase : phases) {
      if (!fs::exists(dir / (phase + ".ckpt"))) out.warnings.push_back("missing " + sd + "/" + phase + ".ckpt");
      if (phase == "init") continue;
      const fs::path mpath = dir / ("metrics_" + phase + ".jsonl");
      if (!fs::exists(mpath)) {
        out.warnings.push_back("missing " + sd + "/metrics_" + phase + ".jsonl");
        continue;
      }
      try {
        const auto m = records::read_jsonl(mpath.string(), "metrics:" + phase);
        std::vector<double> tail;
        const std::size_t n = m.records.size();
        for (std::size_t i = n > 50 ? n - 50 : 0; i < n; ++i)
          tail.push_back(m.records[i].at("reward_mean").get<double>());
        if (!tail.empty()) final_reward[phase].push_back(mean_of(tail));
      } catch (const std::exception& e) {
        out.warnings.push_back(e.what());
      }
    }
  }

  out.rows = rows.size();
  if (fs::is_directory(root)) {
    write_csv(root / "accuracy.csv", accuracy_columns(), rows);
    write_csv(root / "accuracy_long.csv", {"seed", "phase", "split", "metric", "value"}, long_rows);
  } else {
    out.warnings.push_back("run directory does not exist: " + run_dir);
  }

  json means = json::object();
  for (const auto& [phase, splits] : acc)
    for (const auto& [split, metrics] : splits)
      for (const auto& [metric, values] : metrics) {
        means[phase][split][metric] = mean_of(values);
        means[phase][split]["seeds"] = values.size();
      }
  json rewards = json::object();
  for (const auto& [phase, values] : final_reward) rewards[phase] = mean_of(values);
  out.summary = {{"schema_version", records::kSchemaVersion},
                 {"config_hash", hash},
                 {"columns", accuracy_columns()},
                 {"rows", out.rows},
                 {"means", means},
                 {"final_reward_mean_last50", rewards},
                 {"warnings", out.warnings}};
  if (fs::is_directory(root)) records::write_json((root / "summary.json").string(), out.summary);
  return out;
}

}  // namespace cdpo::harness
