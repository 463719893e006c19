#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdpo/microworld.hpp"
#include "cdpo/optim.hpp"
#include "cdpo/policy.hpp"
#include "cdpo/qgen.hpp"
#include "cdpo/rewards.hpp"

// Experiment orchestration: data generation, the capability-conflict
// diagnostic, the two-phase bias -> CDPO pipeline with a GRPO control arm,
// option-level evaluation and report emission.
namespace cdpo::harness {

using json = nlohmann::json;
using optim::TrainerConfig;
using optim::TrainingExample;
using policy::PolicyParams;

struct DataConfig {
  std::uint64_t seed = 2024;
  int n_train = 1000;
  int n_eval = 400;
  double observational_share = 0.74;
  double eval_balanced_share = 0.5;
  // 11,524 observational of 12,748 options in the full-scale test set.
  double eval_skewed_share = 11524.0 / 12748.0;
  int attempts_per_item = 400;
};

// Supervised warm-up applied to the random init: maximum likelihood on
// well-formed answers, each naming the true answer set with probability
// label_share and a uniformly random option subset otherwise. Stands in for
// a pretrained base model that follows the answer format and is partly
// competent.
struct WarmupConfig {
  int steps = 300;
  int batch_size = 32;
  double learning_rate = 0.01;
  double init_scale = 0.3;
  int max_think = 1;
  // 0 gives a format-only base policy.
  double label_share = 0.6;
};

struct ExperimentConfig {
  microworld::WorldConfig world;
  DataConfig data;
  std::vector<std::uint64_t> seeds;
  policy::Architecture arch;
  WarmupConfig warmup;
  rewards::RewardWeights reward_weights;
  TrainerConfig bias_trainer;
  TrainerConfig cdpo_trainer;
  TrainerConfig grpo_trainer;
  std::string output_dir = "runs/default";
  int checkpoint_every = 100;

  static ExperimentConfig defaults();
  // Keys absent from j keep their defaults; unknown keys throw ConfigError.
  static ExperimentConfig from_json(const json& j);
  json to_json() const;
  std::string hash() const;
  void validate() const;  // throws ConfigError
};

ExperimentConfig load_config(const std::string& path);

// Applies "a.b.c=value" overrides to the config's JSON form; value is parsed
// as JSON when possible, else taken as a string.
ExperimentConfig apply_overrides(const ExperimentConfig& cfg, std::span<const std::string> overrides);

// --- data ---

struct Split {
  std::string name;
  std::vector<qgen::LabeledItem> items;
  std::vector<TrainingExample> examples;  // examples[i] encodes items[i]
};

struct DataBundle {
  Split train;
  Split bias;
  Split eval_balanced;
  Split eval_skewed;
};

// World-id bases keep the splits disjoint.
inline constexpr std::int64_t kTrainWorldBase = 0;
inline constexpr std::int64_t kEvalBalancedWorldBase = 1'000'000'000;
inline constexpr std::int64_t kEvalSkewedWorldBase = 2'000'000'000;

std::vector<TrainingExample> make_examples(const std::vector<qgen::LabeledItem>& items);

DataBundle build_data(const ExperimentConfig& cfg);

// Writes <dir>/{train,bias,eval_balanced,eval_skewed}.jsonl and manifest.json.
void write_data(const DataBundle& data, const std::string& dir, const std::string& config_hash);
DataBundle load_data(const std::string& dir, std::string* config_hash = nullptr);

// build_data + write_data under <output_dir>/data.
DataBundle gen_data(const ExperimentConfig& cfg);

// Throws DatasetError if any world id is shared between train and an eval split.
void check_split_hygiene(const DataBundle& data);

// --- evaluation ---

struct Tally {
  long correct = 0;
  long total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
  friend bool operator==(const Tally&, const Tally&) = default;
};

struct EvalReport {
  Tally overall;
  Tally observational;
  Tally inferential;
  Tally questions;  // exact match
  long format_failures = 0;

  json to_json() const;
  static EvalReport from_json(const json& j);
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// nullopt predictions (format failures) count as the empty set.
EvalReport score_predictions(std::span<const std::optional<LetterSet>> predictions,
                             std::span<const qgen::Question> questions);

// Greedy decoding per question.
EvalReport evaluate(const PolicyParams& params, std::span<const TrainingExample> data,
                    bool parallel = true);

// --- training ---

PolicyParams make_init(const ExperimentConfig& cfg, std::uint64_t seed,
                       std::span<const TrainingExample> data);

using StepCallback = std::function<void(const optim::StepMetrics&, const PolicyParams&)>;

struct TrainOutcome {
  PolicyParams params;
  std::vector<optim::StepMetrics> metrics;
};

// Epoch-shuffled minibatches (batch_order stream of cfg.seed); one rollout
// stream per run. anchor is pi_ref for grpo and pi_bias for cdpo.
TrainOutcome train_policy(const PolicyParams& init, const std::optional<PolicyParams>& anchor,
                          std::span<const TrainingExample> data, const TrainerConfig& cfg,
                          const rewards::RewardWeights& weights, const StepCallback& on_step = {});

// --- runs ---

struct PhaseEval {
  std::uint64_t seed = 0;
  std::string phase;  // init | bias | cdpo | grpo
  std::string split;  // eval_balanced | eval_skewed
  EvalReport report;
};

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<PhaseEval> evals;
  std::vector<optim::StepMetrics> bias_metrics;
  std::vector<optim::StepMetrics> cdpo_metrics;
  std::vector<optim::StepMetrics> grpo_metrics;
  // Parameters of the shared init, for the controlled-comparison check.
  std::string init_digest;
  std::string grpo_init_digest;
  std::string cdpo_init_digest;

  const EvalReport& eval(const std::string& phase, const std::string& split) const;
};

struct RunReport {
  std::string kind;  // diagnostic | pipeline
  std::string config_hash;
  ExperimentConfig config;
  std::vector<SeedRun> runs;

  json to_json() const;
};

struct RunOptions {
  bool write_artifacts = true;
  bool parallel_seeds = true;
  std::function<void(const std::string&)> log;
};

// Init eval, GRPO on the biased mixture, re-eval on the balanced split.
RunReport run_diagnostic(const ExperimentConfig& cfg, const DataBundle& data,
                         const RunOptions& options = {});

// Phase 1 bias model, phase 2 CDPO against it, plus a GRPO control arm from
// the same init, data order and rollout seeds.
RunReport run_pipeline(const ExperimentConfig& cfg, const DataBundle& data,
                       const RunOptions& options = {});

struct ReportSummary {
  std::vector<std::string> warnings;
  std::size_t rows = 0;
  json summary;
};

// Columns of accuracy.csv, in order.
const std::vector<std::string>& accuracy_columns();

// Reads <run_dir>/seed_*/evals.jsonl and writes accuracy.csv,
// accuracy_long.csv and summary.json into run_dir. Missing artifacts become
// warnings.
ReportSummary report(const std::string& run_dir);

// Hex digest of a parameter vector's bytes.
std::string params_digest(const PolicyParams& params);

}  // namespace cdpo::harness
