// cdpo: dataset generation, training, evaluation and reports for the
// counterfactual micro-world experiments.
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "cdpo/errors.hpp"
#include "cdpo/harness.hpp"
#include "cdpo/records.hpp"

namespace fs = std::filesystem;
using namespace cdpo;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output;
  bool quiet = false;
};

harness::ExperimentConfig resolve(const Common& c) {
  auto cfg = c.config_path.empty() ? harness::ExperimentConfig::defaults()
                                   : harness::load_config(c.config_path);
  cfg = harness::apply_overrides(cfg, c.overrides);
  if (!c.output.empty()) cfg.output_dir = c.output;
  if (const char* root = std::getenv("CDPO_OUTPUT_ROOT"); root && *root && fs::path(cfg.output_dir).is_relative())
    cfg.output_dir = (fs::path(root) / cfg.output_dir).string();
  cfg.validate();
  return cfg;
}

harness::DataBundle data_for(const harness::ExperimentConfig& cfg) {
  const auto dir = fs::path(cfg.output_dir) / "data";
  if (!fs::exists(dir / "manifest.json"))
    throw IoError("no dataset under " + dir.string() + "; run gen-data first");
  return harness::load_data(dir.string());
}

const harness::Split& split_named(const harness::DataBundle& d, const std::string& name) {
  if (name == "train") return d.train;
  if (name == "bias") return d.bias;
  if (name == "eval_balanced") return d.eval_balanced;
  if (name == "eval_skewed") return d.eval_skewed;
  throw ConfigError("unknown split: " + name);
}

harness::RunOptions options_for(const Common& c) {
  harness::RunOptions o;
  if (!c.quiet) o.log = [](const std::string& m) { std::cerr << m << '\n'; };
  return o;
}

void print_eval(const std::string& label, const harness::EvalReport& r) {
  std::cout << label << ": overall " << r.overall.accuracy() << " observational "
            << r.observational.accuracy() << " inferential " << r.inferential.accuracy()
            << " exact " << r.questions.accuracy() << '\n';
}

void print_means(const harness::RunReport& report) {
  const auto j = report.to_json();
  std::cout << j.at("means").dump(2) << '\n';
  const auto& d = j.at("mean_inferential_delta");
  std::cout << "mean inferential delta (" << d.at("arm").get<std::string>()
            << " vs init, balanced split): " << d.at("sign").get<std::string>() << " "
            << d.at("value").get<double>() << '\n';
}

// Trains one phase for one seed and writes <output>/seed_<s>/<phase>.ckpt and
// metrics_<phase>.jsonl.
void train_one(const harness::ExperimentConfig& cfg, optim::Mode mode, std::uint64_t seed,
               const std::string& init_path, const std::string& anchor_path) {
  const auto data = data_for(cfg);
  const auto hash = cfg.hash();
  const fs::path dir = fs::path(cfg.output_dir) / ("seed_" + std::to_string(seed));
  fs::create_directories(dir);

  policy::CheckpointMeta init_meta;
  policy::PolicyParams init;
  if (init_path.empty()) {
    init = harness::make_init(cfg, seed, data.train.examples);
    init_meta.lineage = {"init:seed=" + std::to_string(seed)};
    policy::save_checkpoint((dir / "init.ckpt").string(), init, {hash, init_meta.lineage});
  } else {
    init = policy::load_checkpoint(init_path, &init_meta);
  }

  optim::TrainerConfig tc = mode == optim::Mode::grpo   ? cfg.grpo_trainer
                            : mode == optim::Mode::cdpo ? cfg.cdpo_trainer
                                                        : cfg.bias_trainer;
  tc.seed = seed;
  std::optional<policy::PolicyParams> anchor;
  auto lineage = init_meta.lineage;
  if (mode == optim::Mode::grpo) anchor = anchor_path.empty() ? init : policy::load_checkpoint(anchor_path);
  if (mode == optim::Mode::cdpo) {
    const auto path = anchor_path.empty() ? (dir / "bias.ckpt").string() : anchor_path;
    policy::CheckpointMeta bias_meta;
    anchor = policy::load_checkpoint(path, &bias_meta);
    if (!bias_meta.lineage.empty()) lineage.push_back(bias_meta.lineage.back());
  }
  const std::string phase = optim::to_string(mode);
  const auto& examples = mode == optim::Mode::bias_no_kl ? data.bias.examples : data.train.examples;
  records::JsonlWriter metrics((dir / ("metrics_" + phase + ".jsonl")).string(), "metrics:" + phase, hash);
  auto out = harness::train_policy(init, anchor, examples, tc, cfg.reward_weights,
                                   [&](const optim::StepMetrics& m, const policy::PolicyParams&) {
                                     metrics.write(records::metrics_to_json(m));
                                   });
  lineage.push_back(phase + ":steps=" + std::to_string(tc.steps));
  policy::save_checkpoint((dir / (phase + ".ckpt")).string(), out.params, {hash, lineage});
  const auto& last = out.metrics.back();
  std::cout << phase << " seed " << seed << ": final reward_mean " << last.reward_mean << " kl "
            << last.kl_mean << '\n';
  print_eval("eval_balanced", harness::evaluate(out.params, data.eval_balanced.examples));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual micro-world GRPO/CDPO experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("-c,--config", common.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("-s,--set", common.overrides, "Override a config key, e.g. data.n_train=500");
  app.add_option("-o,--output", common.output, "Output directory (relative paths honor CDPO_OUTPUT_ROOT)");
  app.add_flag("-q,--quiet", common.quiet, "Suppress progress messages");

  auto* gen = app.add_subcommand("gen-data", "Generate train/eval splits and the bias dataset");

  std::uint64_t seed = 0;
  std::string init_path, anchor_path;
  auto* train_bias = app.add_subcommand("train-bias", "Train the bias model on the bias dataset");
  train_bias->add_option("--seed", seed, "Run seed");
  train_bias->add_option("--init", init_path, "Initial checkpoint (default: fresh init)");

  std::string mode_name;
  auto* train = app.add_subcommand("train", "Train one policy");
  train->add_option("--mode", mode_name, "Objective")
      ->required()
      ->check(CLI::IsMember({"grpo", "cdpo", "bias"}));
  train->add_option("--seed", seed, "Run seed");
  train->add_option("--init", init_path, "Initial checkpoint (default: fresh init)");
  train->add_option("--anchor", anchor_path,
                    "Frozen reference (grpo) or bias model (cdpo); defaults to the init or seed_<s>/bias.ckpt");

  std::string checkpoint, split = "eval_balanced";
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with greedy decoding");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", split, "train | bias | eval_balanced | eval_skewed");

  auto* diagnose = app.add_subcommand("diagnose", "GRPO on the biased mixture, before/after per type");
  auto* pipeline = app.add_subcommand("pipeline", "Bias model, CDPO, and a GRPO control arm");

  std::string run_dir;
  auto* rep = app.add_subcommand("report", "Aggregate run artifacts into CSV and JSON summaries");
  rep->add_option("--run-dir", run_dir, "Run directory (default: the config's output_dir)");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve(common);
    if (*gen) {
      const auto data = harness::gen_data(cfg);
      std::cout << "wrote " << (fs::path(cfg.output_dir) / "data").string() << ": train "
                << data.train.items.size() << " (observational share "
                << qgen::observational_share(data.train.items) << "), bias " << data.bias.items.size()
                << ", eval_balanced " << data.eval_balanced.items.size() << ", eval_skewed "
                << data.eval_skewed.items.size() << '\n';
    } else if (*train_bias) {
      train_one(cfg, optim::Mode::bias_no_kl, seed, init_path, "");
    } else if (*train) {
      train_one(cfg, optim::mode_from_string(mode_name), seed, init_path, anchor_path);
    } else if (*eval) {
      const auto data = data_for(cfg);
      const auto params = policy::load_checkpoint(checkpoint);
      const auto r = harness::evaluate(params, split_named(data, split).examples);
      std::cout << r.to_json().dump(2) << '\n';
    } else if (*diagnose) {
      const auto report = harness::run_diagnostic(cfg, data_for(cfg), options_for(common));
      print_means(report);
    } else if (*pipeline) {
      const auto report = harness::run_pipeline(cfg, data_for(cfg), options_for(common));
      print_means(report);
    } else if (*rep) {
      const auto summary = harness::report(run_dir.empty() ? cfg.output_dir : run_dir);
      std::cout << summary.rows << " rows\n";
      for (const auto& w : summary.warnings) std::cerr << "warning: " << w << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
