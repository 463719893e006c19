#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cdpo/errors.hpp"
#include "cdpo/harness.hpp"
#include "cdpo/records.hpp"

using namespace cdpo;
using namespace cdpo::harness;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "cdpo_harness_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig tiny(const fs::path& out) {
  auto cfg = ExperimentConfig::defaults();
  cfg.data.n_train = 60;
  cfg.data.n_eval = 30;
  cfg.seeds = {0, 1};
  cfg.warmup.steps = 10;
  for (auto* t : {&cfg.bias_trainer, &cfg.cdpo_trainer, &cfg.grpo_trainer}) {
    t->steps = 4;
    t->batch_size = 4;
    t->group_size = 4;
  }
  cfg.checkpoint_every = 2;
  cfg.output_dir = out.string();
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

qgen::Question four_options(Letter correct) {
  qgen::Question q;
  for (int i = 0; i < 4; ++i) {
    q.options.push_back({letter_at(i), {0, i + 1}});
    q.option_types.push_back(i % 2 ? qgen::QuestionType::inferential : qgen::QuestionType::observational);
  }
  q.answer_set.insert(correct);
  return q;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("config round trip and validation") {
    const auto cfg = ExperimentConfig::defaults();
    CHECK(cfg.seeds.size() >= 10);
    const auto back = ExperimentConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());
    CHECK(back.hash() == cfg.hash());
    CHECK(ExperimentConfig::from_json(json::object()).hash() == cfg.hash());
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"dataa", json::object()}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"data", {{"n_trian", 5}}}}), ConfigError);

    const std::vector<std::string> sets{"data.n_train=500", "trainers.cdpo.beta=0.001", "output_dir=runs/x"};
    const auto o = apply_overrides(cfg, sets);
    CHECK(o.data.n_train == 500);
    CHECK(o.cdpo_trainer.beta == 0.001);
    CHECK(o.output_dir == "runs/x");
    CHECK(o.hash() != cfg.hash());
    auto moved = cfg;
    moved.output_dir = "elsewhere";
    CHECK(moved.hash() == cfg.hash());
    const std::vector<std::string> bad{"data.n_train"};
    CHECK_THROWS_AS(apply_overrides(cfg, bad), ConfigError);
    const std::vector<std::string> cap{"trainers.cdpo.kl_cap=0.2"};
    CHECK(apply_overrides(cfg, cap).cdpo_trainer.kl_cap == 0.2);

    auto invalid = cfg;
    invalid.data.observational_share = 1.5;
    CHECK_THROWS_AS(invalid.validate(), ConfigError);
  }

  TEST_CASE("scoring examples") {
    std::vector<qgen::Question> qs;
    for (int i = 0; i < 8; ++i) qs.push_back(four_options(letter_at(i % 4)));

    std::vector<std::optional<LetterSet>> perfect;
    for (const auto& q : qs) perfect.push_back(q.answer_set);
    const auto r = score_predictions(perfect, qs);
    CHECK(r.overall.accuracy() == 1.0);
    CHECK(r.observational.accuracy() == 1.0);
    CHECK(r.inferential.accuracy() == 1.0);
    CHECK(r.questions.accuracy() == 1.0);

    const std::vector<std::optional<LetterSet>> failures(qs.size(), std::nullopt);
    const auto f = score_predictions(failures, qs);
    CHECK(f.format_failures == 8);
    CHECK(f.overall.accuracy() == 0.75);
    CHECK(f.questions.accuracy() == 0.0);
    CHECK(f.observational.total + f.inferential.total == f.overall.total);
  }

  TEST_CASE("random subsets score their enumerated expectation") {
    // Expected option accuracy over all 16 subsets of 4 letters, one correct.
    const auto q = four_options(Letter::B);
    double expected = 0.0, second = 0.0;
    for (unsigned s = 0; s < 16; ++s) {
      const std::vector<std::optional<LetterSet>> p{LetterSet(static_cast<std::uint8_t>(s))};
      const double a = score_predictions(p, std::vector{q}).overall.accuracy();
      expected += a / 16.0;
      second += a * a / 16.0;
    }
    const int n = 10000;
    Rng rng = make_stream(4, StreamTag::test);
    std::vector<qgen::Question> qs;
    std::vector<std::optional<LetterSet>> preds;
    for (int i = 0; i < n; ++i) {
      qs.push_back(four_options(letter_at(uniform_int(rng, 0, 3))));
      preds.push_back(LetterSet(static_cast<std::uint8_t>(uniform_int(rng, 0, 15))));
    }
    const double acc = score_predictions(preds, qs).overall.accuracy();
    const double sigma = std::sqrt((second - expected * expected) / n);
    CHECK(std::abs(acc - expected) <= 3.0 * sigma);
  }

  TEST_CASE("data generation") {
    const auto dir = fresh_dir("data");
    auto cfg = tiny(dir / "a");
    const auto a = gen_data(cfg);
    CHECK(a.train.items.size() == 60);
    CHECK(a.eval_balanced.items.size() == 30);
    CHECK_FALSE(a.bias.items.empty());
    CHECK_NOTHROW(check_split_hygiene(a));
    cfg.output_dir = (dir / "b").string();
    gen_data(cfg);
    for (const char* f : {"train.jsonl", "bias.jsonl", "eval_balanced.jsonl", "eval_skewed.jsonl", "manifest.json"})
      CHECK(slurp(dir / "a" / "data" / f) == slurp(dir / "b" / "data" / f));

    std::string hash;
    const auto loaded = load_data((dir / "a" / "data").string(), &hash);
    CHECK(hash == cfg.hash());
    CHECK(loaded.train.examples.size() == a.train.examples.size());
    for (std::size_t i = 0; i < a.train.examples.size(); ++i)
      CHECK(loaded.train.examples[i].encoding == a.train.examples[i].encoding);

    auto leaky = a;
    leaky.eval_skewed.items.push_back(a.train.items[0]);
    CHECK_THROWS_AS(check_split_hygiene(leaky), DatasetError);
  }

  TEST_CASE("mixture share at default size") {
    auto cfg = ExperimentConfig::defaults();
    const auto d = build_data(cfg);
    const double share = qgen::observational_share(d.train.items);
    CHECK(share >= 0.71);
    CHECK(share <= 0.77);
  }

  TEST_CASE("diagnostic structure") {
    const auto dir = fresh_dir("diag");
    const auto cfg = tiny(dir);
    const auto data = build_data(cfg);
    const auto rep = run_diagnostic(cfg, data);
    std::size_t evals = 0;
    for (const auto& r : rep.runs) {
      evals += r.evals.size();
      REQUIRE(r.grpo_metrics.size() == 4);
      for (std::size_t i = 0; i < r.grpo_metrics.size(); ++i) CHECK(r.grpo_metrics[i].step == static_cast<int>(i));
    }
    CHECK(evals == cfg.seeds.size() * 2);
    const auto j = rep.to_json();
    CHECK(j.at("mean_inferential_delta").contains("sign"));
  }

  TEST_CASE("pipeline and report") {
    const auto dir = fresh_dir("pipe");
    const auto cfg = tiny(dir);
    const auto data = build_data(cfg);
    const auto rep = run_pipeline(cfg, data, {.write_artifacts = true, .parallel_seeds = false, .log = {}});
    const auto j = rep.to_json();
    for (const char* k : {"beta", "clip_eps", "group_size"}) CHECK(j.dump().find(k) != std::string::npos);
    CHECK(j.at("config_hash") == cfg.hash());
    CHECK(j.at("seeds").size() == 2);
    for (const auto& r : rep.runs) {
      CHECK(r.cdpo_init_digest == r.init_digest);
      CHECK(r.grpo_init_digest == r.init_digest);
      CHECK(r.evals.size() == 8);
    }
    CHECK(fs::exists(dir / "seed_0" / "cdpo.ckpt"));
    CHECK(fs::exists(dir / "seed_1" / "metrics_bias.jsonl"));
    CHECK(fs::exists(dir / "seed_0" / "checkpoints"));

    const auto summary = report(dir.string());
    CHECK(summary.warnings.empty());
    CHECK(summary.rows == 16);
    std::ifstream csv(dir / "accuracy.csv");
    std::string header;
    std::getline(csv, header);
    std::string expected;
    for (const auto& c : accuracy_columns()) expected += (expected.empty() ? "" : ",") + c;
    CHECK(header == expected);
    CHECK(fs::exists(dir / "accuracy_long.csv"));
    CHECK(fs::exists(dir / "summary.json"));

    fs::remove(dir / "seed_1" / "evals.jsonl");
    const auto partial = report(dir.string());
    CHECK(partial.rows == 8);
    CHECK_FALSE(partial.warnings.empty());
  }

  TEST_CASE("report on an empty directory") {
    const auto dir = fresh_dir("empty");
    const auto summary = report(dir.string());
    CHECK(summary.rows == 0);
    CHECK_FALSE(summary.warnings.empty());
    CHECK(fs::exists(dir / "accuracy.csv"));
  }
}
