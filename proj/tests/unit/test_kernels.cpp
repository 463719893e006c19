#include <doctest.h>

#include <stdexcept>

#include "cdpo/kernels.hpp"

using namespace cdpo;
using namespace cdpo::kernels;

namespace {

std::vector<TrainingExample> examples(int n) {
  qgen::DatasetSpec spec;
  spec.count = n;
  spec.seed = 77;
  std::vector<TrainingExample> out;
  for (const auto& it : qgen::generate_dataset(spec))
    out.push_back({policy::encode_question(it.question, it.world), it.question});
  return out;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("parallel kernels are bit-identical to serial") {
    const auto batch = examples(12);
    Rng rng = make_stream(1, StreamTag::test);
    const auto params = PolicyParams::random({}, rng, 0.6);
    const auto anchor = PolicyParams::random({}, rng, 0.6);
    for (auto mode : {optim::Mode::grpo, optim::Mode::bias_no_kl, optim::Mode::cdpo}) {
      auto cfg = TrainerConfig::defaults_for(mode);
      const auto s = sample_groups_serial(params, batch, cfg, {}, 5);
      const auto p = sample_groups_parallel(params, batch, cfg, {}, 5);
      REQUIRE(s.size() == p.size());
      for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(s[i].responses == p[i].responses);
        CHECK(s[i].rewards == p[i].rewards);
        CHECK(s[i].advantages == p[i].advantages);
        CHECK(s[i].question_index == i);
      }
      const PolicyParams* a = mode == optim::Mode::bias_no_kl ? nullptr : &anchor;
      const auto so = batch_objective_serial(s, params, a, cfg);
      const auto po = batch_objective_parallel(s, params, a, cfg);
      CHECK(so.gradient == po.gradient);
      CHECK(so.report.objective == po.report.objective);
      CHECK(so.report.kl_token_mean == po.report.kl_token_mean);
    }
    std::vector<policy::QuestionEncoding> encs;
    for (const auto& e : batch) encs.push_back(e.encoding);
    CHECK(greedy_decode_serial(params, encs) == greedy_decode_parallel(params, encs));
  }

  TEST_CASE("rollout streams depend only on the question index") {
    const auto batch = examples(6);
    Rng rng = make_stream(2, StreamTag::test);
    const auto params = PolicyParams::random({}, rng, 0.6);
    const auto cfg = TrainerConfig::defaults_for(optim::Mode::grpo);
    const auto all = sample_groups_serial(params, batch, cfg, {}, 9);
    const auto one = sample_group(params, batch[4], 4, cfg, {}, 9);
    CHECK(one.responses == all[4].responses);
    CHECK(sample_groups_serial(params, batch, cfg, {}, 10)[0].responses != all[0].responses);
  }

  TEST_CASE("parallel_for surfaces the first error by index") {
    std::vector<int> hit(100, 0);
    CHECK_THROWS_WITH(parallel_for(100,
                                   [&](std::size_t i) {
                                     hit[i] = 1;
                                     if (i == 17 || i == 60) throw std::runtime_error("at " + std::to_string(i));
                                   }),
                      "at 17");
    CHECK(std::count(hit.begin(), hit.end(), 1) == 100);
  }
}
