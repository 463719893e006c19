// Serial vs OpenMP kernels on one synthetic training batch.
// usage: bench_kernels [batch] [group] [repeats]
#include <chrono>
#include <cstdlib>
#include <iostream>

#include <omp.h>

#include "cdpo/harness.hpp"
#include "cdpo/kernels.hpp"

using namespace cdpo;

namespace {

template <class F>
double time_ms(int repeats, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / repeats;
}

}  // namespace

int main(int argc, char** argv) {
  const int batch = argc > 1 ? std::atoi(argv[1]) : 64;
  const int group = argc > 2 ? std::atoi(argv[2]) : 8;
  const int repeats = argc > 3 ? std::atoi(argv[3]) : 20;

  auto cfg = harness::ExperimentConfig::defaults();
  cfg.data.n_train = batch;
  cfg.data.n_eval = 8;
  const auto data = harness::build_data(cfg);
  Rng rng = make_stream(7, StreamTag::test);
  const auto params = policy::PolicyParams::random(cfg.arch, rng, 0.3);
  const auto anchor = policy::PolicyParams::random(cfg.arch, rng, 0.3);
  auto tc = cfg.grpo_trainer;
  tc.group_size = group;
  const auto& examples = data.train.examples;
  std::vector<policy::QuestionEncoding> encs;
  for (const auto& e : examples) encs.push_back(e.encoding);

  const auto groups = kernels::sample_groups_serial(params, examples, tc, cfg.reward_weights, 11);
  const bool same_groups =
      kernels::sample_groups_parallel(params, examples, tc, cfg.reward_weights, 11).size() == groups.size();
  const auto s_obj = kernels::batch_objective_serial(groups, params, &anchor, tc);
  const auto p_obj = kernels::batch_objective_parallel(groups, params, &anchor, tc);
  const bool same_grad = s_obj.gradient == p_obj.gradient;

  std::cout << "threads " << omp_get_max_threads() << ", batch " << batch << ", group " << group
            << ", params " << params.size() << '\n';
  std::cout << "kernel              serial_ms  parallel_ms  speedup\n";
  auto row = [](const char* name, double s, double p) {
    std::cout << name << "  " << s << "  " << p << "  " << s / p << '\n';
  };
  row("sample_groups    ",
      time_ms(repeats, [&] { kernels::sample_groups_serial(params, examples, tc, cfg.reward_weights, 11); }),
      time_ms(repeats, [&] { kernels::sample_groups_parallel(params, examples, tc, cfg.reward_weights, 11); }));
  row("batch_objective  ", time_ms(repeats, [&] { kernels::batch_objective_serial(groups, params, &anchor, tc); }),
      time_ms(repeats, [&] { kernels::batch_objective_parallel(groups, params, &anchor, tc); }));
  row("greedy_decode    ", time_ms(repeats, [&] { kernels::greedy_decode_serial(params, encs); }),
      time_ms(repeats, [&] { kernels::greedy_decode_parallel(params, encs); }));
  std::cout << "bit-identical gradients: " << (same_grad && same_groups ? "yes" : "no") << '\n';
  return same_grad ? 0 : 1;
}
