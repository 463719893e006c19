#pragma once

#include <cstdint>
#include <exception>
#include <span>
#include <vector>

#include "cdpo/optim.hpp"

// Batch kernels. Each *_parallel routine distributes independent questions
// over OpenMP threads and reduces in index order, so its output is
// bit-identical to the *_serial reference.
namespace cdpo::kernels {

using optim::GroupRollout;
using optim::ObjectiveResult;
using optim::TrainerConfig;
using optim::TrainingExample;
using policy::PolicyParams;

// Runs body(i) for i in [0, n) on OpenMP threads; the first exception (by
// index) is rethrown on the calling thread.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Rollout stream for question j is make_stream(base_seed, rollout, j).
GroupRollout sample_group(const PolicyParams& params, const TrainingExample& example,
                          std::size_t question_index, const TrainerConfig& cfg,
                          const rewards::RewardWeights& weights, std::uint64_t base_seed);

std::vector<GroupRollout> sample_groups_serial(const PolicyParams& params,
                                               std::span<const TrainingExample> batch,
                                               const TrainerConfig& cfg,
                                               const rewards::RewardWeights& weights,
                                               std::uint64_t base_seed);
std::vector<GroupRollout> sample_groups_parallel(const PolicyParams& params,
                                                 std::span<const TrainingExample> batch,
                                                 const TrainerConfig& cfg,
                                                 const rewards::RewardWeights& weights,
                                                 std::uint64_t base_seed);

// Mean over groups of the mode objective; gradient averaged likewise.
ObjectiveResult batch_objective_serial(std::span<const GroupRollout> groups,
                                       const PolicyParams& params, const PolicyParams* anchor,
                                       const TrainerConfig& cfg);
ObjectiveResult batch_objective_parallel(std::span<const GroupRollout> groups,
                                         const PolicyParams& params, const PolicyParams* anchor,
                                         const TrainerConfig& cfg);

std::vector<policy::Response> greedy_decode_serial(const PolicyParams& params,
                                                   std::span<const policy::QuestionEncoding> encs);
std::vector<policy::Response> greedy_decode_parallel(const PolicyParams& params,
                                                     std::span<const policy::QuestionEncoding> encs);

}  // namespace cdpo::kernels
