#include "cdpo/kernels.hpp"

#include <exception>

#include "cdpo/errors.hpp"

namespace cdpo::kernels {

GroupRollout sample_group(const PolicyParams& params, const TrainingExample& example,
                          std::size_t question_index, const TrainerConfig& cfg,
                          const rewards::RewardWeights& weights, std::uint64_t base_seed) {
  Rng rng = make_stream(base_seed, StreamTag::rollout, question_index);
  GroupRollout g;
  g.question_index = question_index;
  g.encoding = example.encoding;
  const auto G = static_cast<std::size_t>(cfg.group_size);
  g.responses.reserve(G);
  g.rewards.reserve(G);
  g.old_logprobs.reserve(G);
  for (std::size_t i = 0; i < G; ++i) {
    auto r = policy::sample_response(params, example.encoding, rng, params.arch().max_len);
    g.rewards.push_back(rewards::total_reward(r.tokens, example.question, weights).total);
    g.old_logprobs.push_back(r.logprobs);
    g.responses.push_back(std::move(r));
  }
  g.advantages = optim::compute_advantages(g.rewards);
  return g;
}

namespace {

double kl_sign_for(const TrainerConfig& cfg) { return optim::kl_sign(cfg.mode); }

ObjectiveResult reduce(std::span<const ObjectiveResult> parts, std::size_t param_count) {
  ObjectiveResult out;
  out.gradient.assign(param_count, 0.0);
  double kl_token_sum = 0.0;
  const double n = static_cast<double>(parts.size());
  for (const auto& p : parts) {
    out.report.objective += p.report.objective / n;
    out.report.surrogate += p.report.surrogate / n;
    out.report.kl_term += p.report.kl_term / n;
    kl_token_sum += p.report.kl_token_mean * static_cast<double>(p.report.tokens);
    out.report.tokens += p.report.tokens;
    for (std::size_t j = 0; j < param_count; ++j) out.gradient[j] += p.gradient[j] / n;
  }
  out.report.kl_token_mean =
      out.report.tokens ? kl_token_sum / static_cast<double>(out.report.tokens) : 0.0;
  out.report.grad_norm = optim::l2_norm(out.gradient);
  return out;
}

void check_groups(std::span<const GroupRollout> groups) {
  if (groups.empty()) throw ConfigError("batch objective over an empty batch");
}

}  // namespace

std::vector<GroupRollout> sample_groups_serial(const PolicyParams& params,
                                               std::span<const TrainingExample> batch,
                                               const TrainerConfig& cfg,
                                               const rewards::RewardWeights& weights,
                                               std::uint64_t base_seed) {
  std::vector<GroupRollout> out;
  out.reserve(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j)
    out.push_back(sample_group(params, batch[j], j, cfg, weights, base_seed));
  return out;
}

std::vector<GroupRollout> sample_groups_parallel(const PolicyParams& params,
                                                 std::span<const TrainingExample> batch,
                                                 const TrainerConfig& cfg,
                                                 const rewards::RewardWeights& weights,
                                                 std::uint64_t base_seed) {
  std::vector<GroupRollout> out(batch.size());
  parallel_for(batch.size(), [&](std::size_t j) {
    out[j] = sample_group(params, batch[j], j, cfg, weights, base_seed);
  });
  return out;
}

ObjectiveResult batch_objective_serial(std::span<const GroupRollout> groups,
                                       const PolicyParams& params, const PolicyParams* anchor,
                                       const TrainerConfig& cfg) {
  check_groups(groups);
  std::vector<ObjectiveResult> parts;
  parts.reserve(groups.size());
  for (const auto& g : groups)
    parts.push_back(optim::group_objective(g, params, anchor, kl_sign_for(cfg), cfg));
  return reduce(parts, params.size());
}

ObjectiveResult batch_objective_parallel(std::span<const GroupRollout> groups,
                                         const PolicyParams& params, const PolicyParams* anchor,
                                         const TrainerConfig& cfg) {
  check_groups(groups);
  std::vector<ObjectiveResult> parts(groups.size());
  parallel_for(groups.size(), [&](std::size_t j) {
    parts[j] = optim::group_objective(groups[j], params, anchor, kl_sign_for(cfg), cfg);
  });
  return reduce(parts, params.size());
}

std::vector<policy::Response> greedy_decode_serial(const PolicyParams& params,
                                                   std::span<const policy::QuestionEncoding> encs) {
  std::vector<policy::Response> out;
  out.reserve(encs.size());
  for (const auto& e : encs) out.push_back(policy::greedy_response(params, e, params.arch().max_len));
  return out;
}

std::vector<policy::Response> greedy_decode_parallel(const PolicyParams& params,
                                                     std::span<const policy::QuestionEncoding> encs) {
  std::vector<policy::Response> out(encs.size());
  parallel_for(encs.size(), [&](std::size_t j) {
    out[j] = policy::greedy_response(params, encs[j], params.arch().max_len);
  });
  return out;
}

}  // namespace cdpo::kernels
