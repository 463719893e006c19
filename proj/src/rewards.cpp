#include "cdpo/rewards.hpp"

namespace cdpo::rewards {

double format_reward(std::span<const policy::Token> response) {
  return policy::parse_answer(response) ? 1.0 : 0.0;
}

double soft_accuracy_reward(LetterSet predicted, LetterSet truth) {
  if (predicted.empty() || truth.empty() || !predicted.is_subset_of(truth)) return 0.0;
  return static_cast<double>(predicted.size()) / static_cast<double>(truth.size());
}

RewardBreakdown total_reward(std::span<const policy::Token> response,
                             const qgen::Question& question, const RewardWeights& weights) {
  RewardBreakdown r;
  const auto parsed = policy::parse_answer(response);
  if (parsed) {
    r.format = 1.0;
    r.accuracy = soft_accuracy_reward(*parsed, question.answer_set);
  }
  r.total = weights.accuracy * r.accuracy + weights.format * r.format;
  return r;
}

}  // namespace cdpo::rewards
