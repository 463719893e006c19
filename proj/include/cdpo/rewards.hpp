#pragma once

#include <span>

#include "cdpo/letters.hpp"
#include "cdpo/policy.hpp"
#include "cdpo/qgen.hpp"

// Rule-based rewards: a format reward and a soft multi-answer accuracy.
namespace cdpo::rewards {

struct RewardWeights {
  double accuracy = 1.0;
  double format = 0.5;
};

struct RewardBreakdown {
  double format = 0.0;    // 0 or 1
  double accuracy = 0.0;  // [0, 1], zero unless format == 1
  double total = 0.0;
};

double format_reward(std::span<const policy::Token> response);

// |P|/|G| when P is a non-empty subset of G; 0 on any false positive or an
// empty prediction.
double soft_accuracy_reward(LetterSet predicted, LetterSet truth);

RewardBreakdown total_reward(std::span<const policy::Token> response,
                             const qgen::Question& question, const RewardWeights& weights = {});

}  // namespace cdpo::rewards
