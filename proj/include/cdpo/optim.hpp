#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdpo/policy.hpp"
#include "cdpo/qgen.hpp"
#include "cdpo/rewards.hpp"
#include "cdpo/rng.hpp"

// Group-relative policy optimization: advantages, token ratios, the clipped
// surrogate with a per-token KL term, and the three objective modes.
namespace cdpo::optim {

using policy::PolicyParams;
using policy::QuestionEncoding;
using policy::Response;
using policy::TokenDistribution;

// grpo:       surrogate - beta * KL(pi || pi_ref)
// bias_no_kl: surrogate
// cdpo:       surrogate + beta * KL(pi || pi_bias)
enum class Mode : std::uint8_t { grpo, bias_no_kl, cdpo };
enum class KlEstimator : std::uint8_t { exact, k3 };
enum class OptimizerKind : std::uint8_t { sgd, adam };

std::string to_string(Mode m);
std::string to_string(KlEstimator k);
std::string to_string(OptimizerKind o);
Mode mode_from_string(const std::string& s);  // "grpo" | "bias" | "cdpo"
KlEstimator kl_estimator_from_string(const std::string& s);
OptimizerKind optimizer_from_string(const std::string& s);

// Sign of the KL term in the maximized objective.
double kl_sign(Mode m);

struct TrainerConfig {
  Mode mode = Mode::grpo;
  int group_size = 8;
  double beta = 0.05;
  double clip_eps = 0.2;
  KlEstimator kl_estimator = KlEstimator::exact;
  std::optional<double> kl_cap;  // ceiling on each token's KL contribution
  double learning_rate = 1e-3;
  int steps = 500;
  int batch_size = 16;
  OptimizerKind optimizer = OptimizerKind::sgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool use_openmp = true;

  // beta defaults: 0.05 for grpo, 0.01 for cdpo, 0 for bias_no_kl.
  static TrainerConfig defaults_for(Mode mode);
  void validate() const;  // throws ConfigError
};

// (R_i - mean) / std with the population std; a constant group maps to
// zeros.
std::vector<double> compute_advantages(std::span<const double> rewards);

inline constexpr double kRatioExponentClamp = 30.0;

// exp(new_lp - old_lp); the exponent is clamped to +-30 with a warning on
// stderr.
double token_ratio(double new_lp, double old_lp);

// exact: sum_v p_v log(p_v / q_v). k3: q/p - log(q/p) - 1 at the sampled
// token. Throws NumericError if q vanishes where p does not.
double kl_divergence(const TokenDistribution& p, const TokenDistribution& q, KlEstimator estimator,
                     std::optional<policy::Token> sampled = std::nullopt);

struct GroupRollout {
  std::size_t question_index = 0;
  QuestionEncoding encoding;
  std::vector<Response> responses;
  std::vector<double> rewards;
  std::vector<double> advantages;
  std::vector<std::vector<double>> old_logprobs;

  std::size_t size() const { return responses.size(); }
  void validate() const;
};

struct ObjectiveReport {
  double objective = 0.0;
  double surrogate = 0.0;
  double kl_term = 0.0;        // unsigned, token- then group-averaged like the objective
  double kl_token_mean = 0.0;  // flat mean over all tokens
  double grad_norm = 0.0;
  std::size_t tokens = 0;
};

struct ObjectiveResult {
  ObjectiveReport report;
  std::vector<double> gradient;  // d objective / d params
};

ObjectiveResult grpo_objective(const GroupRollout& group, const PolicyParams& params,
                               const PolicyParams& ref_params, const TrainerConfig& cfg);
ObjectiveResult bias_objective(const GroupRollout& group, const PolicyParams& params,
                               const TrainerConfig& cfg);
ObjectiveResult cdpo_objective(const GroupRollout& group, const PolicyParams& params,
                               const PolicyParams& bias_params, const TrainerConfig& cfg);

// Shared core: anchor may be null only when kl_sign_value == 0.
ObjectiveResult group_objective(const GroupRollout& group, const PolicyParams& params,
                                const PolicyParams* anchor, double kl_sign_value,
                                const TrainerConfig& cfg);

double clipped_surrogate(double ratio, double advantage, double eps);

struct SurrogateTerms {
  double clipped = 0.0;
  double unclipped = 0.0;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
};

// Group-averaged surrogate with and without the clip, same weighting as the
// objective.
SurrogateTerms surrogate_terms(const GroupRollout& group, const PolicyParams& params, double eps);

// --- update loop ---

struct TrainingExample {
  QuestionEncoding encoding;
  qgen::Question question;
};

struct AdamMoments {
  std::vector<double> first;
  std::vector<double> second;
  long long updates = 0;
};

struct TrainerState {
  PolicyParams params;
  std::optional<PolicyParams> anchor;  // pi_ref (grpo) or pi_bias (cdpo), frozen
  AdamMoments moments;
  int step = 0;
};

struct StepMetrics {
  int step = 0;
  Mode mode = Mode::grpo;
  double reward_mean = 0.0;
  double reward_std = 0.0;
  double kl_mean = 0.0;
  double grad_norm = 0.0;
  double objective = 0.0;
};

// Samples G responses per question from the current parameters (pi_old),
// scores them, evaluates the mode's objective and takes one ascent step.
// Throws NumericError (naming the step) on a non-finite gradient.
StepMetrics train_step(TrainerState& state, std::span<const TrainingExample> batch,
                       const TrainerConfig& cfg, const rewards::RewardWeights& weights, Rng& rng);

// In-place ascent step on params.
void apply_update(std::span<double> params, std::span<const double> gradient,
                  const TrainerConfig& cfg, AdamMoments& moments);

double l2_norm(std::span<const double> v);

}  // namespace cdpo::optim
