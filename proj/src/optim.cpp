#include "cdpo/optim.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "cdpo/errors.hpp"
#include "cdpo/kernels.hpp"

namespace cdpo::optim {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::grpo: return "grpo";
    case Mode::bias_no_kl: return "bias";
    case Mode::cdpo: return "cdpo";
  }
  return "?";
}

std::string to_string(KlEstimator k) { return k == KlEstimator::exact ? "exact" : "k3"; }

std::string to_string(OptimizerKind o) { return o == OptimizerKind::sgd ? "sgd" : "adam"; }

Mode mode_from_string(const std::string& s) {
  if (s == "grpo") return Mode::grpo;
  if (s == "bias" || s == "bias_no_kl") return Mode::bias_no_kl;
  if (s == "cdpo") return Mode::cdpo;
  throw ConfigError("unknown mode: " + s);
}

KlEstimator kl_estimator_from_string(const std::string& s) {
  if (s == "exact") return KlEstimator::exact;
  if (s == "k3") return KlEstimator::k3;
  throw ConfigError("unknown kl estimator: " + s);
}

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer: " + s);
}

double kl_sign(Mode m) {
  switch (m) {
    case Mode::grpo: return -1.0;
    case Mode::bias_no_kl: return 0.0;
    case Mode::cdpo: return 1.0;
  }
  return 0.0;
}

TrainerConfig TrainerConfig::defaults_for(Mode mode) {
  TrainerConfig c;
  c.mode = mode;
  c.beta = mode == Mode::grpo ? 0.05 : mode == Mode::cdpo ? 0.01 : 0.0;
  return c;
}

void TrainerConfig::validate() const {
  if (group_size < 2) throw ConfigError("group_size must be >= 2");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("clip_eps must lie in (0, 1)");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (kl_cap && !(*kl_cap > 0.0)) throw ConfigError("kl_cap must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

std::vector<double> compute_advantages(std::span<const double> rewards) {
  const std::size_t g = rewards.size();
  if (g < 2) throw ConfigError("advantages need a group of at least 2");
  std::vector<double> adv(g, 0.0);
  // Tested on the values themselves: the mean of equal rewards can round
  // away from them and leave a spurious nonzero spread.
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; })) return adv;
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(g);
  const double sd = std::sqrt(var);
  if (sd == 0.0) return adv;
  for (std::size_t i = 0; i < g; ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

double token_ratio(double new_lp, double old_lp) {
  double x = new_lp - old_lp;
  if (std::abs(x) > kRatioExponentClamp) {
    std::cerr << "warning: token ratio exponent " << x << " clamped to +-" << kRatioExponentClamp
              << '\n';
    x = std::clamp(x, -kRatioExponentClamp, kRatioExponentClamp);
  }
  return std::exp(x);
}

double kl_divergence(const TokenDistribution& p, const TokenDistribution& q, KlEstimator estimator,
                     std::optional<policy::Token> sampled) {
  if (estimator == KlEstimator::k3) {
    if (!sampled) throw ConfigError("k3 estimator needs the sampled token");
    const auto v = static_cast<std::size_t>(policy::token_id(*sampled));
    if (!(p[v] > 0.0) || !(q[v] > 0.0)) throw NumericError("k3 estimator at a zero-probability token");
    const double x = std::log(q[v]) - std::log(p[v]);
    return std::exp(x) - x - 1.0;
  }
  double kl = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) {
    if (p[v] == 0.0) continue;
    if (!(q[v] > 0.0)) throw NumericError("KL undefined: q vanishes where p does not");
    kl += p[v] * (std::log(p[v]) - std::log(q[v]));
  }
  return kl;
}

void GroupRollout::validate() const {
  const std::size_t g = responses.size();
  if (g < 2) throw ConfigError("group needs at least 2 responses");
  if (rewards.size() != g || advantages.size() != g || old_logprobs.size() != g)
    throw ConfigError("group rollout fields must all have length G");
  for (std::size_t i = 0; i < g; ++i) {
    if (responses[i].tokens.empty()) throw ConfigError("empty response in group");
    if (old_logprobs[i].size() != responses[i].tokens.size())
      throw ConfigError("old log-probabilities must match response length");
  }
}

double clipped_surrogate(double ratio, double advantage, double eps) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

ObjectiveResult group_objective(const GroupRollout& group, const PolicyParams& params,
                                const PolicyParams* anchor, double sign, const TrainerConfig& cfg) {
  group.validate();
  const bool with_kl = sign != 0.0;
  if (with_kl && !anchor) throw ConfigError("objective needs a frozen anchor policy");
  const double eps = cfg.clip_eps;
  const double g = static_cast<double>(group.size());

  ObjectiveResult out;
  out.gradient.assign(params.size(), 0.0);
  double kl_token_sum = 0.0;
  std::size_t tokens = 0;

  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto& tok = group.responses[i].tokens;
    const double adv = group.advantages[i];
    const double w = 1.0 / (g * static_cast<double>(tok.size()));
    policy::SequenceForward fwd(params, group.encoding, tok);
    std::optional<policy::SequenceForward> anchor_fwd;
    if (with_kl) anchor_fwd.emplace(*anchor, group.encoding, tok);

    std::vector<policy::LogitGradient> dlogits(tok.size());
    for (int t = 0; t < fwd.length(); ++t) {
      const auto ts = static_cast<std::size_t>(t);
      const auto& p = fwd.distribution(t);
      const auto& lp = fwd.log_distribution(t);
      const auto taken = static_cast<std::size_t>(policy::token_id(tok[ts]));

      const double exponent = lp[taken] - group.old_logprobs[i][ts];
      const double ratio = token_ratio(lp[taken], group.old_logprobs[i][ts]);
      const double unclipped = ratio * adv;
      const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
      const double surrogate = std::min(unclipped, clipped);
      // d surrogate / d log pi(taken); zero on the clipped branch.
      double dsur = unclipped <= clipped ? ratio * adv : 0.0;
      if (std::abs(exponent) > kRatioExponentClamp) dsur = 0.0;

      auto& d = dlogits[ts];
      for (std::size_t v = 0; v < d.size(); ++v) d[v] = -dsur * p[v];
      d[taken] += dsur;

      double kl = 0.0;
      if (with_kl) {
        const auto& lq = anchor_fwd->log_distribution(t);
        std::array<double, policy::kVocabSize> dkl{};
        if (cfg.kl_estimator == KlEstimator::exact) {
          for (std::size_t v = 0; v < p.size(); ++v) {
            if (!std::isfinite(lq[v]) && p[v] > 0.0)
              throw NumericError("KL undefined: anchor assigns zero probability");
            kl += p[v] * (lp[v] - lq[v]);
          }
          for (std::size_t v = 0; v < p.size(); ++v) dkl[v] = p[v] * (lp[v] - lq[v] - kl);
        } else {
          const double x = lq[taken] - lp[taken];
          kl = std::exp(x) - x - 1.0;
          const double dk = 1.0 - std::exp(x);  // d k3 / d log p(taken)
          for (std::size_t v = 0; v < p.size(); ++v) dkl[v] = -dk * p[v];
          dkl[taken] += dk;
        }
        if (cfg.kl_cap && kl > *cfg.kl_cap) {
          kl = *cfg.kl_cap;
          dkl.fill(0.0);
        }
        for (std::size_t v = 0; v < d.size(); ++v) d[v] += sign * cfg.beta * dkl[v];
      }

      for (auto& x : d) x *= w;
      out.report.surrogate += w * surrogate;
      out.report.kl_term += w * kl;
      kl_token_sum += kl;
      ++tokens;
    }
    fwd.backward(dlogits, out.gradient);
  }

  out.report.objective = out.report.surrogate + sign * cfg.beta * out.report.kl_term;
  out.report.kl_token_mean = tokens ? kl_token_sum / static_cast<double>(tokens) : 0.0;
  out.report.tokens = tokens;
  out.report.grad_norm = l2_norm(out.gradient);
  return out;
}

ObjectiveResult grpo_objective(const GroupRollout& group, const PolicyParams& params,
                               const PolicyParams& ref_params, const TrainerConfig& cfg) {
  if (cfg.mode != Mode::grpo) throw ConfigError("grpo_objective needs mode grpo");
  return group_objective(group, params, &ref_params, kl_sign(Mode::grpo), cfg);
}

ObjectiveResult bias_objective(const GroupRollout& group, const PolicyParams& params,
                               const TrainerConfig& cfg) {
  if (cfg.mode != Mode::bias_no_kl) throw ConfigError("bias_objective needs mode bias");
  return group_objective(group, params, nullptr, 0.0, cfg);
}

ObjectiveResult cdpo_objective(const GroupRollout& group, const PolicyParams& params,
                               const PolicyParams& bias_params, const TrainerConfig& cfg) {
  if (cfg.mode != Mode::cdpo) throw ConfigError("cdpo_objective needs mode cdpo");
  return group_objective(group, params, &bias_params, kl_sign(Mode::cdpo), cfg);
}

SurrogateTerms surrogate_terms(const GroupRollout& group, const PolicyParams& params, double eps) {
  group.validate();
  SurrogateTerms s;
  s.min_ratio = INFINITY;
  s.max_ratio = -INFINITY;
  const double g = static_cast<double>(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto& tok = group.responses[i].tokens;
    const auto lp = policy::logprob(params, group.encoding, tok);
    const double w = 1.0 / (g * static_cast<double>(tok.size()));
    for (std::size_t t = 0; t < tok.size(); ++t) {
      const double r = token_ratio(lp[t], group.old_logprobs[i][t]);
      s.clipped += w * clipped_surrogate(r, group.advantages[i], eps);
      s.unclipped += w * r * group.advantages[i];
      s.min_ratio = std::min(s.min_ratio, r);
      s.max_ratio = std::max(s.max_ratio, r);
    }
  }
  return s;
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void apply_update(std::span<double> params, std::span<const double> gradient,
                  const TrainerConfig& cfg, AdamMoments& moments) {
  if (params.size() != gradient.size()) throw NumericError("gradient size mismatch");
  if (cfg.optimizer == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] += cfg.learning_rate * gradient[i];
    return;
  }
  if (moments.first.size() != params.size()) {
    moments.first.assign(params.size(), 0.0);
    moments.second.assign(params.size(), 0.0);
    moments.updates = 0;
  }
  ++moments.updates;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(moments.updates));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(moments.updates));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double gi = gradient[i];
    moments.first[i] = b1 * moments.first[i] + (1.0 - b1) * gi;
    moments.second[i] = b2 * moments.second[i] + (1.0 - b2) * gi * gi;
    const double mhat = moments.first[i] / c1;
    const double vhat = moments.second[i] / c2;
    params[i] += cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_epsilon);
  }
}

StepMetrics train_step(TrainerState& state, std::span<const TrainingExample> batch,
                       const TrainerConfig& cfg, const rewards::RewardWeights& weights, Rng& rng) {
  cfg.validate();
  if (batch.empty()) throw ConfigError("empty training batch");
  const bool needs_anchor = cfg.mode != Mode::bias_no_kl;
  if (needs_anchor && !state.anchor)
    throw ConfigError(to_string(cfg.mode) + " training needs a frozen anchor policy");
  const PolicyParams* anchor = needs_anchor ? &*state.anchor : nullptr;

  // The current parameters are pi_old for this step; their sampling-time
  // log-probabilities are recorded in the rollouts.
  const std::uint64_t base_seed = rng();
  const auto groups =
      cfg.use_openmp ? kernels::sample_groups_parallel(state.params, batch, cfg, weights, base_seed)
                     : kernels::sample_groups_serial(state.params, batch, cfg, weights, base_seed);
  const auto result =
      cfg.use_openmp ? kernels::batch_objective_parallel(groups, state.params, anchor, cfg)
                     : kernels::batch_objective_serial(groups, state.params, anchor, cfg);

  if (!std::all_of(result.gradient.begin(), result.gradient.end(),
                   [](double x) { return std::isfinite(x); }))
    throw NumericError("non-finite gradient at step " + std::to_string(state.step));

  apply_update(state.params.values(), result.gradient, cfg, state.moments);

  StepMetrics m;
  m.step = state.step;
  m.mode = cfg.mode;
  double n = 0.0, sum = 0.0, sq = 0.0;
  for (const auto& g : groups)
    for (double r : g.rewards) {
      sum += r;
      sq += r * r;
      n += 1.0;
    }
  m.reward_mean = sum / n;
  m.reward_std = std::sqrt(std::max(0.0, sq / n - m.reward_mean * m.reward_mean));
  m.kl_mean = result.report.kl_token_mean;
  m.grad_norm = result.report.grad_norm;
  m.objective = result.report.objective;
  ++state.step;
  return m;
}

}  // namespace cdpo::optim
