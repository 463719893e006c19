#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cdpo/microworld.hpp"
#include "cdpo/policy.hpp"
#include "cdpo/qgen.hpp"

// Independent reference implementations used only by tests.
namespace oracle {

using cdpo::microworld::EventLog;
using cdpo::microworld::ObjectId;
using cdpo::microworld::World;

// Analytic 1-D solution by unfolding: equal-mass elastic contacts only swap
// identities, so the occupied positions at time t are those of free "ghost"
// particles reflecting off the walls, and the object of rank r (by initial
// order) sits at the r-th smallest ghost position. Every ghost crossing is a
// contact between the objects of rank r and r + 1 at that point.
struct GhostResult {
  EventLog log;
  // True when some contact lies within 1e-7 of a step boundary or the
  // horizon, where the step assignment is numerically fragile.
  bool near_boundary = false;
};

GhostResult ghost_simulate(const World& world, std::optional<ObjectId> removed = std::nullopt);

// Found/negation rule by direct enumeration of the factual log.
cdpo::qgen::QuestionType oracle_classify(const cdpo::qgen::Question& question,
                                         const cdpo::qgen::Option& option, const World& world);

// Slow scorer written from the architecture equations, with its own parameter
// offsets and feature gathering.
std::vector<double> naive_logprob(const cdpo::policy::PolicyParams& params,
                                  const cdpo::policy::QuestionEncoding& enc,
                                  std::span<const cdpo::policy::Token> tokens);

std::vector<double> central_differences(std::vector<double> x,
                                        const std::function<double(const std::vector<double>&)>& f,
                                        double h);

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
double max_relative_error(std::span<const double> a, std::span<const double> b, double floor);

}  // namespace oracle
