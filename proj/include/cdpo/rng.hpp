#pragma once

#include <cstdint>
#include <random>

namespace cdpo {

using Rng = std::mt19937_64;

// Stream tags keep generators for different purposes independent even when
// they share a base seed and index.
enum class StreamTag : std::uint32_t {
  world = 1,
  question = 2,
  dataset = 3,
  init = 4,
  warmup = 5,
  rollout = 6,
  batch_order = 7,
  test = 99,
};

// Independent generator for (base seed, tag, index); order of creation does
// not matter, so parallel producers stay reproducible.
Rng make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t index = 0,
                std::uint64_t sub_index = 0);

double uniform01(Rng& rng);

// Uniform integer in [lo, hi].
int uniform_int(Rng& rng, int lo, int hi);

bool bernoulli(Rng& rng, double p);

double normal(Rng& rng, double mean, double stddev);

}  // namespace cdpo
