#include "cdpo/rng.hpp"

namespace cdpo {

Rng make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t index,
                std::uint64_t sub_index) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed),  hi(seed),      static_cast<std::uint32_t>(tag),
                    lo(index), hi(index),     lo(sub_index),
                    hi(sub_index)};
  return Rng(seq);
}

double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

double normal(Rng& rng, double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(rng);
}

}  // namespace cdpo
