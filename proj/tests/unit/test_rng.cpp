#include <doctest.h>

#include "cdpo/rng.hpp"

using namespace cdpo;

TEST_SUITE("rng") {
  TEST_CASE("streams are reproducible and independent") {
    Rng a = make_stream(5, StreamTag::world, 3, 1);
    Rng b = make_stream(5, StreamTag::world, 3, 1);
    CHECK(a() == b());
    CHECK(make_stream(5, StreamTag::world, 3)() != make_stream(5, StreamTag::question, 3)());
    CHECK(make_stream(5, StreamTag::world, 3)() != make_stream(5, StreamTag::world, 4)());
    CHECK(make_stream(5, StreamTag::world, 3, 0)() != make_stream(5, StreamTag::world, 3, 1)());
    CHECK(make_stream(5, StreamTag::world)() != make_stream(6, StreamTag::world)());
  }

  TEST_CASE("draws stay in range") {
    Rng rng = make_stream(1, StreamTag::test);
    int seen[3] = {0, 0, 0};
    for (int i = 0; i < 10000; ++i) {
      const double u = uniform01(rng);
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      const int k = uniform_int(rng, 2, 4);
      REQUIRE(k >= 2);
      REQUIRE(k <= 4);
      ++seen[k - 2];
    }
    for (int c : seen) CHECK(c > 3000);
    CHECK_FALSE(bernoulli(rng, 0.0));
    CHECK(bernoulli(rng, 1.0));
  }
}
