#include <doctest.h>

#include <cmath>
#include <set>
#include <tuple>

#include "cdpo/errors.hpp"
#include "cdpo/microworld.hpp"
#include "oracles.hpp"

using namespace cdpo;
using namespace cdpo::microworld;

namespace {

World line_world(std::vector<std::pair<double, double>> xv, double length = 20.0, int horizon = 20) {
  World w;
  w.config.num_objects = static_cast<int>(xv.size());
  w.config.arena_length = length;
  w.config.horizon = horizon;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    ObjectSpec o;
    o.id = static_cast<int>(i);
    o.color = static_cast<Color>(i % kNumColors);
    o.position0 = xv[i].first;
    o.velocity0 = xv[i].second;
    w.objects.push_back(o);
  }
  return w;
}

WorldConfig config_with(int n, std::uint64_t seed) {
  WorldConfig c;
  c.num_objects = n;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_SUITE("microworld") {
  TEST_CASE("generation is deterministic") {
    const World a = generate_world(config_with(2, 7));
    const World b = generate_world(config_with(2, 7));
    REQUIRE(a.objects.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(a.objects[i].position0 == b.objects[i].position0);
      CHECK(a.objects[i].velocity0 == b.objects[i].velocity0);
      CHECK(a.objects[i].color == b.objects[i].color);
    }
  }

  TEST_CASE("attribute triples are distinct") {
    const World w = generate_world(config_with(5, 1));
    REQUIRE(w.objects.size() == 5);
    std::set<std::tuple<Color, Shape, Material>> triples;
    for (const auto& o : w.objects) triples.insert({o.color, o.shape, o.material});
    CHECK(triples.size() == 5);
  }

  TEST_CASE("different seeds give different positions") {
    const World a = generate_world(config_with(5, 1));
    const World b = generate_world(config_with(5, 2));
    bool differ = false;
    for (std::size_t i = 0; i < 5; ++i) differ = differ || a.objects[i].position0 != b.objects[i].position0;
    CHECK(differ);
  }

  TEST_CASE("config validation") {
    WorldConfig c;
    c.horizon = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = WorldConfig{};
    c.num_objects = kAttributeSpace + 1;
    CHECK_THROWS_AS(generate_world(c), ConfigError);
  }

  TEST_CASE("objects moving apart never collide") {
    const World w = line_world({{5.0, -0.5}, {10.0, 0.5}}, 100.0, 20);
    CHECK(simulate(w).events.empty());
  }

  TEST_CASE("chain of blockers") {
    const World w = line_world({{0.0, 1.0}, {4.0, 0.0}, {8.0, 0.0}});
    const EventLog log = simulate(w);
    REQUIRE(log.events.size() == 2);
    CHECK(log.events[0] == CollisionEvent{0, 1, 4});
    CHECK(log.events[1] == CollisionEvent{1, 2, 8});
    // Without the middle blocker the mover reaches the last object directly.
    const EventLog cf = simulate(w, 1);
    REQUIRE(cf.events.size() == 1);
    CHECK(cf.events[0] == CollisionEvent{0, 2, 8});
  }

  TEST_CASE("removing a bystander changes nothing") {
    const World w = line_world({{0.0, 1.0}, {4.0, 0.0}, {8.0, 0.0}, {19.0, 0.0}}, 20.0, 10);
    const EventLog log = simulate(w);
    REQUIRE_FALSE(log.involves(3));
    CHECK(simulate(w, 3) == log);
  }

  TEST_CASE("removed objects never appear") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const World w = generate_world(config_with(5, seed));
      for (int r = 0; r < 5; ++r) CHECK_FALSE(simulate(w, r).involves(r));
    }
  }

  TEST_CASE("log invariants and determinism") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const World w = generate_world(config_with(5, seed));
      const EventLog log = simulate(w);
      CHECK(simulate(w) == log);
      for (std::size_t i = 0; i < log.events.size(); ++i) {
        const auto& e = log.events[i];
        CHECK(e.a < e.b);
        CHECK(e.step >= 0);
        CHECK(e.step < w.config.horizon);
        if (i > 0) CHECK(log.events[i - 1] < e);
      }
    }
  }

  TEST_CASE("contacts conserve momentum and kinetic energy") {
    int contacts = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const World w = generate_world(config_with(5, seed));
      const auto trace = simulate_traced(w);
      CHECK(trace.log == simulate(w));
      for (const auto& c : trace.contacts) {
        double p0 = 0, p1 = 0, e0 = 0, e1 = 0, scale = 0;
        for (std::size_t i = 0; i < c.velocities_before.size(); ++i) {
          p0 += c.velocities_before[i];
          p1 += c.velocities_after[i];
          e0 += 0.5 * c.velocities_before[i] * c.velocities_before[i];
          e1 += 0.5 * c.velocities_after[i] * c.velocities_after[i];
          scale += std::abs(c.velocities_before[i]);
        }
        CHECK(std::abs(p1 - p0) <= 1e-9 * std::max(scale, 1e-12));
        CHECK(std::abs(e1 - e0) <= 1e-9 * std::max(e0, 1e-12));
        ++contacts;
      }
    }
    CHECK(contacts > 100);
  }

  TEST_CASE("agrees with the analytic ghost-particle solution") {
    int compared = 0, skipped = 0;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const World w = generate_world(config_with(5, seed));
      for (int r = -1; r < 5; ++r) {
        const std::optional<ObjectId> removed = r < 0 ? std::nullopt : std::optional<ObjectId>(r);
        const auto ghost = oracle::ghost_simulate(w, removed);
        if (ghost.near_boundary) {
          ++skipped;
          continue;
        }
        const EventLog log = simulate(w, removed);
        CHECK_MESSAGE(log == ghost.log, "seed " << seed << " removed " << r);
        ++compared;
      }
    }
    CHECK(compared > 1700);
    MESSAGE("ghost comparisons: " << compared << ", skipped near step boundaries: " << skipped);
  }

  TEST_CASE("event log queries") {
    EventLog log{{{0, 1, 4}, {1, 2, 8}}};
    CHECK(log.contains_pair(1, 0));
    CHECK(log.contains_pair(1, 2));
    CHECK_FALSE(log.contains_pair(0, 2));
    CHECK(log.involves(2));
    CHECK_FALSE(log.involves(3));
  }

  TEST_CASE("descriptions") {
    ObjectSpec o;
    o.color = Color::green;
    o.shape = Shape::cube;
    o.material = Material::rubber;
    CHECK(describe(o) == "green rubber cube");
  }
}
