#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdpo/rng.hpp"

// Deterministic 1-D micro-world: point objects of equal mass on a segment
// with reflecting walls. Object-object contacts exchange velocities and are
// logged; wall bounces are not.
namespace cdpo::microworld {

enum class Color : std::uint8_t { gray, red, blue, green, brown, purple, cyan, yellow };
enum class Shape : std::uint8_t { cube, sphere, cylinder };
enum class Material : std::uint8_t { rubber, metal };

inline constexpr int kNumColors = 8;
inline constexpr int kNumShapes = 3;
inline constexpr int kNumMaterials = 2;
inline constexpr int kAttributeSpace = kNumColors * kNumShapes * kNumMaterials;
// Width of the concatenated color/shape/material one-hot.
inline constexpr int kAttributeOneHotWidth = kNumColors + kNumShapes + kNumMaterials;

inline constexpr double kContactEpsilon = 1e-9;
inline constexpr double kMinSeparation = 1.0;

using ObjectId = int;

struct ObjectSpec {
  ObjectId id = 0;
  Color color = Color::gray;
  Shape shape = Shape::cube;
  Material material = Material::rubber;
  double position0 = 0.0;
  double velocity0 = 0.0;
};

struct WorldConfig {
  int num_objects = 5;
  int horizon = 20;
  double arena_length = 20.0;
  std::uint64_t seed = 0;
  // Probability that an object starts at rest; resting objects act as blockers.
  double rest_probability = 0.4;
  double max_speed = 1.0;

  // Throws ConfigError.
  void validate() const;
};

struct World {
  std::int64_t id = 0;
  WorldConfig config;
  std::vector<ObjectSpec> objects;

  const ObjectSpec& object(ObjectId id) const;
};

struct CollisionEvent {
  ObjectId a = 0;
  ObjectId b = 0;
  int step = 0;

  friend auto operator<=>(const CollisionEvent& x, const CollisionEvent& y) {
    if (auto c = x.step <=> y.step; c != 0) return c;
    if (auto c = x.a <=> y.a; c != 0) return c;
    return x.b <=> y.b;
  }
  friend bool operator==(const CollisionEvent&, const CollisionEvent&) = default;
};

// Sorted by (step, a, b); a < b; no duplicate triples.
struct EventLog {
  std::vector<CollisionEvent> events;

  // True iff some event matches the unordered pair at any step.
  bool contains_pair(ObjectId x, ObjectId y) const;
  bool involves(ObjectId id) const;

  friend bool operator==(const EventLog&, const EventLog&) = default;
};

// Distinct attribute triples, non-overlapping starts; a pure function of the
// generator state. Throws ConfigError when the attribute space is exhausted.
World generate_world(const WorldConfig& config, Rng& rng);

// Convenience: seeds the generator from config.seed.
World generate_world(const WorldConfig& config);

EventLog simulate(const World& world, std::optional<ObjectId> removed = std::nullopt);

// Velocities of all objects (indexed by id; removed objects hold 0)
// immediately before and after one logged contact.
struct ContactSnapshot {
  CollisionEvent event;
  std::vector<double> velocities_before;
  std::vector<double> velocities_after;
};

struct SimulationTrace {
  EventLog log;
  std::vector<ContactSnapshot> contacts;
};

SimulationTrace simulate_traced(const World& world,
                                std::optional<ObjectId> removed = std::nullopt);

std::string describe(const ObjectSpec& object);
std::string to_string(Color c);
std::string to_string(Shape s);
std::string to_string(Material m);

}  // namespace cdpo::microworld
