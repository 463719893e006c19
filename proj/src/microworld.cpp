#include "cdpo/microworld.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "cdpo/errors.hpp"

namespace cdpo::microworld {

void WorldConfig::validate() const {
  if (num_objects < 2) throw ConfigError("num_objects must be >= 2");
  if (num_objects > kAttributeSpace)
    throw ConfigError("num_objects exceeds the attribute space (" +
                      std::to_string(kAttributeSpace) + ")");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (!(arena_length > 0.0) || !std::isfinite(arena_length))
    throw ConfigError("arena_length must be positive and finite");
  if ((num_objects - 1) * kMinSeparation > arena_length)
    throw ConfigError("arena too short to place objects without overlap");
  if (rest_probability < 0.0 || rest_probability > 1.0)
    throw ConfigError("rest_probability must lie in [0, 1]");
  if (!(max_speed > 0.0)) throw ConfigError("max_speed must be positive");
}

const ObjectSpec& World::object(ObjectId id) const {
  if (id < 0 || id >= static_cast<ObjectId>(objects.size()))
    throw ConfigError("object id out of range: " + std::to_string(id));
  return objects[static_cast<std::size_t>(id)];
}

bool EventLog::contains_pair(ObjectId x, ObjectId y) const {
  const ObjectId a = std::min(x, y);
  const ObjectId b = std::max(x, y);
  return std::any_of(events.begin(), events.end(),
                     [&](const CollisionEvent& e) { return e.a == a && e.b == b; });
}

bool EventLog::involves(ObjectId id) const {
  return std::any_of(events.begin(), events.end(),
                     [&](const CollisionEvent& e) { return e.a == id || e.b == id; });
}

World generate_world(const WorldConfig& config, Rng& rng) {
  config.validate();
  const int n = config.num_objects;

  // Partial Fisher-Yates over the attribute space gives distinct triples.
  std::vector<int> triples(kAttributeSpace);
  std::iota(triples.begin(), triples.end(), 0);
  for (int i = 0; i < n; ++i) {
    const int j = uniform_int(rng, i, kAttributeSpace - 1);
    std::swap(triples[static_cast<std::size_t>(i)], triples[static_cast<std::size_t>(j)]);
  }

  // Rejection sampling of positions; fall back to an even spread with jitter
  // when the arena is crowded.
  std::vector<double> positions;
  positions.reserve(static_cast<std::size_t>(n));
  constexpr int kPlacementAttempts = 1000;
  for (int attempt = 0; attempt < kPlacementAttempts && static_cast<int>(positions.size()) < n;
       ++attempt) {
    const double x = uniform01(rng) * config.arena_length;
    const bool clear = std::all_of(positions.begin(), positions.end(), [&](double p) {
      return std::abs(p - x) >= kMinSeparation;
    });
    if (clear) positions.push_back(x);
  }
  if (static_cast<int>(positions.size()) < n) {
    positions.clear();
    const double spacing = config.arena_length / n;
    for (int i = 0; i < n; ++i) positions.push_back((i + 0.5) * spacing);
  }

  World world;
  world.config = config;
  world.objects.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int t = triples[static_cast<std::size_t>(i)];
    ObjectSpec o;
    o.id = i;
    o.color = static_cast<Color>(t % kNumColors);
    o.shape = static_cast<Shape>((t / kNumColors) % kNumShapes);
    o.material = static_cast<Material>(t / (kNumColors * kNumShapes));
    o.position0 = positions[static_cast<std::size_t>(i)];
    o.velocity0 = bernoulli(rng, config.rest_probability)
                      ? 0.0
                      : (2.0 * uniform01(rng) - 1.0) * config.max_speed;
    world.objects.push_back(o);
  }
  return world;
}

World generate_world(const WorldConfig& config) {
  Rng rng = make_stream(config.seed, StreamTag::world);
  return generate_world(config, rng);
}

namespace {

struct Body {
  ObjectId id;
  double x;
  double v;
};

enum class ContactKind { none, pair, left_wall, right_wall };

template <class OnContact>
EventLog run(const World& world, std::optional<ObjectId> removed, OnContact&& on_contact) {
  if (removed) world.object(*removed);  // validates the id

  const double length = world.config.arena_length;
  std::vector<Body> bodies;
  for (const auto& o : world.objects)
    if (!removed || o.id != *removed) bodies.push_back({o.id, o.position0, o.velocity0});
  // Bodies never pass each other, so array order is spatial order for the
  // whole run.
  std::sort(bodies.begin(), bodies.end(), [](const Body& p, const Body& q) {
    return p.x != q.x ? p.x < q.x : p.id < q.id;
  });

  const std::size_t n = bodies.size();
  auto advance = [&](double dt) {
    for (auto& b : bodies) b.x += b.v * dt;
  };
  auto time_to_close = [](double gap, double speed) {
    return gap <= kContactEpsilon ? 0.0 : gap / speed;
  };

  constexpr int kMaxContactsPerStep = 100000;
  std::vector<CollisionEvent> events;
  for (int step = 0; step < world.config.horizon; ++step) {
    double t = 0.0;
    for (int guard = 0;; ++guard) {
      if (guard > kMaxContactsPerStep)
        throw NumericError("contact resolution did not settle at step " + std::to_string(step));

      double best = std::numeric_limits<double>::infinity();
      ContactKind kind = ContactKind::none;
      std::size_t index = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const double closing = bodies[i].v - bodies[i + 1].v;
        if (closing <= 0.0) continue;
        const double dt = time_to_close(bodies[i + 1].x - bodies[i].x, closing);
        if (dt < best) {
          best = dt;
          kind = ContactKind::pair;
          index = i;
        }
      }
      if (n > 0 && bodies.front().v < 0.0) {
        const double dt = time_to_close(bodies.front().x, -bodies.front().v);
        if (dt < best) {
          best = dt;
          kind = ContactKind::left_wall;
        }
      }
      if (n > 0 && bodies.back().v > 0.0) {
        const double dt = time_to_close(length - bodies.back().x, bodies.back().v);
        if (dt < best) {
          best = dt;
          kind = ContactKind::right_wall;
        }
      }

      if (kind == ContactKind::none || t + best >= 1.0) {
        advance(1.0 - t);
        break;
      }
      advance(best);
      t += best;

      switch (kind) {
        case ContactKind::pair: {
          Body& left = bodies[index];
          Body& right = bodies[index + 1];
          if (left.x > right.x) left.x = right.x = 0.5 * (left.x + right.x);
          CollisionEvent e{std::min(left.id, right.id), std::max(left.id, right.id), step};
          on_contact(e, bodies, [&] { std::swap(left.v, right.v); });
          events.push_back(e);
          break;
        }
        case ContactKind::left_wall:
          bodies.front().x = std::max(bodies.front().x, 0.0);
          bodies.front().v = -bodies.front().v;
          break;
        case ContactKind::right_wall:
          bodies.back().x = std::min(bodies.back().x, length);
          bodies.back().v = -bodies.back().v;
          break;
        case ContactKind::none:
          break;
      }
    }
  }

  std::sort(events.begin(), events.end());
  events.erase(std::unique(events.begin(), events.end()), events.end());
  return EventLog{std::move(events)};
}

}  // namespace

EventLog simulate(const World& world, std::optional<ObjectId> removed) {
  return run(world, removed, [](const CollisionEvent&, const std::vector<Body>&, auto&& resolve) {
    resolve();
  });
}

SimulationTrace simulate_traced(const World& world, std::optional<ObjectId> removed) {
  SimulationTrace trace;
  const std::size_t n = world.objects.size();
  auto velocities = [n](const std::vector<Body>& bodies) {
    std::vector<double> v(n, 0.0);
    for (const auto& b : bodies) v[static_cast<std::size_t>(b.id)] = b.v;
    return v;
  };
  trace.log = run(world, removed,
                  [&](const CollisionEvent& e, const std::vector<Body>& bodies, auto&& resolve) {
                    ContactSnapshot snap;
                    snap.event = e;
                    snap.velocities_before = velocities(bodies);
                    resolve();
                    snap.velocities_after = velocities(bodies);
                    trace.contacts.push_back(std::move(snap));
                  });
  return trace;
}

std::string to_string(Color c) {
  static constexpr std::array<const char*, kNumColors> names{
      "gray", "red", "blue", "green", "brown", "purple", "cyan", "yellow"};
  return names[static_cast<std::size_t>(c)];
}

std::string to_string(Shape s) {
  static constexpr std::array<const char*, kNumShapes> names{"cube", "sphere", "cylinder"};
  return names[static_cast<std::size_t>(s)];
}

std::string to_string(Material m) {
  static constexpr std::array<const char*, kNumMaterials> names{"rubber", "metal"};
  return names[static_cast<std::size_t>(m)];
}

std::string describe(const ObjectSpec& object) {
  return to_string(object.color) + " " + to_string(object.material) + " " +
         to_string(object.shape);
}

}  // namespace cdpo::microworld
