#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cdpo/letters.hpp"
#include "cdpo/microworld.hpp"
#include "cdpo/rng.hpp"

// Counterfactual multiple-choice questions over micro-worlds, the
// observational/inferential option filter, and the bias dataset.
namespace cdpo::qgen {

using microworld::EventLog;
using microworld::ObjectId;
using microworld::World;

enum class QuestionType : std::uint8_t { observational, inferential };

std::string to_string(QuestionType t);
QuestionType question_type_from_string(const std::string& s);

// Unordered collision between two objects; always stored with a < b.
struct Event {
  ObjectId a = 0;
  ObjectId b = 0;

  static Event between(ObjectId x, ObjectId y);
  friend auto operator<=>(const Event&, const Event&) = default;
};

// Single-level negation marker; NegatedEventQuery cannot wrap itself.
struct NegatedEventQuery {
  Event base;
  friend bool operator==(const NegatedEventQuery&, const NegatedEventQuery&) = default;
};

using EventQuery = std::variant<Event, NegatedEventQuery>;

struct Option {
  Letter letter = Letter::A;
  Event event;
};

struct Question {
  std::int64_t world_id = 0;
  std::optional<ObjectId> removed;  // absent for bias-dataset (stripped) questions
  bool negated = false;
  std::vector<Option> options;      // 2..5, letters A.. in order
  LetterSet answer_set;
  std::vector<QuestionType> option_types;  // parallel to options
  QuestionType instance_type = QuestionType::observational;

  const Option& option(Letter l) const;
  // Throws DatasetError on violated invariants.
  void validate() const;
};

// Template rendering, e.g. "Which of the following will happen if the green
// rubber cube is removed?".
std::string render_question(const Question& q, const World& world);
std::string render_option(const Option& o, const World& world, bool negated_form = false);

// --- filter primitives ---

Event extract_base_event(const Option& option);
bool contains_negation(const Question& question);
NegatedEventQuery negate_event(const Event& event);
bool search_in_annotations(const EventQuery& query, const EventLog& factual_log);
QuestionType classify_option(const Question& question, const Option& option,
                             const EventLog& factual_log);

// --- generation ---

inline constexpr int kQuestionRetryBudget = 64;

// Ground truth for one option: (event in counterfactual log) XOR negated.
bool option_is_correct(const Event& event, const EventLog& outcome_log, bool negated);

// Observational iff every correct option is Observational.
QuestionType instance_type_of(const Question& q);

// Labels answer_set, option_types and instance_type from the logs; options,
// removed and negated must already be set.
void label_question(Question& q, const EventLog& factual_log, const EventLog& outcome_log);

// Requires >= 3 objects and factual_log == simulate(world). Throws
// GenerationError when no non-empty answer set is found within the budget.
Question generate_question(const World& world, const EventLog& factual_log, Rng& rng);

struct LabeledItem {
  World world;
  EventLog factual_log;
  Question question;
};

struct DatasetSpec {
  microworld::WorldConfig world;
  int count = 0;
  double observational_share = 0.74;
  std::uint64_t seed = 0;
  std::int64_t world_id_base = 0;
  // Fresh worlds drawn per item before giving up on the target type.
  int attempts_per_item = 400;
};

// Item i is targeted Observational iff floor((i+1)p) > floor(ip), so any
// prefix of the dataset is within one item of the requested share. Each item
// draws from its own stream (seed, i); items are independent of each other.
// Throws GenerationError naming the type that could not be met.
std::vector<LabeledItem> generate_dataset(const DatasetSpec& spec);

// Single item of generate_dataset; exposed for parallel producers.
LabeledItem generate_item(const DatasetSpec& spec, int index);

bool targets_observational(int index, double share);

// Keeps Observational instances, strips the counterfactual condition and
// relabels against the factual log. Throws DatasetError on empty output.
std::vector<LabeledItem> build_bias_dataset(const std::vector<LabeledItem>& items);

double observational_share(const std::vector<LabeledItem>& items);

}  // namespace cdpo::qgen
