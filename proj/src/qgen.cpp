#include "cdpo/qgen.hpp"

#include <algorithm>
#include <cmath>

#include "cdpo/errors.hpp"

namespace cdpo::qgen {

std::string to_string(QuestionType t) {
  return t == QuestionType::observational ? "observational" : "inferential";
}

QuestionType question_type_from_string(const std::string& s) {
  if (s == "observational") return QuestionType::observational;
  if (s == "inferential") return QuestionType::inferential;
  throw DatasetError("unknown question type: " + s);
}

Event Event::between(ObjectId x, ObjectId y) {
  return Event{std::min(x, y), std::max(x, y)};
}

const Option& Question::option(Letter l) const {
  for (const auto& o : options)
    if (o.letter == l) return o;
  throw DatasetError(std::string("question has no option ") + to_char(l));
}

void Question::validate() const {
  const int k = static_cast<int>(options.size());
  if (k < 2 || k > kMaxOptions) throw DatasetError("option count must be 2..5");
  if (static_cast<int>(option_types.size()) != k)
    throw DatasetError("option_types must parallel options");
  LetterSet letters;
  for (int i = 0; i < k; ++i) {
    const auto& o = options[static_cast<std::size_t>(i)];
    if (o.letter != letter_at(i)) throw DatasetError("option letters must be A.. in order");
    if (o.event.a >= o.event.b) throw DatasetError("option event must satisfy a < b");
    letters.insert(o.letter);
  }
  if (answer_set.empty()) throw DatasetError("answer_set must be non-empty");
  if (!answer_set.is_subset_of(letters)) throw DatasetError("answer_set outside option letters");
  if (instance_type != instance_type_of(*this))
    throw DatasetError("instance_type inconsistent with option types");
}

std::string render_option(const Option& o, const World& world, bool negated_form) {
  const std::string a = microworld::describe(world.object(o.event.a));
  const std::string b = microworld::describe(world.object(o.event.b));
  return "The " + a + " and the " + b + (negated_form ? " do not collide" : " collide");
}

std::string render_question(const Question& q, const World& world) {
  const std::string verb = q.negated ? "will not happen" : "will happen";
  if (!q.removed) return "Which of the following " + verb + "?";
  return "Which of the following " + verb + " if the " +
         microworld::describe(world.object(*q.removed)) + " is removed?";
}

Event extract_base_event(const Option& option) {
  return Event::between(option.event.a, option.event.b);
}

bool contains_negation(const Question& question) { return question.negated; }

NegatedEventQuery negate_event(const Event& event) { return NegatedEventQuery{event}; }

bool search_in_annotations(const EventQuery& query, const EventLog& factual_log) {
  return std::visit(
      [&](const auto& q) -> bool {
        using T = std::decay_t<decltype(q)>;
        if constexpr (std::is_same_v<T, Event>) {
          return factual_log.contains_pair(q.a, q.b);
        } else {
          return !factual_log.contains_pair(q.base.a, q.base.b);
        }
      },
      query);
}

QuestionType classify_option(const Question& question, const Option& option,
                             const EventLog& factual_log) {
  const Event base = extract_base_event(option);
  const EventQuery query =
      contains_negation(question) ? EventQuery{negate_event(base)} : EventQuery{base};
  return search_in_annotations(query, factual_log) ? QuestionType::observational
                                                   : QuestionType::inferential;
}

bool option_is_correct(const Event& event, const EventLog& outcome_log, bool negated) {
  return outcome_log.contains_pair(event.a, event.b) != negated;
}

QuestionType instance_type_of(const Question& q) {
  for (std::size_t i = 0; i < q.options.size(); ++i)
    if (q.answer_set.contains(q.options[i].letter) &&
        q.option_types[i] == QuestionType::inferential)
      return QuestionType::inferential;
  return QuestionType::observational;
}

void label_question(Question& q, const EventLog& factual_log, const EventLog& outcome_log) {
  q.answer_set = LetterSet{};
  q.option_types.clear();
  for (const auto& o : q.options) {
    if (option_is_correct(o.event, outcome_log, q.negated)) q.answer_set.insert(o.letter);
    q.option_types.push_back(classify_option(q, o, factual_log));
  }
  q.instance_type = instance_type_of(q);
}

namespace {

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i)
    std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(uniform_int(rng, 0, i))]);
}

}  // namespace

Question generate_question(const World& world, const EventLog& factual_log, Rng& rng) {
  const int n = static_cast<int>(world.objects.size());
  if (n < 3) throw GenerationError("question generation needs at least 3 objects");

  for (int attempt = 0; attempt < kQuestionRetryBudget; ++attempt) {
    const ObjectId removed = uniform_int(rng, 0, n - 1);
    const EventLog counterfactual = microworld::simulate(world, removed);
    const bool negated = bernoulli(rng, 0.5);

    // Options describe the remaining objects only.
    std::vector<Event> factual, counterfactual_only, never;
    for (ObjectId a = 0; a < n; ++a) {
      for (ObjectId b = a + 1; b < n; ++b) {
        if (a == removed || b == removed) continue;
        const Event e{a, b};
        if (factual_log.contains_pair(a, b))
          factual.push_back(e);
        else if (counterfactual.contains_pair(a, b))
          counterfactual_only.push_back(e);
        else
          never.push_back(e);
      }
    }
    const int available =
        static_cast<int>(factual.size() + counterfactual_only.size() + never.size());
    if (available < 2) continue;

    std::vector<std::vector<Event>*> categories{&factual, &counterfactual_only, &never};
    int nonempty = 0;
    for (auto* c : categories) {
      shuffle(*c, rng);
      if (!c->empty()) ++nonempty;
    }
    int k = uniform_int(rng, 2, std::min(kMaxOptions, available));
    k = std::min(std::max(k, nonempty), std::min(kMaxOptions, available));

    std::vector<Event> chosen, rest;
    for (auto* c : categories) {
      if (c->empty()) continue;
      chosen.push_back(c->front());
      rest.insert(rest.end(), c->begin() + 1, c->end());
    }
    shuffle(rest, rng);
    for (std::size_t i = 0; static_cast<int>(chosen.size()) < k; ++i) chosen.push_back(rest[i]);
    shuffle(chosen, rng);

    Question q;
    q.world_id = world.id;
    q.removed = removed;
    q.negated = negated;
    for (int i = 0; i < k; ++i)
      q.options.push_back(Option{letter_at(i), chosen[static_cast<std::size_t>(i)]});
    label_question(q, factual_log, counterfactual);
    if (!q.answer_set.empty()) return q;
  }
  throw GenerationError("no question with a non-empty answer set within the retry budget (world " +
                        std::to_string(world.id) + ")");
}

bool targets_observational(int index, double share) {
  return std::floor((index + 1) * share) > std::floor(index * share);
}

LabeledItem generate_item(const DatasetSpec& spec, int index) {
  const QuestionType target = targets_observational(index, spec.observational_share)
                                  ? QuestionType::observational
                                  : QuestionType::inferential;
  Rng rng = make_stream(spec.seed, StreamTag::dataset, static_cast<std::uint64_t>(index));
  for (int attempt = 0; attempt < spec.attempts_per_item; ++attempt) {
    microworld::WorldConfig wc = spec.world;
    wc.seed = rng();
    LabeledItem item;
    item.world = microworld::generate_world(wc);
    item.world.id = spec.world_id_base + index;
    item.factual_log = microworld::simulate(item.world);
    Rng qrng = make_stream(wc.seed, StreamTag::question);
    try {
      item.question = generate_question(item.world, item.factual_log, qrng);
    } catch (const GenerationError&) {
      continue;
    }
    if (item.question.instance_type == target) return item;
  }
  throw GenerationError("could not generate an " + to_string(target) + " instance for item " +
                        std::to_string(index) + " within " +
                        std::to_string(spec.attempts_per_item) + " worlds");
}

std::vector<LabeledItem> generate_dataset(const DatasetSpec& spec) {
  if (spec.count < 0) throw ConfigError("dataset count must be non-negative");
  if (spec.observational_share < 0.0 || spec.observational_share > 1.0)
    throw ConfigError("observational_share must lie in [0, 1]");
  spec.world.validate();
  std::vector<LabeledItem> items(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) items[static_cast<std::size_t>(i)] = generate_item(spec, i);
  return items;
}

std::vector<LabeledItem> build_bias_dataset(const std::vector<LabeledItem>& items) {
  std::vector<LabeledItem> out;
  for (const auto& item : items) {
    if (item.question.instance_type != QuestionType::observational) continue;
    LabeledItem stripped = item;
    stripped.question.removed.reset();
    // Without the intervention the outcome is the factual run itself.
    label_question(stripped.question, item.factual_log, item.factual_log);
    if (stripped.question.answer_set.empty()) continue;
    out.push_back(std::move(stripped));
  }
  if (out.empty()) throw DatasetError("bias dataset is empty; widen generation");
  return out;
}

double observational_share(const std::vector<LabeledItem>& items) {
  if (items.empty()) return 0.0;
  const auto obs = std::count_if(items.begin(), items.end(), [](const LabeledItem& it) {
    return it.question.instance_type == QuestionType::observational;
  });
  return static_cast<double>(obs) / static_cast<double>(items.size());
}

}  // namespace cdpo::qgen
