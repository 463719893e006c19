#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdpo/letters.hpp"
#include "cdpo/microworld.hpp"
#include "cdpo/qgen.hpp"
#include "cdpo/rng.hpp"

// Tiny autoregressive categorical policy over a ten-token vocabulary:
//
//   u_k    = tanh(A s_k + a)                  slot-shared question encoder, k = 1..5
//   h      = [u_1 .. u_5]
//   z_t    = tanh(W [h; mean(emb(o_<t)); emb(o_{t-1})] + b)
//   logits = Wo z_t + bo,  plus u_k . (M z_t) on letter k (pointer scores)
//
// s_k gathers option slot k's features together with the question-level
// features (removal, negation), so every slot is scored by the same weights.
namespace cdpo::policy {

enum class Token : std::uint8_t {
  think = 0,
  ans_open,
  letter_a,
  letter_b,
  letter_c,
  letter_d,
  letter_e,
  comma,
  ans_close,
  eos,
};

inline constexpr int kVocabSize = 10;
inline constexpr int kVocabVersion = 1;

inline int token_id(Token t) { return static_cast<int>(t); }
inline Token token_from_id(int id) { return static_cast<Token>(id); }
inline Token letter_token(Letter l) { return token_from_id(token_id(Token::letter_a) + index_of(l)); }
std::optional<Letter> token_letter(Token t);
std::string token_name(Token t);

using TokenDistribution = std::array<double, kVocabSize>;
using LogitGradient = std::array<double, kVocabSize>;

// --- question encoding ---

namespace layout {
inline constexpr int kAttr = microworld::kAttributeOneHotWidth;
// Removal block: removed-object attributes, no-removal slot, then one
// causal-dependence flag per option slot (the option's occurrence differs
// between the factual and the counterfactual run).
inline constexpr int kRemovedAttr = 0;
inline constexpr int kNoRemoval = kAttr;
inline constexpr int kDependence = kNoRemoval + 1;
inline constexpr int kRemovalBlockEnd = kDependence + kMaxOptions;
inline constexpr int kNegation = kRemovalBlockEnd;
// Per option slot: both participants' attributes, then visibility in the
// factual log.
inline constexpr int kSlotBase = kNegation + 1;
inline constexpr int kSlotStride = 2 * kAttr + 1;
inline constexpr int kSlotVisible = 2 * kAttr;
inline constexpr int kMask = kSlotBase + kMaxOptions * kSlotStride;
inline constexpr int kEncodingWidth = kMask + kMaxOptions;
// Slot-local encoder input: slot block, dependence, mask, negation,
// no-removal, removed attributes.
inline constexpr int kSlotInputWidth = kSlotStride + 4 + kAttr;
}  // namespace layout

struct QuestionEncoding {
  std::vector<double> values;  // layout::kEncodingWidth entries in [0, 1]
  friend bool operator==(const QuestionEncoding&, const QuestionEncoding&) = default;
};

// Runs the factual and (if any) counterfactual simulation. Throws
// EncodingError when the option count exceeds the slots.
QuestionEncoding encode_question(const qgen::Question& question, const microworld::World& world);

QuestionEncoding encode_question(const qgen::Question& question, const microworld::World& world,
                                 const microworld::EventLog& factual_log,
                                 const microworld::EventLog& outcome_log);

// --- parameters ---

struct Architecture {
  int slot_width = 8;
  int embed_width = 8;
  int hidden_width = 32;
  int max_len = 12;

  int context_width() const { return kMaxOptions * slot_width; }
  int layer_input_width() const { return context_width() + 2 * embed_width; }
  void validate() const;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// Offsets into the flat parameter array.
struct ParamLayout {
  explicit ParamLayout(const Architecture& arch);
  std::size_t enc_w, enc_b, hid_w, hid_b, out_w, out_b, emb, ptr, total;
};

class PolicyParams {
 public:
  PolicyParams() : PolicyParams(Architecture{}) {}
  explicit PolicyParams(Architecture arch);  // all zeros

  static PolicyParams random(const Architecture& arch, Rng& rng, double scale);

  const Architecture& arch() const { return arch_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  bool all_finite() const;

  friend bool operator==(const PolicyParams& x, const PolicyParams& y) {
    return x.arch_ == y.arch_ && x.values_ == y.values_;
  }

 private:
  Architecture arch_;
  ParamLayout layout_;
  std::vector<double> values_;
};

// --- evaluation ---

// Forward pass over a whole token sequence: distribution(t) is
// pi(. | q, tokens[0..t)). Keeps activations for the reverse pass.
class SequenceForward {
 public:
  SequenceForward(const PolicyParams& params, const QuestionEncoding& enc,
                  std::span<const Token> tokens);

  int length() const { return static_cast<int>(tokens_.size()); }
  const TokenDistribution& distribution(int t) const { return probs_[static_cast<std::size_t>(t)]; }
  const TokenDistribution& log_distribution(int t) const {
    return log_probs_[static_cast<std::size_t>(t)];
  }
  double token_logprob(int t) const;

  // grad += sum_t J_t^T dlogits[t], where J_t is the Jacobian of position
  // t's logits with respect to the flat parameters.
  void backward(std::span<const LogitGradient> dlogits, std::span<double> grad) const;

 private:
  const PolicyParams& params_;
  std::vector<Token> tokens_;
  std::vector<double> slot_inputs_;   // kMaxOptions x kSlotInputWidth
  std::vector<double> context_;       // h
  std::vector<double> layer_inputs_;  // T x layer_input_width
  std::vector<double> hidden_;        // T x hidden_width
  std::vector<TokenDistribution> probs_;
  std::vector<TokenDistribution> log_probs_;
};

TokenDistribution forward(const PolicyParams& params, const QuestionEncoding& enc,
                          std::span<const Token> prefix);

struct Response {
  std::vector<Token> tokens;
  std::vector<double> logprobs;  // under the sampling policy

  friend bool operator==(const Response&, const Response&) = default;
};

Response sample_response(const PolicyParams& params, const QuestionEncoding& enc, Rng& rng,
                         int max_len);

// Argmax decoding (ties to the lowest token id).
Response greedy_response(const PolicyParams& params, const QuestionEncoding& enc, int max_len);

std::vector<double> logprob(const PolicyParams& params, const QuestionEncoding& enc,
                            std::span<const Token> tokens);

// Gradient of sum_t log pi(tokens[t] | q, tokens[<t]).
std::vector<double> grad_logprob(const PolicyParams& params, const QuestionEncoding& enc,
                                 std::span<const Token> tokens);

// THINK* ANS_OPEN letter (COMMA letter)* ANS_CLOSE EOS with distinct
// letters; nullopt is a format failure.
std::optional<LetterSet> parse_answer(std::span<const Token> tokens);

// Tokens for a well-formed answer with `think` leading THINK tokens.
std::vector<Token> format_answer(LetterSet letters, int think = 0);

// --- checkpoints ---

struct CheckpointMeta {
  std::string config_hash;
  std::vector<std::string> lineage;  // e.g. "init:seed=3", "bias:steps=500"
};

// First line: JSON header (schema_version, architecture, vocab_version,
// param_count, lineage, config_hash); then one parameter per line in
// shortest round-trip form.
void save_checkpoint(const std::string& path, const PolicyParams& params,
                     const CheckpointMeta& meta);
PolicyParams load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);

}  // namespace cdpo::policy
