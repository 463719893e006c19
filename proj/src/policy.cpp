#include "cdpo/policy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "cdpo/errors.hpp"

namespace cdpo::policy {

using json = nlohmann::json;

std::optional<Letter> token_letter(Token t) {
  const int id = token_id(t);
  if (id < token_id(Token::letter_a) || id > token_id(Token::letter_e)) return std::nullopt;
  return letter_at(id - token_id(Token::letter_a));
}

std::string token_name(Token t) {
  switch (t) {
    case Token::think: return "THINK";
    case Token::ans_open: return "ANS_OPEN";
    case Token::comma: return "COMMA";
    case Token::ans_close: return "ANS_CLOSE";
    case Token::eos: return "EOS";
    default: return std::string("LETTER_") + to_char(*token_letter(t));
  }
}

// ---------------------------------------------------------------------------
// Encoding

namespace {

void write_attributes(std::vector<double>& v, int offset, const microworld::ObjectSpec& o) {
  using namespace microworld;
  const auto at = [&](int i) -> double& { return v[static_cast<std::size_t>(offset + i)]; };
  at(static_cast<int>(o.color)) = 1.0;
  at(kNumColors + static_cast<int>(o.shape)) = 1.0;
  at(kNumColors + kNumShapes + static_cast<int>(o.material)) = 1.0;
}

}  // namespace

QuestionEncoding encode_question(const qgen::Question& question, const microworld::World& world,
                                 const microworld::EventLog& factual_log,
                                 const microworld::EventLog& outcome_log) {
  using namespace layout;
  if (static_cast<int>(question.options.size()) > kMaxOptions)
    throw EncodingError("question has more options than encoding slots");
  QuestionEncoding enc;
  enc.values.assign(kEncodingWidth, 0.0);
  auto& v = enc.values;

  if (question.removed)
    write_attributes(v, kRemovedAttr, world.object(*question.removed));
  else
    v[kNoRemoval] = 1.0;
  v[kNegation] = question.negated ? 1.0 : 0.0;

  for (std::size_t k = 0; k < question.options.size(); ++k) {
    const auto& e = question.options[k].event;
    const int base = kSlotBase + static_cast<int>(k) * kSlotStride;
    write_attributes(v, base, world.object(e.a));
    write_attributes(v, base + kAttr, world.object(e.b));
    const bool visible = factual_log.contains_pair(e.a, e.b);
    v[static_cast<std::size_t>(base + kSlotVisible)] = visible ? 1.0 : 0.0;
    if (question.removed && visible != outcome_log.contains_pair(e.a, e.b))
      v[static_cast<std::size_t>(kDependence) + k] = 1.0;
    v[static_cast<std::size_t>(kMask) + k] = 1.0;
  }
  return enc;
}

QuestionEncoding encode_question(const qgen::Question& question, const microworld::World& world) {
  const auto factual = microworld::simulate(world);
  if (!question.removed) return encode_question(question, world, factual, factual);
  return encode_question(question, world, factual, microworld::simulate(world, question.removed));
}

// ---------------------------------------------------------------------------
// Parameters

void Architecture::validate() const {
  if (slot_width < 1 || embed_width < 1 || hidden_width < 1)
    throw ConfigError("architecture widths must be positive");
  if (max_len < 4) throw ConfigError("max_len must allow the minimal answer (4 tokens)");
}

ParamLayout::ParamLayout(const Architecture& arch) {
  const std::size_t hs = static_cast<std::size_t>(arch.slot_width);
  const std::size_t hid = static_cast<std::size_t>(arch.hidden_width);
  const std::size_t in = static_cast<std::size_t>(arch.layer_input_width());
  enc_w = 0;
  enc_b = enc_w + hs * layout::kSlotInputWidth;
  hid_w = enc_b + hs;
  hid_b = hid_w + hid * in;
  out_w = hid_b + hid;
  out_b = out_w + kVocabSize * hid;
  emb = out_b + kVocabSize;
  ptr = emb + kVocabSize * static_cast<std::size_t>(arch.embed_width);
  total = ptr + hs * hid;
}

PolicyParams::PolicyParams(Architecture arch)
    : arch_(arch), layout_(arch), values_(layout_.total, 0.0) {
  arch_.validate();
}

PolicyParams PolicyParams::random(const Architecture& arch, Rng& rng, double scale) {
  PolicyParams p(arch);
  const auto& l = p.layout_;
  auto fill = [&](std::size_t from, std::size_t to, double s) {
    for (std::size_t i = from; i < to; ++i) p.values_[i] = normal(rng, 0.0, s);
  };
  // Biases start at zero.
  fill(l.enc_w, l.enc_b, scale);
  fill(l.hid_w, l.hid_b, scale);
  fill(l.out_w, l.out_b, scale);
  fill(l.emb, l.total, scale);  // embeddings and pointer
  return p;
}

bool PolicyParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

// ---------------------------------------------------------------------------
// Forward / reverse

namespace {

std::vector<double> slot_inputs_of(const QuestionEncoding& enc) {
  using namespace layout;
  if (enc.values.size() != static_cast<std::size_t>(kEncodingWidth))
    throw EncodingError("encoding has the wrong width");
  std::vector<double> s(static_cast<std::size_t>(kMaxOptions * kSlotInputWidth));
  for (int k = 0; k < kMaxOptions; ++k) {
    double* out = s.data() + k * kSlotInputWidth;
    const double* slot = enc.values.data() + kSlotBase + k * kSlotStride;
    std::copy(slot, slot + kSlotStride, out);
    out[kSlotStride + 0] = enc.values[static_cast<std::size_t>(kDependence + k)];
    out[kSlotStride + 1] = enc.values[static_cast<std::size_t>(kMask + k)];
    out[kSlotStride + 2] = enc.values[kNegation];
    out[kSlotStride + 3] = enc.values[kNoRemoval];
    std::copy(enc.values.data() + kRemovedAttr, enc.values.data() + kRemovedAttr + kAttr,
              out + kSlotStride + 4);
  }
  return s;
}

std::vector<double> context_of(const PolicyParams& params, const std::vector<double>& slot_inputs) {
  const auto& a = params.arch();
  const auto& l = params.layout();
  const auto w = params.values();
  const int hs = a.slot_width;
  std::vector<double> h(static_cast<std::size_t>(a.context_width()));
  for (int k = 0; k < kMaxOptions; ++k) {
    const double* s = slot_inputs.data() + k * layout::kSlotInputWidth;
    for (int j = 0; j < hs; ++j) {
      const double* row = &w[l.enc_w + static_cast<std::size_t>(j * layout::kSlotInputWidth)];
      double acc = w[l.enc_b + static_cast<std::size_t>(j)];
      for (int i = 0; i < layout::kSlotInputWidth; ++i) acc += row[i] * s[i];
      h[static_cast<std::size_t>(k * hs + j)] = std::tanh(acc);
    }
  }
  return h;
}

// Running summary of the emitted prefix. The mean is formed as sum / count
// with the sum accumulated in emission order, identically for sampling and
// scoring.
struct PrefixState {
  std::vector<double> sum;
  int count = 0;
  int last = -1;

  explicit PrefixState(int width) : sum(static_cast<std::size_t>(width), 0.0) {}

  void push(const PolicyParams& params, Token t) {
    const int e = params.arch().embed_width;
    const double* row = &params.values()[params.layout().emb + static_cast<std::size_t>(token_id(t) * e)];
    for (int j = 0; j < e; ++j) sum[static_cast<std::size_t>(j)] += row[j];
    ++count;
    last = token_id(t);
  }
};

void layer_input_of(const PolicyParams& params, const std::vector<double>& context,
                    const PrefixState& prefix, double* out) {
  const int e = params.arch().embed_width;
  const int c = params.arch().context_width();
  std::copy(context.begin(), context.end(), out);
  for (int j = 0; j < e; ++j)
    out[c + j] = prefix.count > 0 ? prefix.sum[static_cast<std::size_t>(j)] / prefix.count : 0.0;
  if (prefix.last >= 0) {
    const double* row = &params.values()[params.layout().emb + static_cast<std::size_t>(prefix.last * e)];
    std::copy(row, row + e, out + c + e);
  } else {
    std::fill(out + c + e, out + c + 2 * e, 0.0);
  }
}

void position_forward(const PolicyParams& params, const std::vector<double>& context,
                      const double* input, double* hidden, TokenDistribution& probs,
                      TokenDistribution& log_probs) {
  const auto& a = params.arch();
  const auto& l = params.layout();
  const auto w = params.values();
  const int in = a.layer_input_width();
  const int hid = a.hidden_width;
  const int hs = a.slot_width;
  for (int j = 0; j < hid; ++j) {
    const double* row = &w[l.hid_w + static_cast<std::size_t>(j * in)];
    double acc = w[l.hid_b + static_cast<std::size_t>(j)];
    for (int i = 0; i < in; ++i) acc += row[i] * input[i];
    hidden[j] = std::tanh(acc);
  }
  TokenDistribution logits{};
  double max_logit = -INFINITY;
  for (int v = 0; v < kVocabSize; ++v) {
    const double* row = &w[l.out_w + static_cast<std::size_t>(v * hid)];
    double acc = w[l.out_b + static_cast<std::size_t>(v)];
    for (int j = 0; j < hid; ++j) acc += row[j] * hidden[j];
    logits[static_cast<std::size_t>(v)] = acc;
  }
  // Pointer scores: letter k gains u_k . (M z).
  for (int r = 0; r < hs; ++r) {
    const double* row = &w[l.ptr + static_cast<std::size_t>(r * hid)];
    double mz = 0.0;
    for (int j = 0; j < hid; ++j) mz += row[j] * hidden[j];
    for (int k = 0; k < kMaxOptions; ++k)
      logits[static_cast<std::size_t>(token_id(Token::letter_a) + k)] +=
          context[static_cast<std::size_t>(k * hs + r)] * mz;
  }
  for (int v = 0; v < kVocabSize; ++v) {
    const double x = logits[static_cast<std::size_t>(v)];
    if (!std::isfinite(x)) throw NumericError("non-finite logit");
    max_logit = std::max(max_logit, x);
  }
  double total = 0.0;
  for (int v = 0; v < kVocabSize; ++v) {
    const double e = std::exp(logits[static_cast<std::size_t>(v)] - max_logit);
    probs[static_cast<std::size_t>(v)] = e;
    total += e;
  }
  const double log_total = std::log(total);
  for (int v = 0; v < kVocabSize; ++v) {
    probs[static_cast<std::size_t>(v)] /= total;
    log_probs[static_cast<std::size_t>(v)] = logits[static_cast<std::size_t>(v)] - max_logit - log_total;
  }
}

}  // namespace

SequenceForward::SequenceForward(const PolicyParams& params, const QuestionEncoding& enc,
                                 std::span<const Token> tokens)
    : params_(params), tokens_(tokens.begin(), tokens.end()) {
  const auto& a = params.arch();
  const std::size_t T = tokens_.size();
  const std::size_t in = static_cast<std::size_t>(a.layer_input_width());
  const std::size_t hid = static_cast<std::size_t>(a.hidden_width);
  slot_inputs_ = slot_inputs_of(enc);
  context_ = context_of(params, slot_inputs_);
  layer_inputs_.resize(T * in);
  hidden_.resize(T * hid);
  probs_.resize(T);
  log_probs_.resize(T);
  PrefixState prefix(a.embed_width);
  for (std::size_t t = 0; t < T; ++t) {
    layer_input_of(params, context_, prefix, &layer_inputs_[t * in]);
    position_forward(params, context_, &layer_inputs_[t * in], &hidden_[t * hid], probs_[t], log_probs_[t]);
    prefix.push(params, tokens_[t]);
  }
}

double SequenceForward::token_logprob(int t) const {
  return log_probs_[static_cast<std::size_t>(t)][static_cast<std::size_t>(token_id(tokens_[static_cast<std::size_t>(t)]))];
}

void SequenceForward::backward(std::span<const LogitGradient> dlogits, std::span<double> grad) const {
  const auto& a = params_.arch();
  const auto& l = params_.layout();
  const auto w = params_.values();
  const int T = length();
  const int in = a.layer_input_width();
  const int hid = a.hidden_width;
  const int e = a.embed_width;
  const int c = a.context_width();
  const int hs = a.slot_width;
  if (static_cast<int>(dlogits.size()) != T) throw NumericError("dlogits length mismatch");
  if (grad.size() != params_.size()) throw NumericError("gradient buffer has the wrong size");

  std::vector<double> dcontext(static_cast<std::size_t>(c), 0.0);
  std::vector<double> dz(static_cast<std::size_t>(hid));
  std::vector<double> dinput(static_cast<std::size_t>(in));
  for (int t = 0; t < T; ++t) {
    const auto& g = dlogits[static_cast<std::size_t>(t)];
    const double* z = &hidden_[static_cast<std::size_t>(t * hid)];
    const double* x = &layer_inputs_[static_cast<std::size_t>(t * in)];

    std::fill(dz.begin(), dz.end(), 0.0);
    for (int v = 0; v < kVocabSize; ++v) {
      const double gv = g[static_cast<std::size_t>(v)];
      if (gv == 0.0) continue;
      grad[l.out_b + static_cast<std::size_t>(v)] += gv;
      const std::size_t row = l.out_w + static_cast<std::size_t>(v * hid);
      for (int j = 0; j < hid; ++j) {
        grad[row + static_cast<std::size_t>(j)] += gv * z[j];
        dz[static_cast<std::size_t>(j)] += gv * w[row + static_cast<std::size_t>(j)];
      }
    }
    for (int r = 0; r < hs; ++r) {
      const std::size_t row = l.ptr + static_cast<std::size_t>(r * hid);
      double mz = 0.0, gu = 0.0;
      for (int j = 0; j < hid; ++j) mz += w[row + static_cast<std::size_t>(j)] * z[j];
      for (int k = 0; k < kMaxOptions; ++k) {
        const double gk = g[static_cast<std::size_t>(token_id(Token::letter_a) + k)];
        gu += gk * context_[static_cast<std::size_t>(k * hs + r)];
        dcontext[static_cast<std::size_t>(k * hs + r)] += gk * mz;
      }
      if (gu == 0.0) continue;
      for (int j = 0; j < hid; ++j) {
        grad[row + static_cast<std::size_t>(j)] += gu * z[j];
        dz[static_cast<std::size_t>(j)] += gu * w[row + static_cast<std::size_t>(j)];
      }
    }

    std::fill(dinput.begin(), dinput.end(), 0.0);
    for (int j = 0; j < hid; ++j) {
      const double dpre = dz[static_cast<std::size_t>(j)] * (1.0 - z[j] * z[j]);
      if (dpre == 0.0) continue;
      grad[l.hid_b + static_cast<std::size_t>(j)] += dpre;
      const std::size_t row = l.hid_w + static_cast<std::size_t>(j * in);
      for (int i = 0; i < in; ++i) {
        grad[row + static_cast<std::size_t>(i)] += dpre * x[i];
        dinput[static_cast<std::size_t>(i)] += dpre * w[row + static_cast<std::size_t>(i)];
      }
    }

    for (int i = 0; i < c; ++i) dcontext[static_cast<std::size_t>(i)] += dinput[static_cast<std::size_t>(i)];
    if (t > 0) {
      // mean over tokens[0..t) and the last token tokens[t-1]
      for (int k = 0; k < t; ++k) {
        const std::size_t row = l.emb + static_cast<std::size_t>(token_id(tokens_[static_cast<std::size_t>(k)]) * e);
        for (int j = 0; j < e; ++j) grad[row + static_cast<std::size_t>(j)] += dinput[static_cast<std::size_t>(c + j)] / t;
      }
      const std::size_t row = l.emb + static_cast<std::size_t>(token_id(tokens_[static_cast<std::size_t>(t - 1)]) * e);
      for (int j = 0; j < e; ++j) grad[row + static_cast<std::size_t>(j)] += dinput[static_cast<std::size_t>(c + e + j)];
    }
  }

  for (int k = 0; k < kMaxOptions; ++k) {
    const double* s = &slot_inputs_[static_cast<std::size_t>(k * layout::kSlotInputWidth)];
    for (int j = 0; j < hs; ++j) {
      const double u = context_[static_cast<std::size_t>(k * hs + j)];
      const double du = dcontext[static_cast<std::size_t>(k * hs + j)] * (1.0 - u * u);
      if (du == 0.0) continue;
      grad[l.enc_b + static_cast<std::size_t>(j)] += du;
      const std::size_t row = l.enc_w + static_cast<std::size_t>(j * layout::kSlotInputWidth);
      for (int i = 0; i < layout::kSlotInputWidth; ++i) grad[row + static_cast<std::size_t>(i)] += du * s[i];
    }
  }
}

TokenDistribution forward(const PolicyParams& params, const QuestionEncoding& enc,
                          std::span<const Token> prefix) {
  if (static_cast<int>(prefix.size()) >= params.arch().max_len)
    throw ConfigError("prefix length must be below max_len");
  const auto context = context_of(params, slot_inputs_of(enc));
  PrefixState state(params.arch().embed_width);
  for (Token t : prefix) state.push(params, t);
  std::vector<double> input(static_cast<std::size_t>(params.arch().layer_input_width()));
  std::vector<double> hidden(static_cast<std::size_t>(params.arch().hidden_width));
  TokenDistribution probs{}, log_probs{};
  layer_input_of(params, context, state, input.data());
  position_forward(params, context, input.data(), hidden.data(), probs, log_probs);
  return probs;
}

namespace {

template <class Pick>
Response decode(const PolicyParams& params, const QuestionEncoding& enc, int max_len, Pick&& pick) {
  const auto context = context_of(params, slot_inputs_of(enc));
  PrefixState state(params.arch().embed_width);
  std::vector<double> input(static_cast<std::size_t>(params.arch().layer_input_width()));
  std::vector<double> hidden(static_cast<std::size_t>(params.arch().hidden_width));
  TokenDistribution probs{}, log_probs{};
  Response r;
  while (static_cast<int>(r.tokens.size()) < max_len) {
    layer_input_of(params, context, state, input.data());
    position_forward(params, context, input.data(), hidden.data(), probs, log_probs);
    const int v = pick(probs);
    r.tokens.push_back(token_from_id(v));
    r.logprobs.push_back(log_probs[static_cast<std::size_t>(v)]);
    if (token_from_id(v) == Token::eos) break;
    state.push(params, token_from_id(v));
  }
  return r;
}

}  // namespace

Response sample_response(const PolicyParams& params, const QuestionEncoding& enc, Rng& rng,
                         int max_len) {
  return decode(params, enc, max_len, [&](const TokenDistribution& p) {
    const double u = uniform01(rng);
    double acc = 0.0;
    for (int v = 0; v < kVocabSize; ++v) {
      acc += p[static_cast<std::size_t>(v)];
      if (u < acc) return v;
    }
    // u landed in the rounding gap above the cumulative sum.
    for (int v = kVocabSize - 1; v >= 0; --v)
      if (p[static_cast<std::size_t>(v)] > 0.0) return v;
    return kVocabSize - 1;
  });
}

Response greedy_response(const PolicyParams& params, const QuestionEncoding& enc, int max_len) {
  return decode(params, enc, max_len, [](const TokenDistribution& p) {
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
  });
}

std::vector<double> logprob(const PolicyParams& params, const QuestionEncoding& enc,
                            std::span<const Token> tokens) {
  if (tokens.empty()) throw ConfigError("logprob needs at least one token");
  SequenceForward fwd(params, enc, tokens);
  std::vector<double> out(tokens.size());
  for (int t = 0; t < fwd.length(); ++t) {
    out[static_cast<std::size_t>(t)] = fwd.token_logprob(t);
    if (!std::isfinite(out[static_cast<std::size_t>(t)]))
      throw NumericError("token has zero probability at position " + std::to_string(t));
  }
  return out;
}

std::vector<double> grad_logprob(const PolicyParams& params, const QuestionEncoding& enc,
                                 std::span<const Token> tokens) {
  if (tokens.empty()) throw ConfigError("grad_logprob needs at least one token");
  SequenceForward fwd(params, enc, tokens);
  std::vector<LogitGradient> dlogits(tokens.size());
  for (int t = 0; t < fwd.length(); ++t) {
    auto& g = dlogits[static_cast<std::size_t>(t)];
    const auto& p = fwd.distribution(t);
    for (int v = 0; v < kVocabSize; ++v) g[static_cast<std::size_t>(v)] = -p[static_cast<std::size_t>(v)];
    g[static_cast<std::size_t>(token_id(tokens[static_cast<std::size_t>(t)]))] += 1.0;
  }
  std::vector<double> grad(params.size(), 0.0);
  fwd.backward(dlogits, grad);
  return grad;
}

// ---------------------------------------------------------------------------
// Answer grammar

std::optional<LetterSet> parse_answer(std::span<const Token> tokens) {
  std::size_t i = 0;
  const std::size_t n = tokens.size();
  while (i < n && tokens[i] == Token::think) ++i;
  if (i >= n || tokens[i] != Token::ans_open) return std::nullopt;
  ++i;
  LetterSet letters;
  for (;;) {
    if (i >= n) return std::nullopt;
    const auto letter = token_letter(tokens[i]);
    if (!letter || letters.contains(*letter)) return std::nullopt;
    letters.insert(*letter);
    ++i;
    if (i < n && tokens[i] == Token::comma) {
      ++i;
      continue;
    }
    break;
  }
  if (i + 2 != n || tokens[i] != Token::ans_close || tokens[i + 1] != Token::eos) return std::nullopt;
  return letters;
}

std::vector<Token> format_answer(LetterSet letters, int think) {
  std::vector<Token> out(static_cast<std::size_t>(think), Token::think);
  out.push_back(Token::ans_open);
  bool first = true;
  for (int i = 0; i < kMaxOptions; ++i) {
    if (!letters.contains(letter_at(i))) continue;
    if (!first) out.push_back(Token::comma);
    out.push_back(letter_token(letter_at(i)));
    first = false;
  }
  out.push_back(Token::ans_close);
  out.push_back(Token::eos);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::string& path, const PolicyParams& params,
                     const CheckpointMeta& meta) {
  const auto& a = params.arch();
  json header = {
      {"schema_version", 1},
      {"kind", "checkpoint"},
      {"architecture",
       {{"slot_width", a.slot_width},
        {"embed_width", a.embed_width},
        {"hidden_width", a.hidden_width},
        {"max_len", a.max_len}}},
      {"vocab_version", kVocabVersion},
      {"param_count", params.size()},
      {"lineage", meta.lineage},
      {"config_hash", meta.config_hash},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << header.dump() << '\n';
  char buf[64];
  for (double x : params.values()) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) throw IoError("cannot format parameter");
    out.write(buf, end - buf);
    out.put('\n');
  }
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

PolicyParams load_checkpoint(const std::string& path, CheckpointMeta* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  std::string line;
  std::getline(in, line);
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw IoError("bad checkpoint header in " + path + ": " + e.what());
  }
  if (header.value("schema_version", 0) != 1 || header.value("kind", "") != "checkpoint")
    throw IoError("unsupported checkpoint schema in " + path);
  if (header.value("vocab_version", 0) != kVocabVersion)
    throw IoError("checkpoint vocab version mismatch in " + path);
  Architecture a;
  const auto& ja = header.at("architecture");
  a.slot_width = ja.at("slot_width");
  a.embed_width = ja.at("embed_width");
  a.hidden_width = ja.at("hidden_width");
  a.max_len = ja.at("max_len");
  PolicyParams params(a);
  if (header.at("param_count").get<std::size_t>() != params.size())
    throw IoError("checkpoint parameter count does not match its architecture");
  auto values = params.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::getline(in, line)) throw IoError("truncated checkpoint: " + path);
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), values[i]);
    if (ec != std::errc{} || ptr != line.data() + line.size())
      throw IoError("bad parameter value in " + path);
  }
  if (meta) {
    meta->config_hash = header.value("config_hash", "");
    meta->lineage = header.value("lineage", std::vector<std::string>{});
  }
  return params;
}

}  // namespace cdpo::policy
