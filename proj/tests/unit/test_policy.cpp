#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "cdpo/errors.hpp"
#include "cdpo/policy.hpp"
#include "oracles.hpp"

using namespace cdpo;
using namespace cdpo::policy;

namespace {

qgen::LabeledItem some_item(std::uint64_t seed) {
  qgen::DatasetSpec spec;
  spec.count = 1;
  spec.seed = seed;
  return qgen::generate_item(spec, 0);
}

std::vector<Token> random_tokens(Rng& rng, int len) {
  std::vector<Token> t;
  for (int i = 0; i < len; ++i) t.push_back(token_from_id(uniform_int(rng, 0, kVocabSize - 1)));
  return t;
}

char glyph(Token t) {
  if (auto l = token_letter(t)) return to_char(*l);
  switch (t) {
    case Token::think: return 'T';
    case Token::ans_open: return '<';
    case Token::comma: return ',';
    case Token::ans_close: return '>';
    default: return '$';
  }
}

// Every sentence of THINK* ANS_OPEN letter (COMMA letter)* ANS_CLOSE EOS with
// distinct letters, up to max_len tokens.
std::set<std::vector<Token>> grammar_sentences(int max_len) {
  std::set<std::vector<Token>> out;
  for (int think = 0; think <= max_len - 4; ++think) {
    for (int n = 1; think + 2 * n + 2 <= max_len && n <= kMaxOptions; ++n) {
      std::vector<int> letters(static_cast<std::size_t>(n), 0);
      std::function<void(int)> fill = [&](int pos) {
        if (pos == n) {
          std::set<int> distinct(letters.begin(), letters.end());
          if (static_cast<int>(distinct.size()) != n) return;
          std::vector<Token> s(static_cast<std::size_t>(think), Token::think);
          s.push_back(Token::ans_open);
          for (int i = 0; i < n; ++i) {
            if (i) s.push_back(Token::comma);
            s.push_back(letter_token(letter_at(letters[static_cast<std::size_t>(i)])));
          }
          s.push_back(Token::ans_close);
          s.push_back(Token::eos);
          out.insert(s);
          return;
        }
        for (int l = 0; l < kMaxOptions; ++l) {
          letters[static_cast<std::size_t>(pos)] = l;
          fill(pos + 1);
        }
      };
      fill(0);
    }
  }
  return out;
}

LetterSet letters_in(const std::vector<Token>& s) {
  LetterSet set;
  for (Token t : s)
    if (auto l = token_letter(t)) set.insert(*l);
  return set;
}

}  // namespace

TEST_SUITE("policy") {
  TEST_CASE("parameter budget") {
    const PolicyParams p{Architecture{}};
    CHECK(p.size() <= 5000);
    CHECK(p.size() == p.layout().total);
    Rng rng = make_stream(1, StreamTag::test);
    CHECK(PolicyParams::random(Architecture{}, rng, 0.3).all_finite());
  }

  TEST_CASE("distributions are normalized") {
    Rng rng = make_stream(2, StreamTag::test);
    for (int i = 0; i < 50; ++i) {
      const auto item = some_item(static_cast<std::uint64_t>(i));
      const auto enc = encode_question(item.question, item.world);
      const auto params = PolicyParams::random(Architecture{}, rng, 1.0);
      const auto prefix = random_tokens(rng, uniform_int(rng, 0, 8));
      const auto d = forward(params, enc, prefix);
      double sum = 0.0;
      for (double p : d) {
        CHECK(p >= 0.0);
        sum += p;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }

  TEST_CASE("zero weights give the uniform policy") {
    const auto item = some_item(1);
    const auto enc = encode_question(item.question, item.world);
    const PolicyParams zero{Architecture{}};
    for (double p : forward(zero, enc, {})) CHECK(p == doctest::Approx(0.1).epsilon(1e-15));
    const std::vector<Token> one{Token::eos};
    CHECK(logprob(zero, enc, one)[0] == doctest::Approx(std::log(0.1)).epsilon(1e-15));

    // Output-bias gradient of a taken token: (1 - 1/|V|) per occurrence.
    const std::vector<Token> tokens{Token::think, Token::think, Token::ans_open};
    const auto g = grad_logprob(zero, enc, tokens);
    const auto& l = zero.layout();
    CHECK(g[l.out_b + static_cast<std::size_t>(token_id(Token::think))] == doctest::Approx(2 * 0.9 - 0.1));
    CHECK(g[l.out_b + static_cast<std::size_t>(token_id(Token::ans_open))] == doctest::Approx(0.9 - 2 * 0.1));
    CHECK(g[l.out_b + static_cast<std::size_t>(token_id(Token::eos))] == doctest::Approx(-0.3));
  }

  TEST_CASE("raising an output row raises its token") {
    Rng rng = make_stream(3, StreamTag::test);
    const auto item = some_item(2);
    const auto enc = encode_question(item.question, item.world);
    auto params = PolicyParams::random(Architecture{}, rng, 0.5);
    const std::vector<Token> prefix{Token::ans_open};
    const std::vector<Token> probe{Token::ans_open, Token::comma};
    const auto before = forward(params, enc, prefix);
    // Hidden state at the probed position, recovered from the forward pass.
    SequenceForward fw(params, enc, probe);
    const auto& l = params.layout();
    const int hid = params.arch().hidden_width;
    const int v = token_id(Token::comma);
    // Perturb along the row's own gradient direction.
    std::vector<LogitGradient> dl(2, LogitGradient{});
    dl[1][static_cast<std::size_t>(v)] = 1.0;
    std::vector<double> g(params.size(), 0.0);
    fw.backward(dl, g);
    for (int j = 0; j < hid; ++j) {
      const std::size_t idx = l.out_w + static_cast<std::size_t>(v * hid + j);
      params.values()[idx] += 1e-3 * (g[idx] >= 0 ? 1.0 : -1.0);
    }
    const auto after = forward(params, enc, prefix);
    CHECK(after[static_cast<std::size_t>(v)] > before[static_cast<std::size_t>(v)]);
  }

  TEST_CASE("scorer matches the naive re-implementation") {
    Rng rng = make_stream(4, StreamTag::test);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const auto item = some_item(static_cast<std::uint64_t>(100 + i));
      const auto enc = encode_question(item.question, item.world);
      const auto params = PolicyParams::random(Architecture{}, rng, 0.7);
      const auto tokens = random_tokens(rng, uniform_int(rng, 1, 12));
      const auto fast = logprob(params, enc, tokens);
      const auto slow = oracle::naive_logprob(params, enc, tokens);
      REQUIRE(fast.size() == slow.size());
      for (std::size_t t = 0; t < fast.size(); ++t) worst = std::max(worst, std::abs(fast[t] - slow[t]));
    }
    CHECK(worst <= 1e-12);
  }

  TEST_CASE("log law") {
    Rng rng = make_stream(5, StreamTag::test);
    const auto item = some_item(5);
    const auto enc = encode_question(item.question, item.world);
    const auto params = PolicyParams::random(Architecture{}, rng, 0.5);
    const auto tokens = random_tokens(rng, 6);
    const auto lp = logprob(params, enc, tokens);
    double product = 1.0;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      const auto d = forward(params, enc, std::span(tokens).first(t));
      product *= d[static_cast<std::size_t>(token_id(tokens[t]))];
    }
    CHECK(std::accumulate(lp.begin(), lp.end(), 0.0) == doctest::Approx(std::log(product)).epsilon(1e-12));
  }

  TEST_CASE("sampling and scoring agree") {
    Rng rng = make_stream(6, StreamTag::test);
    for (int i = 0; i < 50; ++i) {
      const auto item = some_item(static_cast<std::uint64_t>(200 + i));
      const auto enc = encode_question(item.question, item.world);
      const auto params = PolicyParams::random(Architecture{}, rng, 0.8);
      const auto r = sample_response(params, enc, rng, 12);
      REQUIRE_FALSE(r.tokens.empty());
      CHECK(r.tokens.size() <= 12);
      CHECK((r.tokens.back() == Token::eos || r.tokens.size() == 12));
      CHECK(logprob(params, enc, r.tokens) == r.logprobs);
    }
  }

  TEST_CASE("greedy decoding is deterministic") {
    Rng rng = make_stream(7, StreamTag::test);
    const auto item = some_item(7);
    const auto enc = encode_question(item.question, item.world);
    const auto params = PolicyParams::random(Architecture{}, rng, 0.8);
    const auto a = greedy_response(params, enc, 12);
    CHECK(a == greedy_response(params, enc, 12));
    for (std::size_t t = 0; t < a.tokens.size(); ++t) {
      const auto d = forward(params, enc, std::span(a.tokens).first(t));
      CHECK(std::max_element(d.begin(), d.end()) - d.begin() == token_id(a.tokens[t]));
    }
  }

  TEST_CASE("first-token frequencies follow the distribution") {
    Rng rng = make_stream(8, StreamTag::test);
    const auto item = some_item(8);
    const auto enc = encode_question(item.question, item.world);
    const auto params = PolicyParams::random(Architecture{}, rng, 0.8);
    const auto d = forward(params, enc, {});
    const int n = 10000;
    std::array<int, kVocabSize> counts{};
    for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(token_id(sample_response(params, enc, rng, 1).tokens[0]))];
    for (int v = 0; v < kVocabSize; ++v) {
      const double p = d[static_cast<std::size_t>(v)];
      CHECK(std::abs(counts[static_cast<std::size_t>(v)] - n * p) <= 3.0 * std::sqrt(n * p * (1 - p)));
    }
  }

  TEST_CASE("gradient matches finite differences") {
    Rng rng = make_stream(9, StreamTag::test);
    for (int i = 0; i < 5; ++i) {
      const auto item = some_item(static_cast<std::uint64_t>(300 + i));
      const auto enc = encode_question(item.question, item.world);
      const auto params = PolicyParams::random(Architecture{}, rng, 0.5);
      const auto tokens = sample_response(params, enc, rng, 12).tokens;
      const auto g = grad_logprob(params, enc, tokens);
      const auto fd = oracle::central_differences(
          std::vector<double>(params.values().begin(), params.values().end()),
          [&](const std::vector<double>& x) {
            PolicyParams p(params.arch());
            std::copy(x.begin(), x.end(), p.values().begin());
            const auto lp = logprob(p, enc, tokens);
            return std::accumulate(lp.begin(), lp.end(), 0.0);
          },
          1e-5);
      CHECK(oracle::max_relative_error(g, fd, 1e-5) < 1e-4);
    }
  }

  TEST_CASE("gradient is additive over positions") {
    Rng rng = make_stream(10, StreamTag::test);
    const auto item = some_item(10);
    const auto enc = encode_question(item.question, item.world);
    const auto params = PolicyParams::random(Architecture{}, rng, 0.5);
    const auto tokens = random_tokens(rng, 5);
    const auto full = grad_logprob(params, enc, tokens);
    SequenceForward fw(params, enc, tokens);
    std::vector<double> sum(params.size(), 0.0);
    for (int t = 0; t < fw.length(); ++t) {
      std::vector<LogitGradient> dl(tokens.size(), LogitGradient{});
      for (int v = 0; v < kVocabSize; ++v)
        dl[static_cast<std::size_t>(t)][static_cast<std::size_t>(v)] =
            (v == token_id(tokens[static_cast<std::size_t>(t)]) ? 1.0 : 0.0) - fw.distribution(t)[static_cast<std::size_t>(v)];
      fw.backward(dl, sum);
    }
    for (std::size_t i = 0; i < full.size(); ++i) REQUIRE(sum[i] == doctest::Approx(full[i]).epsilon(1e-12));
  }

  TEST_CASE("parse_answer examples") {
    using T = Token;
    CHECK(parse_answer(std::vector{T::ans_open, T::letter_a, T::ans_close, T::eos}) == LetterSet(0b1));
    CHECK(parse_answer(std::vector{T::think, T::think, T::ans_open, T::letter_b, T::comma, T::letter_c,
                                   T::ans_close, T::eos}) == LetterSet(0b110));
    CHECK_FALSE(parse_answer(std::vector{T::letter_a, T::eos}).has_value());
    CHECK_FALSE(parse_answer(std::vector{T::ans_open, T::letter_a, T::comma, T::letter_a, T::ans_close, T::eos}).has_value());
    CHECK_FALSE(parse_answer(std::vector<T>{}).has_value());
    CHECK(format_answer(LetterSet(0b10101), 1) ==
          std::vector{T::think, T::ans_open, T::letter_a, T::comma, T::letter_c, T::comma, T::letter_e,
                      T::ans_close, T::eos});
  }

  TEST_CASE("parse_answer accepts exactly the grammar") {
    const auto grammar = grammar_sentences(8);
    for (const auto& s : grammar) REQUIRE(parse_answer(s) == letters_in(s));

    // Every sequence up to length 6.
    long checked = 0;
    std::vector<Token> s;
    std::function<void(int)> walk = [&](int len) {
      const bool in = grammar.count(s) > 0;
      if (parse_answer(s).has_value() != in) FAIL("disagreement on " << [&] {
          std::string g;
          for (Token t : s) g.push_back(glyph(t));
          return g;
        }());
      ++checked;
      if (len == 6) return;
      for (int v = 0; v < kVocabSize; ++v) {
        s.push_back(token_from_id(v));
        walk(len + 1);
        s.pop_back();
      }
    };
    walk(0);
    CHECK(checked == 1111111);

    // Lengths 7 and 8: single-token edits of grammatical sentences plus
    // random sequences.
    Rng rng = make_stream(11, StreamTag::test);
    for (const auto& g : grammar) {
      if (g.size() < 7) continue;
      for (std::size_t i = 0; i < g.size(); ++i)
        for (int v = 0; v < kVocabSize; ++v) {
          auto m = g;
          m[i] = token_from_id(v);
          REQUIRE(parse_answer(m).has_value() == (grammar.count(m) > 0));
        }
    }
    for (int i = 0; i < 100000; ++i) {
      const auto r = random_tokens(rng, uniform_int(rng, 7, 8));
      REQUIRE(parse_answer(r).has_value() == (grammar.count(r) > 0));
    }
  }

  TEST_CASE("encodings") {
    const auto item = some_item(12);
    const auto& q = item.question;
    const auto enc = encode_question(q, item.world);
    CHECK(enc == encode_question(q, item.world));
    CHECK(enc.values.size() == static_cast<std::size_t>(layout::kEncodingWidth));
    for (double v : enc.values) CHECK((v >= 0.0 && v <= 1.0));

    auto flipped = q;
    flipped.negated = !q.negated;
    const auto enc_neg = encode_question(flipped, item.world);
    for (std::size_t i = 0; i < enc.values.size(); ++i)
      CHECK((enc.values[i] != enc_neg.values[i]) == (i == static_cast<std::size_t>(layout::kNegation)));

    auto stripped = q;
    stripped.removed.reset();
    const auto enc_strip = encode_question(stripped, item.world);
    bool any = false;
    for (std::size_t i = 0; i < enc.values.size(); ++i) {
      if (enc.values[i] == enc_strip.values[i]) continue;
      any = true;
      CHECK(i < static_cast<std::size_t>(layout::kRemovalBlockEnd));
    }
    CHECK(any);

    auto too_many = q;
    while (too_many.options.size() <= static_cast<std::size_t>(kMaxOptions))
      too_many.options.push_back(q.options[0]);
    CHECK_THROWS_AS(encode_question(too_many, item.world), EncodingError);
  }

  TEST_CASE("checkpoint round trip") {
    Rng rng = make_stream(13, StreamTag::test);
    const auto params = PolicyParams::random(Architecture{}, rng, 0.5);
    const auto path = (std::filesystem::temp_directory_path() / "cdpo_policy_test.ckpt").string();
    save_checkpoint(path, params, {"abc", {"init:seed=3", "bias:steps=5"}});
    CheckpointMeta meta;
    const auto loaded = load_checkpoint(path, &meta);
    CHECK(loaded == params);
    CHECK(meta.config_hash == "abc");
    CHECK(meta.lineage == std::vector<std::string>{"init:seed=3", "bias:steps=5"});
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }
}
