#include <doctest.h>

#include "cdpo/rewards.hpp"

using namespace cdpo;
using namespace cdpo::rewards;
using policy::Token;

TEST_SUITE("rewards") {
  TEST_CASE("soft accuracy examples") {
    CHECK(soft_accuracy_reward(LetterSet(0b1), LetterSet(0b11)) == 0.5);
    CHECK(soft_accuracy_reward(LetterSet(0b101), LetterSet(0b11)) == 0.0);
    CHECK(soft_accuracy_reward(LetterSet(0b1), LetterSet(0b1)) == 1.0);
    CHECK(soft_accuracy_reward(LetterSet(), LetterSet(0b1)) == 0.0);
  }

  TEST_CASE("soft accuracy laws over all subsets") {
    for (unsigned g = 1; g < 32; ++g) {
      const LetterSet truth(static_cast<std::uint8_t>(g));
      for (unsigned p = 0; p < 32; ++p) {
        const LetterSet pred(static_cast<std::uint8_t>(p));
        const double r = soft_accuracy_reward(pred, truth);
        CHECK(r >= 0.0);
        CHECK(r <= 1.0);
        CHECK((r == 1.0) == (pred == truth));
        if (!pred.is_subset_of(truth)) CHECK(r == 0.0);
        // Adding a correct letter strictly helps.
        for (int l = 0; l < kMaxOptions; ++l) {
          LetterSet bigger = pred;
          bigger.insert(letter_at(l));
          if (bigger != pred && bigger.is_subset_of(truth)) CHECK(soft_accuracy_reward(bigger, truth) > r);
        }
      }
    }
  }

  TEST_CASE("format reward") {
    CHECK(format_reward(std::vector{Token::ans_open, Token::letter_a, Token::ans_close, Token::eos}) == 1.0);
    CHECK(format_reward(std::vector{Token::ans_open, Token::letter_a, Token::eos}) == 0.0);
    CHECK(format_reward(std::vector<Token>{}) == 0.0);
  }

  TEST_CASE("total reward") {
    qgen::Question q;
    q.options = {{Letter::A, {0, 1}}, {Letter::B, {0, 2}}, {Letter::C, {1, 2}}};
    q.answer_set = LetterSet(0b11);
    const RewardWeights w;
    const auto bad = total_reward(std::vector{Token::letter_a, Token::eos}, q, w);
    CHECK(bad.total == 0.0);
    CHECK(bad.format == 0.0);
    CHECK(bad.accuracy == 0.0);
    const auto perfect = total_reward(policy::format_answer(LetterSet(0b11)), q, w);
    CHECK(perfect.total == 1.5);
    const auto wrong = total_reward(policy::format_answer(LetterSet(0b100)), q, w);
    CHECK(wrong.total == 0.5);
    const auto half = total_reward(policy::format_answer(LetterSet(0b10)), q, w);
    CHECK(half.total == 1.0);
    for (unsigned p = 0; p < 8; ++p) {
      const auto r = total_reward(policy::format_answer(LetterSet(static_cast<std::uint8_t>(p))), q, w);
      CHECK(r.total >= 0.0);
      CHECK(r.total <= w.accuracy + w.format);
      CHECK(r.total == doctest::Approx(w.accuracy * r.accuracy + w.format * r.format));
      if (r.accuracy > 0.0) CHECK(r.format == 1.0);
    }
  }
}
