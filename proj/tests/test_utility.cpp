#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "recaudit/errors.hpp"
#include "recaudit/utility.hpp"

using namespace recaudit;

namespace {

constexpr const char* kValidLexicons = R"(# comment line
[anger]
rage
fury

[outrage]
scandal
[grievance]
unfair
[group_identity]
tribe
[negative]
sad
[positive]
happy
)";

LexiconSet tiny_lexicons() { return LexiconSet::parse(kValidLexicons, "inline"); }

}  // namespace

TEST_CASE("token normalization lowercases and strips punctuation") {
  CHECK(normalize_token("Hat!") == "hat");
  CHECK(normalize_token("RAGE,") == "rage");
  CHECK(normalize_token("it's") == "its");
  CHECK(normalize_token("42nd") == "42nd");
  CHECK(normalize_token("--!?") == "");
}

TEST_CASE("lexicon parsing") {
  const LexiconSet lex = tiny_lexicons();
  CHECK(lex.contains(Preference::Anger, "rage"));
  CHECK(lex.contains(Preference::Anger, "fury"));
  CHECK(lex.tokens(Preference::Outrage).size() == 1);
  CHECK_FALSE(lex.contains(Preference::Positive, "rage"));
  CHECK(lex.tokens(Preference::HFrequency).empty());

  SUBCASE("token before any section") {
    CHECK_THROWS_AS(LexiconSet::parse("rage\n[anger]\n", "inline"), Error);
  }
  SUBCASE("unknown section name") {
    const std::string text = std::string(kValidLexicons) + "[sarcasm]\nmaybe\n";
    try {
      LexiconSet::parse(text, "inline");
      FAIL("expected ParseError");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ParseError);
    }
  }
  SUBCASE("a missing emotional section is fatal") {
    try {
      LexiconSet::parse("[anger]\nrage\n", "inline");
      FAIL("expected MissingPreference");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::MissingPreference);
    }
  }
  SUBCASE("an h_frequency section is tolerated but never used") {
    const std::string text = std::string(kValidLexicons) + "[h_frequency]\nhay\n";
    const LexiconSet lex2 = LexiconSet::parse(text, "inline");
    CHECK(lex2.tokens(Preference::HFrequency).empty());
  }
  SUBCASE("tokens that normalize to nothing are rejected") {
    const std::string text = std::string("[anger]\n!!!\n") + kValidLexicons;
    CHECK_THROWS_AS(LexiconSet::parse(text, "inline"), Error);
  }
  SUBCASE("windows line endings are fine") {
    const LexiconSet lex2 = LexiconSet::parse(
        "[anger]\r\nrage\r\n[outrage]\r\nscandal\r\n[grievance]\r\nunfair\r\n"
        "[group_identity]\r\ntribe\r\n[negative]\r\nsad\r\n[positive]\r\nhappy\r\n",
        "inline");
    CHECK(lex2.contains(Preference::Anger, "rage"));
  }
}

TEST_CASE("loading a missing lexicon file raises IoError") {
  try {
    LexiconSet::load("/nonexistent/lexicons.txt");
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::IoError);
  }
}

TEST_CASE("lexicon fraction scoring") {
  const UtilityScorer scorer(tiny_lexicons());
  const std::vector<std::string> transcript{"rage", "calm", "rage", "happy"};
  CHECK(scorer.score(Preference::Anger, transcript) == doctest::Approx(0.5));
  CHECK(scorer.score(Preference::Positive, transcript) == doctest::Approx(0.25));
  CHECK(scorer.score(Preference::Negative, transcript) == doctest::Approx(0.0));
  CHECK_THROWS_AS(scorer.score(Preference::Anger, std::vector<std::string>{}), Error);
}

TEST_CASE("h-share scoring counts letters, not tokens") {
  const UtilityScorer scorer(tiny_lexicons());
  CHECK(scorer.score(Preference::HFrequency, std::vector<std::string>{"hat"}) ==
        doctest::Approx(1.0 / 3.0));
  CHECK(scorer.score(Preference::HFrequency, std::vector<std::string>{"hhh"}) ==
        doctest::Approx(1.0));
  CHECK(scorer.score(Preference::HFrequency, std::vector<std::string>{"none", "at", "all"}) ==
        doctest::Approx(0.0));
  // Tokens with no alphabetic characters contribute nothing to either count.
  CHECK(scorer.score(Preference::HFrequency, std::vector<std::string>{"42", "hat"}) ==
        doctest::Approx(1.0 / 3.0));
  CHECK(scorer.score(Preference::HFrequency, std::vector<std::string>{"42"}) ==
        doctest::Approx(0.0));
}

TEST_CASE("utility vectors cover all preferences and demand transcripts") {
  const UtilityScorer scorer(tiny_lexicons());
  Video video;
  video.id = "vid00000001";
  video.transcript = std::vector<std::string>{"rage", "unfair", "happy", "hat"};
  const UtilityVector u = scorer.utility_vector(video);
  CHECK(u[static_cast<int>(Preference::Anger)] == doctest::Approx(0.25));
  CHECK(u[static_cast<int>(Preference::Grievance)] == doctest::Approx(0.25));
  CHECK(u[static_cast<int>(Preference::Positive)] == doctest::Approx(0.25));
  CHECK(u[static_cast<int>(Preference::Outrage)] == doctest::Approx(0.0));
  // letters: rage(4) unfair(6 incl 0 h) happy(5, 1 h) hat(3, 1 h) = 18 alpha, 2 h
  CHECK(u[static_cast<int>(Preference::HFrequency)] == doctest::Approx(2.0 / 18.0));

  Video silent;
  silent.id = "vid00000002";
  try {
    scorer.utility_vector(silent);
    FAIL("expected MissingTranscript");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingTranscript);
  }
}

TEST_CASE("scores live in [0,1] and match a counting oracle") {
  const UtilityScorer scorer(tiny_lexicons());
  std::mt19937 gen(99);
  const std::vector<std::string> pool{"rage",  "fury", "scandal", "unfair", "tribe", "sad",
                                      "happy", "hat",  "stone",   "river",  "cloud", "echo"};
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> transcript;
    const int len = 1 + trial % 30;
    for (int i = 0; i < len; ++i) transcript.push_back(pool[pick(gen)]);
    for (Preference p : kAllPreferences) {
      const double s = scorer.score(p, transcript);
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
    }
    // Counting oracle for the anger lexicon.
    int hits = 0;
    for (const auto& t : transcript) hits += (t == "rage" || t == "fury") ? 1 : 0;
    CHECK(scorer.score(Preference::Anger, transcript) ==
          doctest::Approx(static_cast<double>(hits) / len));
  }
}
