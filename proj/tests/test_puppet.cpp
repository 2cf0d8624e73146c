#include <cstdlib>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "recaudit/corpus.hpp"
#include "recaudit/errors.hpp"
#include "recaudit/platform.hpp"
#include "recaudit/puppet.hpp"
#include "recaudit/rng.hpp"
#include "recaudit/utility.hpp"

using namespace recaudit;

namespace {

std::string data_dir() {
  const char* env = std::getenv("RECAUDIT_DATA");
  return env ? env : "data";
}

LexiconSet shipped_lexicons() { return LexiconSet::load(data_dir() + "/lexicons.txt"); }

Corpus small_corpus(std::uint64_t seed, int n = 60, double transcript_rate = 1.0) {
  CorpusSpec spec;
  spec.n_videos = n;
  for (Topic t : kAllTopics) spec.topic_mix[t] = 0.25;
  spec.transcript_rate = transcript_rate;
  spec.rng_seed = seed;
  return generate_corpus(spec, shipped_lexicons());
}

RecommendationList fake_list(std::vector<VideoId> ids) {
  RecommendationList list;
  list.source_video = "src";
  list.surface = Surface::Personalized;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    list.items.push_back(RecItem{static_cast<int>(i + 1), ids[i], 0.0});
  }
  return list;
}

UtilityVector mono(Preference p, double value) {
  UtilityVector u{};
  u[static_cast<int>(p)] = value;
  return u;
}

}  // namespace

TEST_CASE("treatment selection maximizes the puppet's utility") {
  UtilityTable table;
  table.scores["vidAAA"] = mono(Preference::Anger, 0.2);
  table.scores["vidBBB"] = mono(Preference::Anger, 0.9);
  table.scores["vidCCC"] = mono(Preference::Anger, 0.5);
  Rng rng(1);
  const auto res =
      select_next(fake_list({"vidAAA", "vidBBB", "vidCCC"}), Preference::Anger, table, rng);
  CHECK(res.video == "vidBBB");
  CHECK(res.eligible_count == 3);
}

TEST_CASE("utility ties fall back to the better rank") {
  UtilityTable table;
  table.scores["vidHigh"] = mono(Preference::Positive, 0.5);
  table.scores["vidLow"] = mono(Preference::Positive, 0.5);
  Rng rng(1);
  // vidLow sits at rank 1, vidHigh at rank 2; equal utility keeps the rank order.
  const auto res = select_next(fake_list({"vidLow", "vidHigh"}), Preference::Positive, table, rng);
  CHECK(res.video == "vidLow");
}

TEST_CASE("items without transcripts are invisible to selection") {
  UtilityTable table;
  table.scores["vidScored"] = mono(Preference::Anger, 0.1);
  Rng rng(1);
  const auto res =
      select_next(fake_list({"vidSilent", "vidScored"}), Preference::Anger, table, rng);
  CHECK(res.video == "vidScored");
  CHECK(res.eligible_count == 1);

  try {
    select_next(fake_list({"vidSilent"}), Preference::Anger, table, rng);
    FAIL("expected NoEligibleCandidates");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NoEligibleCandidates);
  }
  CHECK_THROWS_AS(select_next(fake_list({}), Preference::Anger, table, rng), Error);
}

TEST_CASE("control selection is uniform over eligible items") {
  UtilityTable table;
  table.scores["vidAAA"] = mono(Preference::Anger, 0.9);
  table.scores["vidBBB"] = mono(Preference::Anger, 0.1);
  table.scores["vidCCC"] = mono(Preference::Anger, 0.5);
  const auto list = fake_list({"vidAAA", "vidSilent", "vidBBB", "vidCCC"});
  std::map<VideoId, int> hist;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    Rng rng(s);
    const auto res = select_next(list, std::nullopt, table, rng);
    hist[res.video] += 1;
  }
  CHECK(hist.count("vidSilent") == 0);
  for (const auto& [id, count] : hist) {
    (void)id;
    CHECK(count > 260);  // ~333 expected, 5 sigma is about +/- 75
    CHECK(count < 410);
  }
}

TEST_CASE("sessions walk the closed loop and keep both surfaces") {
  const LexiconSet lex = shipped_lexicons();
  const Corpus corpus = small_corpus(31);
  const UtilityScorer scorer(lex);
  const UtilityTable table = build_utility_table(corpus, scorer);
  PlatformConfig config;
  config.noise_sigma = 0.05;
  config.top_k = 10;
  const PlatformModel platform = build_platform(corpus, config, 77);

  SockPuppet puppet;
  puppet.id = "probe-test";
  puppet.preference = Preference::Outrage;
  puppet.condition = Condition::Treatment;
  puppet.seed_video = corpus.videos[0].id;
  puppet.seed_topic = corpus.videos[0].topic;
  puppet.rng_seed = 404;

  SessionConfig session;
  session.steps = 10;
  session.probe_interval = 3;
  session.probe_set = build_probe_set(corpus, 1, 1, 55);

  const Trace trace = run_session(puppet, platform, table, corpus, session);
  CHECK_FALSE(trace.truncated);
  REQUIRE(trace.steps.size() == 10);

  // The watch chain starts at the seed and follows selections.
  CHECK(trace.steps[0].watched == puppet.seed_video);
  for (std::size_t t = 1; t < trace.steps.size(); ++t) {
    CHECK(trace.steps[t].watched == trace.steps[t - 1].selected);
  }

  for (const StepRecord& step : trace.steps) {
    CHECK(step.personalized.surface == Surface::Personalized);
    CHECK(step.contextual.surface == Surface::Contextual);
    CHECK(step.personalized.source_video == step.watched);
    bool found = false;
    for (const RecItem& item : step.personalized.items) {
      if (item.id == step.selected) found = true;
    }
    CHECK(found);  // selections come from the personalized list
    CHECK(step.eligible_count > 0);
  }

  // Probes fire after steps 3, 6, and 9: one batch of |probe_set| each.
  REQUIRE(trace.probes.size() == 3 * session.probe_set.size());
  std::map<int, int> by_depth;
  for (const ProbeRecord& probe : trace.probes) {
    by_depth[probe.depth] += 1;
    CHECK(probe.probe_topic == corpus.at(probe.probe_video).topic);
    CHECK(probe.personalized.surface == Surface::Personalized);
    CHECK(probe.personalized.source_video == probe.probe_video);
  }
  CHECK(by_depth[3] == 4);
  CHECK(by_depth[6] == 4);
  CHECK(by_depth[9] == 4);

  SUBCASE("treatment selections are argmax over eligible items") {
    const int pref = static_cast<int>(Preference::Outrage);
    for (const StepRecord& step : trace.steps) {
      const UtilityVector* chosen = table.find(step.selected);
      REQUIRE(chosen != nullptr);
      for (const RecItem& item : step.personalized.items) {
        const UtilityVector* u = table.find(item.id);
        if (u) CHECK((*u)[pref] <= (*chosen)[pref]);
      }
    }
  }

  SUBCASE("the contextual surface never sees the user") {
    for (const StepRecord& step : trace.steps) {
      const RecommendationList fresh = platform.recommend(step.watched);
      REQUIRE(fresh.items.size() == step.contextual.items.size());
      for (std::size_t i = 0; i < fresh.items.size(); ++i) {
        CHECK(fresh.items[i].id == step.contextual.items[i].id);
      }
    }
  }

  SUBCASE("replays are deterministic") {
    const Trace again = run_session(puppet, platform, table, corpus, session);
    REQUIRE(again.steps.size() == trace.steps.size());
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
      CHECK(again.steps[t].selected == trace.steps[t].selected);
    }
  }

  SUBCASE("probes never contaminate the watch history") {
    SessionConfig no_probes = session;
    no_probes.probe_set.clear();
    const Trace bare = run_session(puppet, platform, table, corpus, no_probes);
    REQUIRE(bare.steps.size() == trace.steps.size());
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
      CHECK(bare.steps[t].selected == trace.steps[t].selected);
    }
    CHECK(bare.probes.empty());
  }
}

TEST_CASE("control sessions replay deterministically too") {
  const Corpus corpus = small_corpus(37);
  const UtilityTable table = build_utility_table(corpus, UtilityScorer(shipped_lexicons()));
  PlatformConfig config;
  config.top_k = 8;
  const PlatformModel platform = build_platform(corpus, config, 3);

  SockPuppet puppet;
  puppet.id = "ctl";
  puppet.preference = std::nullopt;
  puppet.condition = Condition::Control;
  puppet.seed_video = corpus.videos[5].id;
  puppet.seed_topic = corpus.videos[5].topic;
  puppet.rng_seed = 11;

  SessionConfig session;
  session.steps = 8;

  const Trace a = run_session(puppet, platform, table, corpus, session);
  const Trace b = run_session(puppet, platform, table, corpus, session);
  REQUIRE(a.steps.size() == 8);
  for (std::size_t t = 0; t < 8; ++t) CHECK(a.steps[t].selected == b.steps[t].selected);

  SockPuppet other = puppet;
  other.rng_seed = 12;
  const Trace c = run_session(other, platform, table, corpus, session);
  bool differs = false;
  for (std::size_t t = 0; t < 8; ++t) differs = differs || a.steps[t].selected != c.steps[t].selected;
  CHECK(differs);  // a different dice stream wanders elsewhere
}

TEST_CASE("sessions truncate gracefully when nothing is selectable") {
  Corpus corpus;
  Video seed;
  seed.id = "vidSeed0000";
  seed.topic = Topic::News;
  seed.transcript = std::vector<std::string>{"plain", "words", "here"};
  Video mute1, mute2;
  mute1.id = "vidMute0001";
  mute1.topic = Topic::News;
  mute2.id = "vidMute0002";
  mute2.topic = Topic::News;
  corpus.videos = {seed, mute1, mute2};
  corpus.reindex();

  const UtilityTable table = build_utility_table(corpus, UtilityScorer(shipped_lexicons()));
  PlatformConfig config;
  config.noise_sigma = 0.0;
  const PlatformModel platform = build_platform(corpus, config, 1);

  SockPuppet puppet;
  puppet.id = "stuck";
  puppet.preference = Preference::Anger;
  puppet.condition = Condition::Treatment;
  puppet.seed_video = "vidSeed0000";
  puppet.seed_topic = Topic::News;
  puppet.rng_seed = 5;

  SessionConfig session;
  session.steps = 5;

  const Trace trace = run_session(puppet, platform, table, corpus, session);
  CHECK(trace.truncated);
  CHECK_FALSE(trace.truncation_reason.empty());
  CHECK(trace.steps.empty());
}

TEST_CASE("session preconditions") {
  const Corpus corpus = small_corpus(41, 20);
  const UtilityTable table = build_utility_table(corpus, UtilityScorer(shipped_lexicons()));
  const PlatformModel platform = build_platform(corpus, PlatformConfig{}, 1);

  SockPuppet puppet;
  puppet.id = "bad";
  puppet.preference = Preference::Anger;
  puppet.condition = Condition::Treatment;
  puppet.seed_video = corpus.videos[0].id;
  puppet.seed_topic = corpus.videos[0].topic;
  puppet.rng_seed = 1;

  SessionConfig session;
  session.steps = 0;
  CHECK_THROWS_AS(run_session(puppet, platform, table, corpus, session), Error);

  session.steps = 5;
  session.probe_set = {corpus.videos[1].id};
  session.probe_interval = 0;
  CHECK_THROWS_AS(run_session(puppet, platform, table, corpus, session), Error);

  session.probe_interval = 2;
  UtilityTable empty_table;
  try {
    run_session(puppet, platform, empty_table, corpus, session);
    FAIL("expected MissingTranscript");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingTranscript);
  }
}
