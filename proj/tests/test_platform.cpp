#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "doctest.h"
#include "recaudit/corpus.hpp"
#include "recaudit/errors.hpp"
#include "recaudit/platform.hpp"
#include "recaudit/utility.hpp"

using namespace recaudit;

namespace {

std::string data_dir() {
  const char* env = std::getenv("RECAUDIT_DATA");
  return env ? env : "data";
}

PlatformConfig flat_config(int top_k = 10) {
  PlatformConfig c;
  c.top_k = top_k;
  c.diversity_penalty = 0.0;
  c.noise_sigma = 0.0;
  return c;
}

PlatformModel three_video_model(int top_k = 10) {
  return PlatformModel::from_embeddings({"vidA", "vidB", "vidC"},
                                        {{1.0, 0.0}, {0.9, 0.1}, {0.0, 1.0}},
                                        {1.0, 1.0, 1.0}, flat_config(top_k), 0);
}

Video make_video(VideoId id, Topic topic, Preference pref, double intensity) {
  Video v;
  v.id = std::move(id);
  v.topic = topic;
  v.emotion_profile[static_cast<int>(pref)] = intensity;
  return v;
}

}  // namespace

TEST_CASE("softmax basics") {
  const auto uniform = softmax({0.0, 0.0});
  CHECK(uniform[0] == doctest::Approx(0.5));
  CHECK(uniform[1] == doctest::Approx(0.5));

  const auto skewed = softmax({std::log(2.0), 0.0});
  CHECK(skewed[0] == doctest::Approx(2.0 / 3.0));
  CHECK(skewed[1] == doctest::Approx(1.0 / 3.0));

  // Max-shifting keeps extreme logits finite.
  const auto extreme = softmax({1000.0, 0.0});
  CHECK(std::isfinite(extreme[0]));
  CHECK(extreme[0] == doctest::Approx(1.0));
  CHECK(extreme[0] + extreme[1] == doctest::Approx(1.0));

  const auto shifted = softmax({3.0 + 500.0, 1.0 + 500.0, 2.0 + 500.0});
  const auto base = softmax({3.0, 1.0, 2.0});
  for (int i = 0; i < 3; ++i) CHECK(shifted[i] == doctest::Approx(base[i]).epsilon(1e-12));

  CHECK_THROWS_AS(softmax({}), Error);
  CHECK_THROWS_AS(softmax({1.0, std::nan("")}), Error);
}

TEST_CASE("contextual ranking on a hand-computed model") {
  const PlatformModel m = three_video_model();
  const RecommendationList list = m.recommend("vidA");
  CHECK(list.surface == Surface::Contextual);
  CHECK(list.source_video == "vidA");
  REQUIRE(list.items.size() == 2);  // the watched video is excluded

  // Logits against query [1,0]: vidB = 0.9, vidC = 0.0 (uniform popularity).
  CHECK(list.items[0].id == "vidB");
  CHECK(list.items[0].rank == 1);
  CHECK(list.items[1].id == "vidC");
  CHECK(list.items[1].rank == 2);
  const double denom = std::exp(0.9) + std::exp(0.0);
  CHECK(list.items[0].probability == doctest::Approx(std::exp(0.9) / denom));
  CHECK(list.items[1].probability == doctest::Approx(std::exp(0.0) / denom));
  CHECK(list.items[0].probability + list.items[1].probability == doctest::Approx(1.0));
}

TEST_CASE("personalized queries blend user history with the current video") {
  PlatformConfig config = flat_config();
  config.alpha_user = 0.5;
  const PlatformModel m = PlatformModel::from_embeddings(
      {"vidA", "vidB", "vidC", "vidD"},
      {{1.0, 0.0}, {0.0, 1.0}, {0.8, 0.8}, {-1.0, 0.2}}, {1.0, 1.0, 1.0, 1.0}, config, 0);

  UserState state;
  state.history = {"vidA"};
  const RecommendationList list = m.recommend("vidB", &state);
  CHECK(list.surface == Surface::Personalized);
  // query = 0.5*[1,0] + 0.5*[0,1] = [0.5, 0.5]; logits: A 0.5, C 0.8, D -0.4.
  REQUIRE(list.items.size() == 3);
  CHECK(list.items[0].id == "vidC");
  CHECK(list.items[1].id == "vidA");
  CHECK(list.items[2].id == "vidD");

  SUBCASE("an empty history degrades to the contextual surface") {
    UserState empty;
    const RecommendationList ctx = m.recommend("vidB", &empty);
    CHECK(ctx.surface == Surface::Contextual);
    const RecommendationList null_state = m.recommend("vidB");
    REQUIRE(ctx.items.size() == null_state.items.size());
    for (std::size_t i = 0; i < ctx.items.size(); ++i) {
      CHECK(ctx.items[i].id == null_state.items[i].id);
      CHECK(ctx.items[i].probability == doctest::Approx(null_state.items[i].probability));
    }
  }
}

TEST_CASE("user embedding is the history mean") {
  const PlatformModel m = three_video_model();
  UserState state;
  CHECK_FALSE(m.user_embedding(state).has_value());
  state.history = {"vidA", "vidC"};
  const auto u = m.user_embedding(state);
  REQUIRE(u.has_value());
  CHECK((*u)[0] == doctest::Approx(0.5));
  CHECK((*u)[1] == doctest::Approx(0.5));
}

TEST_CASE("diversity penalty demotes items similar to recent history") {
  // vidB is nearly parallel to the watched vidA; vidC is orthogonal. Without a
  // penalty vidB wins, a strong penalty flips the order.
  auto build = [](double penalty) {
    PlatformConfig config;
    config.top_k = 10;
    config.noise_sigma = 0.0;
    config.alpha_user = 0.5;
    config.diversity_penalty = penalty;
    return PlatformModel::from_embeddings(
        {"vidA", "vidB", "vidC"}, {{1.0, 0.0}, {0.98, 0.05}, {0.3, 0.75}},
        {1.0, 1.0, 1.0}, config, 0);
  };
  UserState state;
  state.history = {"vidA"};

  const auto plain = build(0.0).recommend("vidA", &state);
  REQUIRE(plain.items.size() == 2);
  CHECK(plain.items[0].id == "vidB");

  const auto diverse = build(3.0).recommend("vidA", &state);
  REQUIRE(diverse.items.size() == 2);
  CHECK(diverse.items[0].id == "vidC");

  SUBCASE("the contextual surface ignores the penalty") {
    const auto ctx = build(3.0).recommend("vidA");
    CHECK(ctx.items[0].id == "vidB");
  }
}

TEST_CASE("popularity enters logits additively in log space") {
  PlatformConfig config = flat_config();
  const PlatformModel m = PlatformModel::from_embeddings(
      {"vidA", "vidB", "vidC"}, {{1.0, 0.0}, {0.5, 0.5}, {0.5, 0.5}}, {1.0, 1.0, 2.0}, config, 0);
  const auto list = m.recommend("vidA");
  // Same embedding, double popularity: vidC beats vidB by exactly log 2.
  REQUIRE(list.items.size() == 2);
  CHECK(list.items[0].id == "vidC");
  CHECK(list.items[0].probability == doctest::Approx(2.0 / 3.0));
  CHECK(list.items[1].probability == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("exact ties rank by ascending id and share probability") {
  const PlatformModel m = PlatformModel::from_embeddings(
      {"vidD", "vidB", "vidC", "vidA"},
      {{1.0, 0.0}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}, {1.0, 1.0, 1.0, 1.0}, flat_config(), 0);
  const auto list = m.recommend("vidD");
  REQUIRE(list.items.size() == 3);
  CHECK(list.items[0].id == "vidA");
  CHECK(list.items[1].id == "vidB");
  CHECK(list.items[2].id == "vidC");
  for (const auto& item : list.items) CHECK(item.probability == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("top_k truncates the list") {
  const PlatformModel m = three_video_model(1);
  CHECK(m.recommend("vidA").items.size() == 1);
}

TEST_CASE("serving guards") {
  PlatformModel cold = PlatformModel::from_embeddings({"vidA", "vidB"}, {{1.0}, {0.0}},
                                                      {1.0, 1.0}, flat_config(), 0, false);
  CHECK_THROWS_AS(cold.recommend("vidA"), Error);
  cold.set_frozen(true);
  CHECK(cold.recommend("vidA").items.size() == 1);

  const PlatformModel m = three_video_model();
  CHECK_THROWS_AS(m.recommend("missing"), Error);

  const PlatformModel lonely =
      PlatformModel::from_embeddings({"vidA"}, {{1.0}}, {1.0}, flat_config(), 0);
  CHECK_THROWS_AS(lonely.recommend("vidA"), Error);
}

TEST_CASE("direct embeddings are topic one-hots plus scaled profiles") {
  const LexiconSet lex = LexiconSet::load(data_dir() + "/lexicons.txt");
  CorpusSpec spec;
  spec.n_videos = 30;
  for (Topic t : kAllTopics) spec.topic_mix[t] = 0.25;
  spec.rng_seed = 21;
  const Corpus corpus = generate_corpus(spec, lex);

  PlatformConfig config;
  config.mode = PlatformMode::Direct;
  config.noise_sigma = 0.0;
  config.topic_weight = 2.0;
  config.emotion_weight = 3.0;
  const PlatformModel m = build_platform(corpus, config, 99);
  CHECK(m.dim() == kTopicCount + kPreferenceCount);
  CHECK(m.size() == corpus.videos.size());
  CHECK(m.frozen());

  for (const Video& v : corpus.videos) {
    const auto e = m.embedding(v.id);
    for (int t = 0; t < kTopicCount; ++t) {
      CHECK(e[t] == doctest::Approx(t == static_cast<int>(v.topic) ? 2.0 : 0.0));
    }
    for (int p = 0; p < kPreferenceCount; ++p) {
      CHECK(e[kTopicCount + p] == doctest::Approx(3.0 * v.emotion_profile[p]));
    }
  }

  SUBCASE("noise makes embeddings differ between builds with different seeds") {
    config.noise_sigma = 0.05;
    const PlatformModel m1 = build_platform(corpus, config, 1);
    const PlatformModel m2 = build_platform(corpus, config, 1);
    const PlatformModel m3 = build_platform(corpus, config, 2);
    CHECK(m1.embedding(corpus.videos[0].id) == m2.embedding(corpus.videos[0].id));
    CHECK(m1.embedding(corpus.videos[0].id) != m3.embedding(corpus.videos[0].id));
  }
}

TEST_CASE("trained embeddings realize co-watch geometry") {
  // Two sharply separated audiences: news/anger versus fitness/positive.
  Corpus corpus;
  for (int i = 0; i < 6; ++i) {
    corpus.videos.push_back(
        make_video("news" + std::to_string(i) + "xxxx", Topic::News, Preference::Anger, 1.0));
  }
  for (int i = 0; i < 6; ++i) {
    corpus.videos.push_back(
        make_video("fitn" + std::to_string(i) + "xxxx", Topic::Fitness, Preference::Positive, 1.0));
  }
  corpus.reindex();

  PlatformConfig config;
  config.mode = PlatformMode::Trained;
  config.dim = 8;
  config.population_users = 60;
  config.session_length = 30;
  config.slate_size = 6;
  config.population_gamma = 8.0;
  config.topic_affinity = 1.0;
  config.epochs = 8;

  const PlatformModel m = build_platform(corpus, config, 5);
  CHECK(m.dim() == 8);

  auto cosine = [&](const VideoId& a, const VideoId& b) {
    const auto ea = m.embedding(a);
    const auto eb = m.embedding(b);
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (int d = 0; d < 8; ++d) {
      ab += ea[d] * eb[d];
      aa += ea[d] * ea[d];
      bb += eb[d] * eb[d];
    }
    return ab / std::sqrt(aa * bb);
  };
  double within = 0.0, across = 0.0;
  int nw = 0, na = 0;
  for (int i = 0; i < 6; ++i) {
    for (int j = i + 1; j < 6; ++j) {
      within += cosine(corpus.videos[i].id, corpus.videos[j].id);
      within += cosine(corpus.videos[6 + i].id, corpus.videos[6 + j].id);
      nw += 2;
    }
    for (int j = 0; j < 6; ++j) {
      across += cosine(corpus.videos[i].id, corpus.videos[6 + j].id);
      ++na;
    }
  }
  CHECK(within / nw > across / na);

  SUBCASE("training is deterministic in the seed") {
    const PlatformModel m2 = build_platform(corpus, config, 5);
    CHECK(m.to_string() == m2.to_string());
  }
}

TEST_CASE("platform serialization round-trips byte for byte") {
  const PlatformModel m = three_video_model();
  const std::string text = m.to_string();
  const PlatformModel back = PlatformModel::from_string(text);
  CHECK(back.to_string() == text);
  CHECK(back.dim() == m.dim());
  CHECK(back.size() == m.size());
  CHECK(back.frozen());
  const auto a = m.recommend("vidA");
  const auto b = back.recommend("vidA");
  REQUIRE(a.items.size() == b.items.size());
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    CHECK(a.items[i].id == b.items[i].id);
    CHECK(a.items[i].probability == doctest::Approx(b.items[i].probability).epsilon(1e-15));
  }

  CHECK_THROWS_AS(PlatformModel::from_string("junk\n"), Error);
  CHECK_THROWS_AS(PlatformModel::from_string(""), Error);
  CHECK_THROWS_AS(PlatformModel::load("/nonexistent/platform.jsonl"), Error);
}

TEST_CASE("perturbation copies the model with noisy embeddings") {
  const PlatformModel m = three_video_model();
  const PlatformModel same = perturb_embeddings(m, 0.0, 123);
  CHECK(same.embedding("vidA") == m.embedding("vidA"));
  const PlatformModel moved = perturb_embeddings(m, 0.1, 123);
  CHECK(moved.embedding("vidA") != m.embedding("vidA"));
  CHECK(moved.size() == m.size());
  CHECK(moved.frozen());
  // The same noise seed reproduces the same perturbation.
  const PlatformModel again = perturb_embeddings(m, 0.1, 123);
  CHECK(moved.embedding("vidB") == again.embedding("vidB"));
  CHECK_THROWS_AS(perturb_embeddings(m, -0.5, 1), Error);
}

TEST_CASE("platform config json round-trip and validation") {
  PlatformConfig c;
  c.mode = PlatformMode::Trained;
  c.alpha_user = 0.7;
  c.top_k = 15;
  c.dim = 24;
  const PlatformConfig back = platform_config_from_json_text(platform_config_to_json_text(c));
  CHECK(back.mode == PlatformMode::Trained);
  CHECK(back.alpha_user == doctest::Approx(0.7));
  CHECK(back.top_k == 15);
  CHECK(back.dim == 24);

  CHECK_THROWS_AS(platform_config_from_json_text("{\"alpha_user\": 1.5}"), Error);
  CHECK_THROWS_AS(platform_config_from_json_text("{\"top_k\": 0}"), Error);
  CHECK_THROWS_AS(platform_config_from_json_text("not json"), Error);
  CHECK_THROWS_AS(parse_platform_mode("quantum"), Error);
}
