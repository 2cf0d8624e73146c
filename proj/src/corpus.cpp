#include "recaudit/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "recaudit/errors.hpp"
#include "recaudit/utility.hpp"

namespace recaudit {

namespace {

using nlohmann::json;

constexpr int kIdLength = 11;
constexpr char kIdAlphabet[] = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_";
constexpr int kBaseVocabSize = 600;
constexpr int kTranscriptMinTokens = 50;
constexpr int kTranscriptMaxTokens = 400;

void validate_spec(const CorpusSpec& spec) {
  if (spec.n_videos < 1) fail(Errc::InvalidSpec, "n_videos must be >= 1");
  if (spec.transcript_rate < 0.0 || spec.transcript_rate > 1.0) {
    fail(Errc::InvalidSpec, "transcript_rate outside [0,1]");
  }
  if (spec.emotion_sparsity < 0.0 || spec.emotion_sparsity > 1.0) {
    fail(Errc::InvalidSpec, "emotion_sparsity outside [0,1]");
  }
  double total = 0.0;
  for (const auto& [topic, frac] : spec.topic_mix) {
    (void)topic;
    if (frac < 0.0 || frac > 1.0) fail(Errc::InvalidSpec, "topic fraction outside [0,1]");
    total += frac;
  }
  if (std::abs(total - 1.0) > 1e-9) fail(Errc::InvalidSpec, "topic_mix must sum to 1");
}

// Letter pool and token lengths mirror the lexicons, so base tokens carry the
// same letter statistics as emotional ones.
struct VocabStats {
  std::string letters;
  std::vector<int> lengths;
};

VocabStats pool_lexicon_stats(const LexiconSet& lexicons) {
  VocabStats stats;
  for (Preference p : kEmotionalPreferences) {
    for (const auto& tok : lexicons.tokens(p)) {
      stats.letters += tok;
      stats.lengths.push_back(static_cast<int>(tok.size()));
    }
  }
  return stats;
}

bool in_any_lexicon(const LexiconSet& lexicons, const std::string& token) {
  for (Preference p : kEmotionalPreferences) {
    if (lexicons.contains(p, token)) return true;
  }
  return false;
}

std::vector<std::string> synthesize_vocab(const VocabStats& stats, const LexiconSet& lexicons,
                                          Rng& rng) {
  std::vector<std::string> vocab;
  std::set<std::string> seen;
  while (static_cast<int>(vocab.size()) < kBaseVocabSize) {
    const int len = stats.lengths[rng.uniform_index(stats.lengths.size())];
    std::string tok;
    tok.reserve(len);
    for (int i = 0; i < len; ++i) tok.push_back(stats.letters[rng.uniform_index(stats.letters.size())]);
    if (in_any_lexicon(lexicons, tok) || !seen.insert(tok).second) continue;
    vocab.push_back(std::move(tok));
  }
  return vocab;
}

// Largest-remainder apportionment; remainder ties resolved in enum order.
std::array<int, kTopicCount> topic_counts(const CorpusSpec& spec) {
  std::array<double, kTopicCount> frac{};
  for (const auto& [topic, f] : spec.topic_mix) frac[static_cast<int>(topic)] = f;
  std::array<int, kTopicCount> counts{};
  std::array<double, kTopicCount> remainder{};
  int assigned = 0;
  for (int t = 0; t < kTopicCount; ++t) {
    const double exact = frac[t] * spec.n_videos;
    counts[t] = static_cast<int>(std::floor(exact));
    remainder[t] = exact - counts[t];
    assigned += counts[t];
  }
  std::array<int, kTopicCount> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (int i = 0; assigned < spec.n_videos; ++i, ++assigned) counts[order[i % kTopicCount]] += 1;
  return counts;
}

json video_to_json(const Video& v) {
  json profile = json::object();
  for (Preference p : kAllPreferences) {
    const double x = v.emotion_profile[static_cast<int>(p)];
    if (x != 0.0) profile[std::string(preference_name(p))] = x;
  }
  json j{{"kind", "video"},
         {"id", v.id},
         {"topic", std::string(topic_name(v.topic))},
         {"popularity", v.popularity},
         {"emotion_profile", profile}};
  if (v.transcript) {
    std::string joined;
    for (std::size_t i = 0; i < v.transcript->size(); ++i) {
      if (i) joined.push_back(' ');
      joined += (*v.transcript)[i];
    }
    j["transcript"] = joined;
  } else {
    j["transcript"] = nullptr;
  }
  return j;
}

Video video_from_json(const json& j) {
  Video v;
  v.id = j.at("id").get<std::string>();
  v.topic = parse_topic(j.at("topic").get<std::string>());
  v.popularity = j.at("popularity").get<double>();
  for (const auto& [key, value] : j.at("emotion_profile").items()) {
    v.emotion_profile[static_cast<int>(parse_preference(key))] = value.get<double>();
  }
  const auto& tr = j.at("transcript");
  if (!tr.is_null()) {
    std::vector<std::string> tokens;
    std::istringstream in(tr.get<std::string>());
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    v.transcript = std::move(tokens);
  }
  return v;
}

}  // namespace

void Corpus::reindex() {
  index.clear();
  index.reserve(videos.size());
  for (std::size_t i = 0; i < videos.size(); ++i) index.emplace(videos[i].id, static_cast<int>(i));
}

const Video* Corpus::find(const VideoId& id) const {
  auto it = index.find(id);
  return it == index.end() ? nullptr : &videos[it->second];
}

const Video& Corpus::at(const VideoId& id) const {
  const Video* v = find(id);
  if (!v) fail(Errc::UnknownVideo, "video " + id + " not in corpus");
  return *v;
}

std::vector<std::string> synthesize_transcript(const std::vector<std::string>& base_vocab,
                                               const LexiconSet& lexicons,
                                               const EmotionProfile& profile, int length,
                                               Rng& rng) {
  std::array<std::vector<std::string>, kPreferenceCount> lex_vecs;
  for (Preference p : kEmotionalPreferences) {
    const auto& tokens = lexicons.tokens(p);
    lex_vecs[static_cast<int>(p)].assign(tokens.begin(), tokens.end());
  }
  std::vector<std::string> out;
  out.reserve(length);
  // Each token consumes exactly two draws (source window, token index), so a
  // raised intensity widens one window without desynchronizing the stream.
  for (int i = 0; i < length; ++i) {
    const double u = rng.uniform();
    double acc = 0.0;
    int source = -1;
    for (Preference p : kEmotionalPreferences) {
      acc += profile[static_cast<int>(p)] / static_cast<double>(kPreferenceCount);
      if (u < acc) {
        source = static_cast<int>(p);
        break;
      }
    }
    if (source >= 0) {
      const auto& lex = lex_vecs[source];
      out.push_back(lex[static_cast<std::size_t>(rng.uniform() * static_cast<double>(lex.size()))]);
    } else {
      out.push_back(base_vocab[static_cast<std::size_t>(
          rng.uniform() * static_cast<double>(base_vocab.size()))]);
    }
  }
  return out;
}

Corpus generate_corpus(const CorpusSpec& spec, const LexiconSet& lexicons) {
  validate_spec(spec);
  Rng rng(spec.rng_seed);

  const VocabStats stats = pool_lexicon_stats(lexicons);
  std::array<std::vector<std::string>, kTopicCount> vocabs;
  for (int t = 0; t < kTopicCount; ++t) vocabs[t] = synthesize_vocab(stats, lexicons, rng);

  const auto counts = topic_counts(spec);
  std::vector<Topic> topics;
  topics.reserve(spec.n_videos);
  for (int t = 0; t < kTopicCount; ++t) {
    topics.insert(topics.end(), counts[t], static_cast<Topic>(t));
  }
  rng.shuffle(topics);

  const int with_transcript =
      static_cast<int>(std::llround(spec.transcript_rate * spec.n_videos));
  std::vector<char> has_transcript(spec.n_videos, 0);
  std::fill(has_transcript.begin(), has_transcript.begin() + with_transcript, 1);
  rng.shuffle(has_transcript);

  const int cap = std::min(
      6, static_cast<int>(std::ceil((1.0 - spec.emotion_sparsity) * kPreferenceCount)));

  Corpus corpus;
  corpus.rng_seed = spec.rng_seed;
  corpus.transcript_rate = spec.transcript_rate;
  corpus.videos.reserve(spec.n_videos);
  std::set<VideoId> used_ids;
  for (int i = 0; i < spec.n_videos; ++i) {
    Video v;
    do {
      v.id.clear();
      for (int c = 0; c < kIdLength; ++c) v.id.push_back(kIdAlphabet[rng.uniform_index(64)]);
    } while (!used_ids.insert(v.id).second);
    v.topic = topics[i];
    v.popularity = 1.0;

    const int k = cap > 0 ? rng.uniform_int(0, cap) : 0;
    std::array<int, 6> prefs{0, 1, 2, 3, 4, 5};
    for (int j = 0; j < k; ++j) {
      std::swap(prefs[j], prefs[j + rng.uniform_index(6 - j)]);
      v.emotion_profile[prefs[j]] = rng.uniform();
    }

    if (has_transcript[i]) {
      const int len = kTranscriptMinTokens +
                      static_cast<int>(rng.uniform_index(kTranscriptMaxTokens - kTranscriptMinTokens + 1));
      v.transcript = synthesize_transcript(vocabs[static_cast<int>(v.topic)], lexicons,
                                           v.emotion_profile, len, rng);
    }
    corpus.videos.push_back(std::move(v));
  }
  corpus.reindex();
  return corpus;
}

std::vector<VideoId> sample_seed_videos(const Corpus& corpus, Topic topic, int n,
                                        std::uint64_t rng_seed) {
  if (n < 1) fail(Errc::InvalidSpec, "sample size must be >= 1");
  std::vector<VideoId> eligible;
  for (const Video& v : corpus.videos) {
    if (!v.transcript) continue;
    if (topic == Topic::Random || v.topic == topic) eligible.push_back(v.id);
  }
  if (static_cast<int>(eligible.size()) < n) {
    fail(Errc::InsufficientCandidates,
         "need " + std::to_string(n) + " transcript-bearing videos for topic " +
             std::string(topic_name(topic)) + ", have " + std::to_string(eligible.size()));
  }
  Rng rng(rng_seed);
  std::vector<VideoId> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const std::size_t j = i + rng.uniform_index(eligible.size() - i);
    std::swap(eligible[i], eligible[j]);
    out.push_back(eligible[i]);
  }
  return out;
}

std::vector<VideoId> build_probe_set(const Corpus& corpus, int per_topic, int n_random,
                                     std::uint64_t rng_seed) {
  if (per_topic < 0 || n_random < 0) fail(Errc::InvalidSpec, "probe counts must be >= 0");
  std::vector<VideoId> out;
  if (per_topic > 0) {
    for (Topic t : {Topic::News, Topic::Gaming, Topic::Fitness}) {
      const auto picks = sample_seed_videos(corpus, t, per_topic,
                                            derive_seed(rng_seed, {static_cast<std::uint64_t>(t)}));
      out.insert(out.end(), picks.begin(), picks.end());
    }
  }
  if (n_random > 0) {
    const auto picks =
        sample_seed_videos(corpus, Topic::Random, n_random, derive_seed(rng_seed, {0xABCDu}));
    out.insert(out.end(), picks.begin(), picks.end());
  }
  return out;
}

std::string corpus_to_string(const Corpus& corpus) {
  std::string out;
  json header{{"kind", "corpus_meta"},
              {"schema_version", 1},
              {"n_videos", corpus.videos.size()},
              {"rng_seed", corpus.rng_seed},
              {"transcript_rate", corpus.transcript_rate}};
  out += header.dump();
  out.push_back('\n');
  for (const Video& v : corpus.videos) {
    out += video_to_json(v).dump();
    out.push_back('\n');
  }
  return out;
}

Corpus corpus_from_string(const std::string& text) {
  Corpus corpus;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(Errc::ParseError, "corpus line " + std::to_string(lineno) + ": " + e.what());
    }
    const std::string kind = j.value("kind", "");
    if (kind == "corpus_meta") {
      if (!j.contains("schema_version")) fail(Errc::SchemaMismatch, "corpus header lacks schema_version");
      if (j.at("schema_version").get<int>() != 1) {
        fail(Errc::SchemaMismatch, "unsupported corpus schema version");
      }
      corpus.rng_seed = j.at("rng_seed").get<std::uint64_t>();
      corpus.transcript_rate = j.at("transcript_rate").get<double>();
      have_header = true;
    } else if (kind == "video") {
      corpus.videos.push_back(video_from_json(j));
    } else {
      fail(Errc::ParseError, "corpus line " + std::to_string(lineno) + ": unknown kind");
    }
  }
  if (!have_header) fail(Errc::SchemaMismatch, "corpus file has no corpus_meta header");
  corpus.reindex();
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoError, "cannot write " + path);
  out << corpus_to_string(corpus);
  if (!out) fail(Errc::IoError, "write failed for " + path);
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return corpus_from_string(buf.str());
}

UtilityTable build_utility_table(const Corpus& corpus, const UtilityScorer& scorer) {
  UtilityTable table;
  table.scores.reserve(corpus.videos.size());
  for (const Video& v : corpus.videos) {
    if (v.transcript) table.scores.emplace(v.id, scorer.utility_vector(v));
  }
  return table;
}

}  // namespace recaudit
