#ifndef RECAUDIT_CORPUS_HPP
#define RECAUDIT_CORPUS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "recaudit/rng.hpp"
#include "recaudit/types.hpp"

namespace recaudit {

class LexiconSet;
class UtilityScorer;
struct UtilityTable;

struct CorpusSpec {
  int n_videos = 0;
  std::map<Topic, double> topic_mix;  // fractions, must sum to 1
  double transcript_rate = 0.9;
  double emotion_sparsity = 0.5;
  std::uint64_t rng_seed = 0;
};

struct Corpus {
  std::vector<Video> videos;
  std::uint64_t rng_seed = 0;
  double transcript_rate = 0.0;

  std::unordered_map<VideoId, int> index;

  void reindex();
  const Video* find(const VideoId& id) const;
  const Video& at(const VideoId& id) const;  // throws UnknownVideo
};

Corpus generate_corpus(const CorpusSpec& spec, const LexiconSet& lexicons);

// Exposed seam for the transcript-mixing property: same rng seed and length,
// raise profile[p], and the lexicon-token share for p never decreases.
std::vector<std::string> synthesize_transcript(const std::vector<std::string>& base_vocab,
                                               const LexiconSet& lexicons,
                                               const EmotionProfile& profile, int length, Rng& rng);

// Without replacement, transcript-bearing only. Topic::Random draws uniformly
// over the whole corpus.
std::vector<VideoId> sample_seed_videos(const Corpus& corpus, Topic topic, int n,
                                        std::uint64_t rng_seed);

// per_topic picks from each of News/Gaming/Fitness plus n_random corpus-wide
// picks; may overlap seed videos.
std::vector<VideoId> build_probe_set(const Corpus& corpus, int per_topic, int n_random,
                                     std::uint64_t rng_seed);

void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);
std::string corpus_to_string(const Corpus& corpus);
Corpus corpus_from_string(const std::string& text);

UtilityTable build_utility_table(const Corpus& corpus, const UtilityScorer& scorer);

}  // namespace recaudit

#endif
