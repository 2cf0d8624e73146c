#ifndef RECAUDIT_UTILITY_HPP
#define RECAUDIT_UTILITY_HPP

#include <array>
#include <set>
#include <span>
#include <string>
#include <unordered_map>

#include "recaudit/types.hpp"

namespace recaudit {

// Lowercase, non-alphanumerics stripped. Empty result means the raw token
// carried no alphanumeric characters.
std::string normalize_token(std::string_view raw);

// Six emotional lexicons keyed by preference; HFrequency never has one.
class LexiconSet {
 public:
  // File format: [preference] section headers, one token per line, '#' comments.
  // All six emotional preferences must be present and non-empty.
  static LexiconSet load(const std::string& path);
  static LexiconSet parse(std::string_view text, std::string_view origin);

  const std::set<std::string>& tokens(Preference p) const { return lex_[static_cast<int>(p)]; }
  bool contains(Preference p, const std::string& token) const {
    return lex_[static_cast<int>(p)].count(token) > 0;
  }
  void set_tokens(Preference p, std::set<std::string> tokens);

 private:
  std::array<std::set<std::string>, kPreferenceCount> lex_;
};

using UtilityVector = std::array<double, kPreferenceCount>;

class UtilityScorer {
 public:
  explicit UtilityScorer(LexiconSet lexicons) : lex_(std::move(lexicons)) {}

  // Lexicon preferences: fraction of tokens in the lexicon. HFrequency:
  // count of 'h' over count of alphabetic characters. Always in [0, 1].
  double score(Preference p, std::span<const std::string> transcript) const;

  UtilityVector utility_vector(const Video& video) const;

  const LexiconSet& lexicons() const { return lex_; }

 private:
  LexiconSet lex_;
};

// Per-video utility vectors; videos without transcripts are absent.
struct UtilityTable {
  std::unordered_map<VideoId, UtilityVector> scores;

  const UtilityVector* find(const VideoId& id) const {
    auto it = scores.find(id);
    return it == scores.end() ? nullptr : &it->second;
  }
};

}  // namespace recaudit

#endif
