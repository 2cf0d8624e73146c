#include "recaudit/utility.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "recaudit/errors.hpp"

namespace recaudit {

std::string normalize_token(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (unsigned char c : raw) {
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

void LexiconSet::set_tokens(Preference p, std::set<std::string> tokens) {
  if (p == Preference::HFrequency) fail(Errc::InvalidSpec, "HFrequency takes no lexicon");
  lex_[static_cast<int>(p)] = std::move(tokens);
}

LexiconSet LexiconSet::parse(std::string_view text, std::string_view origin) {
  LexiconSet out;
  std::array<bool, kPreferenceCount> seen{};
  int current = -1;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.pop_back();
    }
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    if (line[start] == '#') continue;
    if (line[start] == '[') {
      const std::size_t end = line.find(']', start);
      if (end == std::string::npos) {
        fail(Errc::ParseError, std::string(origin) + ":" + std::to_string(lineno) +
                                   ": unterminated section header");
      }
      const std::string name = line.substr(start + 1, end - start - 1);
      Preference p;
      try {
        p = parse_preference(name);
      } catch (const Error&) {
        fail(Errc::ParseError, std::string(origin) + ":" + std::to_string(lineno) +
                                   ": unknown section [" + name + "]");
      }
      current = static_cast<int>(p);
      seen[current] = true;
      continue;
    }
    if (current < 0) {
      fail(Errc::ParseError,
           std::string(origin) + ":" + std::to_string(lineno) + ": token before any section");
    }
    const std::string token = normalize_token(line.substr(start));
    if (token.empty()) {
      fail(Errc::ParseError, std::string(origin) + ":" + std::to_string(lineno) +
                                 ": token has no alphanumeric characters");
    }
    if (current != static_cast<int>(Preference::HFrequency)) {
      out.lex_[current].insert(token);
    }
  }
  for (Preference p : kEmotionalPreferences) {
    const int i = static_cast<int>(p);
    if (!seen[i] || out.lex_[i].empty()) {
      fail(Errc::MissingPreference,
           std::string(origin) + ": no tokens for [" + std::string(preference_name(p)) + "]");
    }
  }
  return out;
}

LexiconSet LexiconSet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open lexicon file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

double UtilityScorer::score(Preference p, std::span<const std::string> transcript) const {
  if (transcript.empty()) fail(Errc::EmptyTranscript, "empty transcript");
  if (p == Preference::HFrequency) {
    long h = 0, alpha = 0;
    for (const auto& tok : transcript) {
      for (unsigned char c : tok) {
        if (std::isalpha(c)) {
          ++alpha;
          if (std::tolower(c) == 'h') ++h;
        }
      }
    }
    if (alpha == 0) return 0.0;
    return static_cast<double>(h) / static_cast<double>(alpha);
  }
  const auto& lexicon = lex_.tokens(p);
  std::size_t hits = 0;
  for (const auto& tok : transcript) hits += lexicon.count(tok);
  return static_cast<double>(hits) / static_cast<double>(transcript.size());
}

UtilityVector UtilityScorer::utility_vector(const Video& video) const {
  if (!video.transcript) fail(Errc::MissingTranscript, "video " + video.id + " has no transcript");
  UtilityVector out{};
  for (Preference p : kAllPreferences) {
    out[static_cast<int>(p)] = score(p, *video.transcript);
  }
  return out;
}

}  // namespace recaudit
