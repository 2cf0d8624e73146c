#ifndef RECAUDIT_ERRORS_HPP
#define RECAUDIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace recaudit {

enum class Errc {
  InvalidSpec,
  InvalidConfig,
  InsufficientCandidates,
  EmptyTranscript,
  MissingTranscript,
  MissingPreference,
  ParseError,
  EmptyInput,
  NonFiniteInput,
  UnknownVideo,
  ModelNotFrozen,
  NoEligibleCandidates,
  IoError,
  SchemaMismatch,
  TooFewPairs,
  DegenerateVariance,
  TooFewSamples,
  ZeroPooledVariance,
  RankDeficientDesign,
  TooFewGroups,
  MissingBaseline,
  EmptySet,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace recaudit

#endif
