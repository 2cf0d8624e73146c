#include "recaudit/types.hpp"

#include "recaudit/errors.hpp"

namespace recaudit {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InsufficientCandidates: return "InsufficientCandidates";
    case Errc::EmptyTranscript: return "EmptyTranscript";
    case Errc::MissingTranscript: return "MissingTranscript";
    case Errc::MissingPreference: return "MissingPreference";
    case Errc::ParseError: return "ParseError";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::UnknownVideo: return "UnknownVideo";
    case Errc::ModelNotFrozen: return "ModelNotFrozen";
    case Errc::NoEligibleCandidates: return "NoEligibleCandidates";
    case Errc::IoError: return "IoError";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::TooFewPairs: return "TooFewPairs";
    case Errc::DegenerateVariance: return "DegenerateVariance";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::ZeroPooledVariance: return "ZeroPooledVariance";
    case Errc::RankDeficientDesign: return "RankDeficientDesign";
    case Errc::TooFewGroups: return "TooFewGroups";
    case Errc::MissingBaseline: return "MissingBaseline";
    case Errc::EmptySet: return "EmptySet";
  }
  return "UnknownError";
}

std::string_view topic_name(Topic t) {
  switch (t) {
    case Topic::News: return "news";
    case Topic::Gaming: return "gaming";
    case Topic::Fitness: return "fitness";
    case Topic::Random: return "random";
  }
  fail(Errc::InvalidSpec, "bad topic value");
}

Topic parse_topic(std::string_view name) {
  for (Topic t : kAllTopics) {
    if (topic_name(t) == name) return t;
  }
  fail(Errc::ParseError, "unknown topic '" + std::string(name) + "'");
}

std::string_view preference_name(Preference p) {
  switch (p) {
    case Preference::Anger: return "anger";
    case Preference::Outrage: return "outrage";
    case Preference::Grievance: return "grievance";
    case Preference::GroupIdentity: return "group_identity";
    case Preference::Negative: return "negative";
    case Preference::Positive: return "positive";
    case Preference::HFrequency: return "h_frequency";
  }
  fail(Errc::InvalidSpec, "bad preference value");
}

Preference parse_preference(std::string_view name) {
  for (Preference p : kAllPreferences) {
    if (preference_name(p) == name) return p;
  }
  fail(Errc::ParseError, "unknown preference '" + std::string(name) + "'");
}

std::string_view condition_name(Condition c) {
  return c == Condition::Treatment ? "treatment" : "control";
}

Condition parse_condition(std::string_view name) {
  if (name == "treatment") return Condition::Treatment;
  if (name == "control") return Condition::Control;
  fail(Errc::ParseError, "unknown condition '" + std::string(name) + "'");
}

std::string_view surface_name(Surface s) {
  switch (s) {
    case Surface::Personalized: return "upnext_personalized";
    case Surface::Contextual: return "upnext_contextual";
    case Surface::Probe: return "probe";
  }
  fail(Errc::InvalidSpec, "bad surface value");
}

Surface parse_surface(std::string_view name) {
  if (name == "upnext_personalized") return Surface::Personalized;
  if (name == "upnext_contextual") return Surface::Contextual;
  if (name == "probe") return Surface::Probe;
  fail(Errc::ParseError, "unknown surface '" + std::string(name) + "'");
}

}  // namespace recaudit
