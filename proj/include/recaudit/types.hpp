#ifndef RECAUDIT_TYPES_HPP
#define RECAUDIT_TYPES_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace recaudit {

using VideoId = std::string;

enum class Topic { News, Gaming, Fitness, Random };
inline constexpr int kTopicCount = 4;
inline constexpr std::array<Topic, kTopicCount> kAllTopics{Topic::News, Topic::Gaming,
                                                           Topic::Fitness, Topic::Random};

// HFrequency is the meaningless control preference: the share of the letter 'h'
// in a transcript. The other six are lexicon-backed emotional preferences.
enum class Preference {
  Anger,
  Outrage,
  Grievance,
  GroupIdentity,
  Negative,
  Positive,
  HFrequency,
};
inline constexpr int kPreferenceCount = 7;
inline constexpr std::array<Preference, kPreferenceCount> kAllPreferences{
    Preference::Anger,    Preference::Outrage,  Preference::Grievance, Preference::GroupIdentity,
    Preference::Negative, Preference::Positive, Preference::HFrequency};
inline constexpr std::array<Preference, 6> kEmotionalPreferences{
    Preference::Anger,         Preference::Outrage,  Preference::Grievance,
    Preference::GroupIdentity, Preference::Negative, Preference::Positive};

enum class Condition { Treatment, Control };

enum class Surface { Personalized, Contextual, Probe };

std::string_view topic_name(Topic t);
Topic parse_topic(std::string_view name);

std::string_view preference_name(Preference p);
Preference parse_preference(std::string_view name);

std::string_view condition_name(Condition c);
Condition parse_condition(std::string_view name);

std::string_view surface_name(Surface s);
Surface parse_surface(std::string_view name);

using EmotionProfile = std::array<double, kPreferenceCount>;

struct Video {
  VideoId id;
  Topic topic = Topic::Random;
  // Generation-time ground truth; the HFrequency slot is always 0.
  EmotionProfile emotion_profile{};
  double popularity = 1.0;
  std::optional<std::vector<std::string>> transcript;
};

}  // namespace recaudit

#endif
