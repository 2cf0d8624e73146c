#ifndef RECAUDIT_PUPPET_HPP
#define RECAUDIT_PUPPET_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "recaudit/platform.hpp"
#include "recaudit/rng.hpp"
#include "recaudit/types.hpp"
#include "recaudit/utility.hpp"

namespace recaudit {

struct SockPuppet {
  std::string id;
  std::optional<Preference> preference;  // nullopt = control
  Condition condition = Condition::Control;
  VideoId seed_video;
  Topic seed_topic = Topic::Random;
  std::uint64_t rng_seed = 0;
};

struct SelectResult {
  VideoId video;
  int eligible_count = 0;
};

// Items without transcripts (absent from the utility table) are ineligible.
// Treatment: argmax utility, ties by rank then ascending id. Control: uniform.
SelectResult select_next(const RecommendationList& recs, std::optional<Preference> preference,
                         const UtilityTable& utilities, Rng& rng);

struct StepRecord {
  int depth = 0;
  VideoId watched;
  RecommendationList personalized;
  RecommendationList contextual;
  VideoId selected;
  int eligible_count = 0;
};

struct ProbeRecord {
  int depth = 0;  // multiple of the probe interval
  VideoId probe_video;
  Topic probe_topic = Topic::Random;
  RecommendationList personalized;
};

struct Trace {
  std::string puppet_id;
  std::optional<Preference> preference;
  Condition condition = Condition::Control;
  Topic seed_topic = Topic::Random;
  VideoId seed_video;
  std::uint64_t rng_seed = 0;
  std::vector<StepRecord> steps;
  std::vector<ProbeRecord> probes;
  bool truncated = false;
  std::string truncation_reason;
};

struct SessionConfig {
  int steps = 100;
  int probe_interval = 20;
  std::vector<VideoId> probe_set;  // empty disables probing
};

// Closed loop: watch seed, fetch personalized + contextual lists, select, repeat.
// After each probe_interval steps the probe set is queried with the current
// state; probe videos never enter the watch history.
Trace run_session(const SockPuppet& puppet, const PlatformModel& platform,
                  const UtilityTable& utilities, const Corpus& corpus,
                  const SessionConfig& session);

}  // namespace recaudit

#endif
