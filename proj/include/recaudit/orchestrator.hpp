#ifndef RECAUDIT_ORCHESTRATOR_HPP
#define RECAUDIT_ORCHESTRATOR_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "recaudit/corpus.hpp"
#include "recaudit/platform.hpp"
#include "recaudit/puppet.hpp"
#include "recaudit/types.hpp"
#include "recaudit/utility.hpp"

namespace recaudit {

inline constexpr std::uint32_t kTraceSchemaVersion = 1;

struct ProbeSpec {
  int per_topic = 1;
  int n_random = 1;
};

struct ExperimentConfig {
  std::vector<Preference> preferences{kAllPreferences.begin(), kAllPreferences.end()};
  std::vector<Topic> seed_topics{kAllTopics.begin(), kAllTopics.end()};
  int seeds_per_topic = 10;
  int replications = 2;
  int steps = 100;
  int probe_interval = 20;
  ProbeSpec probe;
  std::string corpus_ref;
  std::string platform_ref;
  std::string lexicons_ref;
  std::uint64_t master_seed = 0;
};

ExperimentConfig experiment_config_from_json_text(const std::string& text);
std::string experiment_config_to_json_text(const ExperimentConfig& config);
void validate_config(const ExperimentConfig& config);

struct PuppetPlan {
  std::string id;
  std::optional<Preference> preference;
  Condition condition = Condition::Control;
  std::uint64_t rng_seed = 0;
};

struct Batch {
  Topic topic = Topic::Random;
  int seed_index = 0;
  int replication = 0;
  VideoId seed_video;
  std::vector<PuppetPlan> puppets;  // one per preference plus one control
};

// Deterministic: topics in config order, seed videos sampled once per topic
// and shared across replications, puppet seeds derived from the master seed.
std::vector<Batch> plan_experiment(const ExperimentConfig& config, const Corpus& corpus);

struct SessionFailure {
  std::string puppet_id;
  std::string message;
};

struct TraceStore {
  std::string experiment_id;
  ExperimentConfig config;
  std::vector<Trace> traces;
  std::vector<SessionFailure> failures;
  // Scores for every video that appears in a trace; videos without
  // transcripts are absent and serialize as null utilities.
  std::unordered_map<VideoId, UtilityVector> utilities;

  const UtilityVector* utilities_of(const VideoId& id) const {
    auto it = utilities.find(id);
    return it == utilities.end() ? nullptr : &it->second;
  }
};

struct RunOptions {
  int workers = 1;
  std::string trace_path;  // empty = in-memory only
};

// Executes every planned session. With workers > 1 sessions run concurrently,
// but completed blocks are written in plan order, so the trace file is
// byte-identical for any worker count.
TraceStore run_experiment(const ExperimentConfig& config, const Corpus& corpus,
                          const PlatformModel& platform, const LexiconSet& lexicons,
                          const RunOptions& options = {});

void persist_store(const TraceStore& store, const std::string& path);
TraceStore load_store(const std::string& path);
std::string store_to_string(const TraceStore& store);

std::string experiment_id_for(const ExperimentConfig& config);

}  // namespace recaudit

#endif
