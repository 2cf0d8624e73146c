#include "recaudit/puppet.hpp"

#include <algorithm>

#include "recaudit/errors.hpp"

namespace recaudit {

SelectResult select_next(const RecommendationList& recs, std::optional<Preference> preference,
                         const UtilityTable& utilities, Rng& rng) {
  if (recs.items.empty()) fail(Errc::EmptyInput, "empty recommendation list");
  std::vector<const RecItem*> eligible;
  eligible.reserve(recs.items.size());
  for (const RecItem& item : recs.items) {
    if (utilities.find(item.id) != nullptr) eligible.push_back(&item);
  }
  if (eligible.empty()) {
    fail(Errc::NoEligibleCandidates, "no transcript-bearing item in list for " + recs.source_video);
  }
  SelectResult result;
  result.eligible_count = static_cast<int>(eligible.size());
  if (!preference) {
    result.video = eligible[rng.uniform_index(eligible.size())]->id;
    return result;
  }
  const int p = static_cast<int>(*preference);
  const RecItem* best = eligible.front();
  double best_u = (*utilities.find(best->id))[p];
  for (std::size_t i = 1; i < eligible.size(); ++i) {
    const RecItem* item = eligible[i];
    const double u = (*utilities.find(item->id))[p];
    if (u > best_u || (u == best_u && (item->rank < best->rank ||
                                       (item->rank == best->rank && item->id < best->id)))) {
      best = item;
      best_u = u;
    }
  }
  result.video = best->id;
  return result;
}

Trace run_session(const SockPuppet& puppet, const PlatformModel& platform,
                  const UtilityTable& utilities, const Corpus& corpus,
                  const SessionConfig& session) {
  if (session.steps < 1) fail(Errc::InvalidConfig, "session needs at least one step");
  if (!session.probe_set.empty() && session.probe_interval < 1) {
    fail(Errc::InvalidConfig, "probe_interval must be >= 1 when probes are enabled");
  }
  if (utilities.find(puppet.seed_video) == nullptr) {
    fail(Errc::MissingTranscript, "seed video " + puppet.seed_video + " has no transcript");
  }

  Trace trace;
  trace.puppet_id = puppet.id;
  trace.preference = puppet.preference;
  trace.condition = puppet.condition;
  trace.seed_topic = puppet.seed_topic;
  trace.seed_video = puppet.seed_video;
  trace.rng_seed = puppet.rng_seed;

  Rng rng(puppet.rng_seed);
  UserState state = watch(UserState{}, puppet.seed_video);
  VideoId current = puppet.seed_video;

  for (int t = 0; t < session.steps; ++t) {
    StepRecord step;
    step.depth = t;
    step.watched = current;
    step.personalized = platform.recommend(current, &state);
    step.contextual = platform.recommend(current);
    SelectResult sel;
    try {
      sel = select_next(step.personalized, puppet.preference, utilities, rng);
    } catch (const Error& e) {
      if (e.code() != Errc::NoEligibleCandidates) throw;
      trace.truncated = true;
      trace.truncation_reason = e.what();
      break;
    }
    step.selected = sel.video;
    step.eligible_count = sel.eligible_count;
    state = watch(std::move(state), sel.video);
    current = sel.video;
    trace.steps.push_back(std::move(step));

    if (!session.probe_set.empty() && (t + 1) % session.probe_interval == 0) {
      for (const VideoId& probe : session.probe_set) {
        ProbeRecord record;
        record.depth = t + 1;
        record.probe_video = probe;
        record.probe_topic = corpus.at(probe).topic;
        record.personalized = platform.recommend(probe, &state);
        trace.probes.push_back(std::move(record));
      }
    }
  }
  return trace;
}

}  // namespace recaudit
