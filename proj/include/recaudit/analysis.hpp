#ifndef RECAUDIT_ANALYSIS_HPP
#define RECAUDIT_ANALYSIS_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "recaudit/orchestrator.hpp"
#include "recaudit/stats.hpp"
#include "recaudit/types.hpp"

namespace recaudit {

// One recommendation exposure scored for a single preference. Control puppets
// contribute baseline rows for every preference under audit.
struct AnalysisSample {
  std::string puppet_id;
  Condition condition = Condition::Control;
  Topic seed_topic = Topic::Random;
  int depth = 0;
  Surface surface = Surface::Personalized;
  int rank = 0;
  double utility = 0.0;
};

struct SampleFilter {
  Surface surface = Surface::Personalized;
  std::optional<Condition> condition;
  std::optional<Topic> seed_topic;
  std::optional<int> depth;
};

// Unscoreable exposures (no transcript) are skipped.
std::vector<AnalysisSample> flatten_samples(const TraceStore& store, Preference score_pref,
                                            const SampleFilter& filter);

std::vector<double> utilities_of(const std::vector<AnalysisSample>& samples);

double prevalence(const std::vector<AnalysisSample>& samples);

// Spearman correlation of utility against inverted rank: positive means
// better-ranked items are more preference-aligned.
stats::SpearmanResult prominence(const std::vector<AnalysisSample>& samples);

struct DepthPoint {
  int depth = 0;
  double percent_diff = 0.0;  // vs the control depth-0 baseline
};

struct DepthTrend {
  std::vector<DepthPoint> treatment;
  std::vector<DepthPoint> control;
  double baseline = 0.0;
};

DepthTrend depth_trend(const std::vector<AnalysisSample>& samples);

struct ModerationFit {
  stats::OlsFit fit;
  double baseline = 0.0;
  std::size_t n_groups = 0;
};

// Rows are (depth, condition, seed_topic) group means normalized by the pooled
// control depth-0 mean. Terms: intercept, depth, treatment, depth:treatment,
// then seed-domain dummies and depth:domain interactions (Random reference).
ModerationFit moderation_fit(const std::vector<AnalysisSample>& samples);

struct ProbeTopicStats {
  double percent_diff = 0.0;  // treatment vs control mean
  double cohens_d = 0.0;
  double slope_treatment = 0.0;  // utility per probe depth
  double slope_control = 0.0;
  std::size_t n_treatment = 0;
  std::size_t n_control = 0;
};

std::map<Topic, ProbeTopicStats> probe_persistence(const TraceStore& store, Preference score_pref);

}  // namespace recaudit

#endif
