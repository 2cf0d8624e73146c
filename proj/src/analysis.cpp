#include "recaudit/analysis.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "recaudit/errors.hpp"

namespace recaudit {

namespace {

void append_items(std::vector<AnalysisSample>& out, const Trace& trace, Preference score_pref,
                  const TraceStore& store, const RecommendationList& list, int depth,
                  const SampleFilter& filter) {
  if (filter.depth && *filter.depth != depth) return;
  for (const RecItem& item : list.items) {
    const UtilityVector* u = store.utilities_of(item.id);
    if (!u) continue;
    AnalysisSample s;
    s.puppet_id = trace.puppet_id;
    s.condition = trace.condition;
    s.seed_topic = trace.seed_topic;
    s.depth = depth;
    s.surface = filter.surface;
    s.rank = item.rank;
    s.utility = (*u)[static_cast<int>(score_pref)];
    out.push_back(std::move(s));
  }
}

double group_mean(const std::vector<double>& values) {
  return stats::mean(std::span<const double>(values));
}

}  // namespace

std::vector<AnalysisSample> flatten_samples(const TraceStore& store, Preference score_pref,
                                            const SampleFilter& filter) {
  std::vector<AnalysisSample> out;
  for (const Trace& trace : store.traces) {
    // The flattened view is the audit for one preference: treatment rows come
    // only from puppets pursuing it, control rows from every control puppet.
    if (trace.condition == Condition::Treatment &&
        (!trace.preference || *trace.preference != score_pref)) {
      continue;
    }
    if (filter.condition && *filter.condition != trace.condition) continue;
    if (filter.seed_topic && *filter.seed_topic != trace.seed_topic) continue;
    if (filter.surface == Surface::Probe) {
      for (const ProbeRecord& probe : trace.probes) {
        append_items(out, trace, score_pref, store, probe.personalized, probe.depth, filter);
      }
      continue;
    }
    for (const StepRecord& step : trace.steps) {
      const RecommendationList& list =
          filter.surface == Surface::Personalized ? step.personalized : step.contextual;
      append_items(out, trace, score_pref, store, list, step.depth, filter);
    }
  }
  return out;
}

std::vector<double> utilities_of(const std::vector<AnalysisSample>& samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const AnalysisSample& s : samples) out.push_back(s.utility);
  return out;
}

double prevalence(const std::vector<AnalysisSample>& samples) {
  return group_mean(utilities_of(samples));
}

stats::SpearmanResult prominence(const std::vector<AnalysisSample>& samples) {
  std::vector<double> utility;
  std::vector<double> inverted_rank;
  utility.reserve(samples.size());
  inverted_rank.reserve(samples.size());
  for (const AnalysisSample& s : samples) {
    utility.push_back(s.utility);
    inverted_rank.push_back(-static_cast<double>(s.rank));
  }
  return stats::spearman(utility, inverted_rank);
}

DepthTrend depth_trend(const std::vector<AnalysisSample>& samples) {
  std::map<int, std::vector<double>> treatment;
  std::map<int, std::vector<double>> control;
  std::vector<double> baseline_values;
  for (const AnalysisSample& s : samples) {
    auto& bucket = s.condition == Condition::Treatment ? treatment : control;
    bucket[s.depth].push_back(s.utility);
    if (s.condition == Condition::Control && s.depth == 0) baseline_values.push_back(s.utility);
  }
  if (baseline_values.empty()) {
    fail(Errc::MissingBaseline, "no control samples at depth 0");
  }
  DepthTrend trend;
  trend.baseline = group_mean(baseline_values);
  if (trend.baseline <= 0.0) {
    fail(Errc::MissingBaseline, "control depth-0 baseline is zero");
  }
  for (const auto& [depth, values] : treatment) {
    trend.treatment.push_back(
        {depth, 100.0 * (group_mean(values) - trend.baseline) / trend.baseline});
  }
  for (const auto& [depth, values] : control) {
    trend.control.push_back(
        {depth, 100.0 * (group_mean(values) - trend.baseline) / trend.baseline});
  }
  return trend;
}

ModerationFit moderation_fit(const std::vector<AnalysisSample>& samples) {
  std::map<std::tuple<int, int, int>, std::vector<double>> groups;
  std::vector<double> baseline_values;
  std::vector<Topic> topics_present;
  for (const AnalysisSample& s : samples) {
    groups[{s.depth, static_cast<int>(s.condition), static_cast<int>(s.seed_topic)}].push_back(
        s.utility);
    if (s.condition == Condition::Control && s.depth == 0) baseline_values.push_back(s.utility);
    if (std::find(topics_present.begin(), topics_present.end(), s.seed_topic) ==
        topics_present.end()) {
      topics_present.push_back(s.seed_topic);
    }
  }
  if (baseline_values.empty()) {
    fail(Errc::MissingBaseline, "no control samples at depth 0");
  }
  const double baseline = group_mean(baseline_values);
  if (baseline <= 0.0) fail(Errc::MissingBaseline, "control depth-0 baseline is zero");

  std::sort(topics_present.begin(), topics_present.end());
  Topic reference = topics_present.front();
  if (std::find(topics_present.begin(), topics_present.end(), Topic::Random) !=
      topics_present.end()) {
    reference = Topic::Random;
  }
  std::vector<Topic> dummies;
  if (topics_present.size() >= 2) {
    for (Topic t : topics_present) {
      if (t != reference) dummies.push_back(t);
    }
  }

  std::vector<std::string> names{"intercept", "depth", "treatment", "depth:treatment"};
  for (Topic t : dummies) names.push_back("domain:" + std::string(topic_name(t)));
  for (Topic t : dummies) names.push_back("depth:domain:" + std::string(topic_name(t)));

  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  rows.reserve(groups.size());
  y.reserve(groups.size());
  for (const auto& [key, values] : groups) {
    const double depth = static_cast<double>(std::get<0>(key));
    const double treat = std::get<1>(key) == static_cast<int>(Condition::Treatment) ? 1.0 : 0.0;
    const Topic topic = static_cast<Topic>(std::get<2>(key));
    std::vector<double> row{1.0, depth, treat, depth * treat};
    for (Topic t : dummies) row.push_back(t == topic ? 1.0 : 0.0);
    for (Topic t : dummies) row.push_back(t == topic ? depth : 0.0);
    rows.push_back(std::move(row));
    y.push_back(group_mean(values) / baseline);
  }

  ModerationFit result;
  result.baseline = baseline;
  result.n_groups = rows.size();
  result.fit = stats::ols(rows, y, names);
  return result;
}

std::map<Topic, ProbeTopicStats> probe_persistence(const TraceStore& store,
                                                   Preference score_pref) {
  struct Side {
    std::vector<double> utilities;
    std::vector<double> depths;
  };
  std::map<Topic, std::array<Side, 2>> by_topic;  // [0] treatment, [1] control
  for (const Trace& trace : store.traces) {
    if (trace.condition == Condition::Treatment &&
        (!trace.preference || *trace.preference != score_pref)) {
      continue;
    }
    const int side = trace.condition == Condition::Treatment ? 0 : 1;
    for (const ProbeRecord& probe : trace.probes) {
      for (const RecItem& item : probe.personalized.items) {
        const UtilityVector* u = store.utilities_of(item.id);
        if (!u) continue;
        Side& s = by_topic[probe.probe_topic][side];
        s.utilities.push_back((*u)[static_cast<int>(score_pref)]);
        s.depths.push_back(static_cast<double>(probe.depth));
      }
    }
  }

  std::map<Topic, ProbeTopicStats> out;
  for (const auto& [topic, sides] : by_topic) {
    const Side& t = sides[0];
    const Side& c = sides[1];
    if (t.utilities.empty() || c.utilities.empty()) continue;
    ProbeTopicStats stats_row;
    stats_row.n_treatment = t.utilities.size();
    stats_row.n_control = c.utilities.size();
    const double mean_t = group_mean(t.utilities);
    const double mean_c = group_mean(c.utilities);
    stats_row.percent_diff = mean_c != 0.0 ? 100.0 * (mean_t - mean_c) / mean_c : 0.0;
    try {
      stats_row.cohens_d = stats::cohens_d(t.utilities, c.utilities);
    } catch (const Error&) {
      stats_row.cohens_d = 0.0;
    }
    try {
      stats_row.slope_treatment = stats::linear_slope(t.depths, t.utilities);
    } catch (const Error&) {
      stats_row.slope_treatment = 0.0;
    }
    try {
      stats_row.slope_control = stats::linear_slope(c.depths, c.utilities);
    } catch (const Error&) {
      stats_row.slope_control = 0.0;
    }
    out.emplace(topic, stats_row);
  }
  return out;
}

}  // namespace recaudit
