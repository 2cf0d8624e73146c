#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "recaudit/analysis.hpp"
#include "recaudit/errors.hpp"
#include "recaudit/pipeline.hpp"

namespace recaudit {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

template <typename Fn>
std::optional<double> guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write " + path.string());
  return out;
}

int parse_replicate(const std::string& puppet_id) {
  // Ids look like "<topic>-s03-r1-<label>"; fall back to 0 if the shape moved.
  std::vector<std::string> parts;
  std::stringstream ss(puppet_id);
  std::string part;
  while (std::getline(ss, part, '-')) parts.push_back(part);
  if (parts.size() >= 4 && parts[2].size() >= 2 && parts[2][0] == 'r') {
    try {
      return std::stoi(parts[2].substr(1));
    } catch (...) {
    }
  }
  return 0;
}

void write_h1(const TraceStore& store, const std::filesystem::path& dir) {
  auto out = open_csv(dir / "h1_prevalence_prominence.csv");
  out << "preference,condition,n_samples,prevalence,prominence_rho,prominence_p\n";
  for (Preference p : kAllPreferences) {
    for (Condition c : {Condition::Treatment, Condition::Control}) {
      SampleFilter filter;
      filter.surface = Surface::Personalized;
      filter.condition = c;
      const auto samples = flatten_samples(store, p, filter);
      const auto prev = guarded([&] { return prevalence(samples); });
      std::optional<double> rho;
      std::optional<double> pval;
      try {
        const auto prom = prominence(samples);
        rho = prom.rho;
        pval = prom.p_value;
      } catch (const Error&) {
      }
      out << preference_name(p) << ',' << condition_name(c) << ',' << samples.size() << ','
          << fmt(prev) << ',' << fmt(rho) << ',' << fmt(pval) << '\n';
    }
  }
}

void write_h2(const TraceStore& store, const std::filesystem::path& dir) {
  auto out = open_csv(dir / "h2_contextual_vs_personalized.csv");
  out << "preference,n_personalized,n_contextual,mean_personalized,mean_contextual,"
         "ks_d,ks_p,cohens_d,iqr_overlap\n";
  for (Preference p : kAllPreferences) {
    SampleFilter filter;
    filter.condition = Condition::Treatment;
    filter.surface = Surface::Personalized;
    const auto personalized = utilities_of(flatten_samples(store, p, filter));
    filter.surface = Surface::Contextual;
    const auto contextual = utilities_of(flatten_samples(store, p, filter));
    const auto mean_p = guarded([&] { return stats::mean(personalized); });
    const auto mean_c = guarded([&] { return stats::mean(contextual); });
    std::optional<double> ks_d;
    std::optional<double> ks_p;
    try {
      const auto ks = stats::ks_test(personalized, contextual);
      ks_d = ks.d;
      ks_p = ks.p_value;
    } catch (const Error&) {
    }
    const auto d = guarded([&] { return stats::cohens_d(personalized, contextual); });
    const auto overlap =
        guarded([&] { return stats::iqr_shift(personalized, contextual).overlap_fraction; });
    out << preference_name(p) << ',' << personalized.size() << ',' << contextual.size() << ','
        << fmt(mean_p) << ',' << fmt(mean_c) << ',' << fmt(ks_d) << ',' << fmt(ks_p) << ','
        << fmt(d) << ',' << fmt(overlap) << '\n';
  }
}

void write_h3_moderation(const TraceStore& store, const std::filesystem::path& dir) {
  auto out = open_csv(dir / "h3_moderation.csv");
  out << "preference,term,estimate,std_error,p_value,r_squared,n_groups\n";
  for (Preference p : kAllPreferences) {
    SampleFilter filter;
    filter.surface = Surface::Personalized;
    const auto samples = flatten_samples(store, p, filter);
    try {
      const ModerationFit fit = moderation_fit(samples);
      for (const stats::OlsTerm& term : fit.fit.terms) {
        out << preference_name(p) << ',' << term.name << ',' << fmt(term.estimate) << ','
            << fmt(term.std_error) << ',' << fmt(term.p_value) << ',' << fmt(fit.fit.r_squared)
            << ',' << fit.n_groups << '\n';
      }
    } catch (const Error& e) {
      out << preference_name(p) << ",unavailable:" << errc_name(e.code()) << ",,,,,\n";
    }
  }
}

void write_h3_probes(const TraceStore& store, const std::filesystem::path& dir) {
  auto out = open_csv(dir / "h3_probe_persistence.csv");
  out << "preference,probe_topic,n_treatment,n_control,percent_diff,cohens_d,"
         "slope_treatment,slope_control\n";
  for (Preference p : kAllPreferences) {
    for (const auto& [topic, row] : probe_persistence(store, p)) {
      out << preference_name(p) << ',' << topic_name(topic) << ',' << row.n_treatment << ','
          << row.n_control << ',' << fmt(row.percent_diff) << ',' << fmt(row.cohens_d) << ','
          << fmt(row.slope_treatment) << ',' << fmt(row.slope_control) << '\n';
    }
  }
}

void write_similarity(const TraceStore& store, const std::filesystem::path& dir) {
  auto out = open_csv(dir / "similarity_validation.csv");
  out << "pair_class,mean_jaccard,sd,n_pairs\n";
  std::vector<stats::LabeledSet> sets;
  for (const Trace& trace : store.traces) {
    stats::LabeledSet set;
    set.preference = trace.preference ? std::string(preference_name(*trace.preference)) : "control";
    set.condition = std::string(condition_name(trace.condition));
    set.replicate = parse_replicate(trace.puppet_id);
    for (const ProbeRecord& probe : trace.probes) {
      for (const RecItem& item : probe.personalized.items) set.ids.insert(item.id);
    }
    if (!set.ids.empty()) sets.push_back(std::move(set));
  }
  try {
    const stats::SimilarityReport report = stats::set_similarity(sets);
    auto row = [&](const char* name, const stats::SimilaritySummary& s) {
      out << name << ',' << fmt(s.mean) << ',' << fmt(s.sd) << ',' << s.n_pairs << '\n';
    };
    row("within_group", report.within_group);
    row("across_preference", report.across_preference);
    row("across_condition", report.across_condition);
  } catch (const Error& e) {
    out << "unavailable:" << errc_name(e.code()) << ",,,\n";
  }
}

void write_depth_trends(const TraceStore& store, const std::filesystem::path& plots) {
  for (Preference p : kAllPreferences) {
    SampleFilter filter;
    filter.surface = Surface::Personalized;
    const auto samples = flatten_samples(store, p, filter);
    auto out = open_csv(plots / ("depth_trend_" + std::string(preference_name(p)) + ".csv"));
    out << "depth,condition,percent_diff\n";
    try {
      const DepthTrend trend = depth_trend(samples);
      for (const DepthPoint& point : trend.treatment) {
        out << point.depth << ",treatment," << fmt(point.percent_diff) << '\n';
      }
      for (const DepthPoint& point : trend.control) {
        out << point.depth << ",control," << fmt(point.percent_diff) << '\n';
      }
    } catch (const Error&) {
    }
  }
}

void write_histograms(const TraceStore& store, const std::filesystem::path& plots) {
  constexpr int kBins = 20;
  for (Preference p : kAllPreferences) {
    SampleFilter filter;
    filter.surface = Surface::Personalized;
    filter.condition = Condition::Treatment;
    const auto treatment = utilities_of(flatten_samples(store, p, filter));
    filter.condition = Condition::Control;
    const auto control = utilities_of(flatten_samples(store, p, filter));
    auto out =
        open_csv(plots / ("utility_distribution_" + std::string(preference_name(p)) + ".csv"));
    out << "bin_lo,bin_hi,treatment_count,control_count\n";
    if (treatment.empty() && control.empty()) continue;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : treatment) lo = std::min(lo, v), hi = std::max(hi, v);
    for (double v : control) lo = std::min(lo, v), hi = std::max(hi, v);
    if (hi <= lo) hi = lo + 1.0;
    std::array<std::size_t, kBins> t_counts{};
    std::array<std::size_t, kBins> c_counts{};
    auto bin_of = [&](double v) {
      const int b = static_cast<int>((v - lo) / (hi - lo) * kBins);
      return std::clamp(b, 0, kBins - 1);
    };
    for (double v : treatment) ++t_counts[bin_of(v)];
    for (double v : control) ++c_counts[bin_of(v)];
    for (int b = 0; b < kBins; ++b) {
      const double bin_lo = lo + (hi - lo) * b / kBins;
      const double bin_hi = lo + (hi - lo) * (b + 1) / kBins;
      out << fmt(bin_lo) << ',' << fmt(bin_hi) << ',' << t_counts[b] << ',' << c_counts[b] << '\n';
    }
  }
}

}  // namespace

void write_reports(const TraceStore& store, const std::string& out_dir) {
  const std::filesystem::path dir(out_dir);
  const std::filesystem::path plots = dir / "plots";
  std::error_code ec;
  std::filesystem::create_directories(plots, ec);
  if (ec) fail(Errc::IoError, "cannot create " + plots.string());
  write_h1(store, dir);
  write_h2(store, dir);
  write_h3_moderation(store, dir);
  write_h3_probes(store, dir);
  write_similarity(store, dir);
  write_depth_trends(store, plots);
  write_histograms(store, plots);
}

}  // namespace recaudit
