#include "recaudit/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"
#include "recaudit/analysis.hpp"
#include "recaudit/errors.hpp"
#include "recaudit/rng.hpp"

namespace recaudit {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

bool log_enabled() {
  const char* v = std::getenv("RECAUDIT_LOG");
  if (!v) return true;
  const std::string s(v);
  return !(s == "0" || s == "off" || s == "quiet" || s == "none");
}

void log_line(const std::string& msg) {
  if (log_enabled()) std::fprintf(stderr, "[recaudit] %s\n", msg.c_str());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write " + path);
  out << content;
  if (!out) fail(Errc::IoError, "write failed for " + path);
}

json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(Errc::ParseError, origin + ": " + e.what());
  }
}

CorpusSpec corpus_spec_from_json(const json& j, std::optional<std::uint64_t>* explicit_seed) {
  CorpusSpec spec;
  spec.n_videos = j.value("n_videos", 0);
  if (j.contains("topic_mix")) {
    for (const auto& [key, value] : j.at("topic_mix").items()) {
      spec.topic_mix[parse_topic(key)] = value.get<double>();
    }
  } else {
    for (Topic t : kAllTopics) spec.topic_mix[t] = 1.0 / kTopicCount;
  }
  spec.transcript_rate = j.value("transcript_rate", spec.transcript_rate);
  spec.emotion_sparsity = j.value("emotion_sparsity", spec.emotion_sparsity);
  if (explicit_seed) *explicit_seed = std::nullopt;
  if (j.contains("rng_seed")) {
    spec.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    if (explicit_seed) *explicit_seed = spec.rng_seed;
  }
  return spec;
}

template <typename Fn>
int run_cmd(const char* name, Fn&& fn) {
  try {
    fn();
    return kExitOk;
  } catch (const Error& e) {
    std::fprintf(stderr, "recaudit %s: error: %s [%s]\n", name, e.what(), errc_name(e.code()));
    return kExitFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "recaudit %s: error: %s\n", name, e.what());
    return kExitFailure;
  }
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

json guarded_json(const std::function<json()>& fn) {
  try {
    return fn();
  } catch (const Error&) {
    return nullptr;
  }
}

json analysis_summary(const TraceStore& store) {
  json prefs = json::object();
  for (Preference p : kAllPreferences) {
    SampleFilter filter;
    filter.surface = Surface::Personalized;
    filter.condition = Condition::Treatment;
    const auto treatment = flatten_samples(store, p, filter);
    filter.condition = Condition::Control;
    const auto control = flatten_samples(store, p, filter);

    json entry;
    entry["n_treatment_samples"] = treatment.size();
    entry["n_control_samples"] = control.size();
    entry["prevalence_treatment"] = guarded_json([&] { return json(prevalence(treatment)); });
    entry["prevalence_control"] = guarded_json([&] { return json(prevalence(control)); });
    entry["prominence_treatment"] = guarded_json([&] {
      const auto r = prominence(treatment);
      return json{{"rho", r.rho}, {"p_value", r.p_value}, {"n", r.n}};
    });
    entry["prominence_control"] = guarded_json([&] {
      const auto r = prominence(control);
      return json{{"rho", r.rho}, {"p_value", r.p_value}, {"n", r.n}};
    });
    entry["personalized_vs_contextual"] = guarded_json([&] {
      SampleFilter f;
      f.condition = Condition::Treatment;
      f.surface = Surface::Personalized;
      const auto pers = utilities_of(flatten_samples(store, p, f));
      f.surface = Surface::Contextual;
      const auto ctx = utilities_of(flatten_samples(store, p, f));
      const auto ks = stats::ks_test(pers, ctx);
      return json{{"ks_d", ks.d},
                  {"ks_p", ks.p_value},
                  {"cohens_d", stats::cohens_d(pers, ctx)},
                  {"mean_personalized", stats::mean(pers)},
                  {"mean_contextual", stats::mean(ctx)}};
    });
    json probes = json::object();
    for (const auto& [topic, row] : probe_persistence(store, p)) {
      probes[std::string(topic_name(topic))] = json{{"percent_diff", row.percent_diff},
                                                    {"cohens_d", row.cohens_d},
                                                    {"slope_treatment", row.slope_treatment},
                                                    {"slope_control", row.slope_control},
                                                    {"n_treatment", row.n_treatment},
                                                    {"n_control", row.n_control}};
    }
    entry["probe_persistence"] = probes;
    prefs[std::string(preference_name(p))] = entry;
  }
  return json{{"experiment_id", store.experiment_id},
              {"n_traces", store.traces.size()},
              {"n_failures", store.failures.size()},
              {"preferences", prefs}};
}

json hash_entry(const std::string& path) { return "fnv1a:" + hex64(fnv1a_file(path)); }

void write_manifest(const std::string& path, const TraceStore& store,
                    const std::vector<std::pair<std::string, std::string>>& artifacts) {
  json files = json::object();
  for (const auto& [label, file] : artifacts) files[label] = hash_entry(file);
  const json manifest{{"tool_version", kToolVersion},
                      {"experiment_id", store.experiment_id},
                      {"master_seed", store.config.master_seed},
                      {"n_traces", store.traces.size()},
                      {"n_failures", store.failures.size()},
                      {"artifacts", files}};
  write_file(path, manifest.dump(2) + "\n");
}

}  // namespace

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  std::uint64_t h = 14695981039346656037ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!in) break;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

int cmd_corpus_gen(const std::string& spec_path, const std::string& lexicons_override,
                   const std::string& out_path, std::optional<std::uint64_t> seed_override) {
  return run_cmd("corpus gen", [&] {
    const json j = parse_json(read_file(spec_path), spec_path);
    CorpusSpec spec = corpus_spec_from_json(j, nullptr);
    if (seed_override) spec.rng_seed = *seed_override;
    std::string lexicons_path = lexicons_override;
    if (lexicons_path.empty()) lexicons_path = j.value("lexicons", "");
    if (lexicons_path.empty()) {
      fail(Errc::InvalidConfig, "no lexicons path (spec key \"lexicons\" or --lexicons)");
    }
    const LexiconSet lexicons = LexiconSet::load(lexicons_path);
    const auto start = std::chrono::steady_clock::now();
    const Corpus corpus = generate_corpus(spec, lexicons);
    save_corpus(corpus, out_path);
    char msg[160];
    std::snprintf(msg, sizeof msg, "generated %zu videos (seed %llu) in %.2fs -> %s",
                  corpus.videos.size(), static_cast<unsigned long long>(spec.rng_seed),
                  elapsed_s(start), out_path.c_str());
    log_line(msg);
  });
}

int cmd_platform_build(const std::string& corpus_path, const std::string& config_path,
                       const std::string& out_path, std::optional<std::uint64_t> seed_override) {
  return run_cmd("platform build", [&] {
    const Corpus corpus = load_corpus(corpus_path);
    PlatformConfig config;
    if (!config_path.empty()) {
      config = platform_config_from_json_text(read_file(config_path));
    }
    const std::uint64_t seed = seed_override.value_or(0);
    const auto start = std::chrono::steady_clock::now();
    const PlatformModel model = build_platform(corpus, config, seed);
    model.save(out_path);
    char msg[160];
    std::snprintf(msg, sizeof msg, "built %s platform over %zu videos (dim %d) in %.2fs -> %s",
                  std::string(platform_mode_name(config.mode)).c_str(), model.size(), model.dim(),
                  elapsed_s(start), out_path.c_str());
    log_line(msg);
  });
}

int cmd_platform_perturb(const std::string& in_path, const std::string& out_path, double sigma,
                         std::uint64_t seed) {
  return run_cmd("platform perturb", [&] {
    const PlatformModel model = PlatformModel::load(in_path);
    const PlatformModel shifted = perturb_embeddings(model, sigma, seed);
    shifted.save(out_path);
    char msg[160];
    std::snprintf(msg, sizeof msg, "perturbed embeddings (sigma %.4g, seed %llu) -> %s", sigma,
                  static_cast<unsigned long long>(seed), out_path.c_str());
    log_line(msg);
  });
}

int cmd_score(const std::string& lexicons_path, const std::string& corpus_path,
              const std::string& out_path) {
  return run_cmd("score", [&] {
    const LexiconSet lexicons = LexiconSet::load(lexicons_path);
    const Corpus corpus = load_corpus(corpus_path);
    const UtilityScorer scorer(lexicons);
    std::ostringstream out;
    out << "video_id,topic";
    for (Preference p : kAllPreferences) out << ',' << preference_name(p);
    out << '\n';
    std::size_t scored = 0;
    for (const Video& video : corpus.videos) {
      out << video.id << ',' << topic_name(video.topic);
      if (video.transcript) {
        const UtilityVector u = scorer.utility_vector(video);
        for (Preference p : kAllPreferences) {
          char buf[40];
          std::snprintf(buf, sizeof buf, "%.10g", u[static_cast<int>(p)]);
          out << ',' << buf;
        }
        ++scored;
      } else {
        for (int i = 0; i < kPreferenceCount; ++i) out << ',';
      }
      out << '\n';
    }
    write_file(out_path, out.str());
    char msg[160];
    std::snprintf(msg, sizeof msg, "scored %zu/%zu videos -> %s", scored, corpus.videos.size(),
                  out_path.c_str());
    log_line(msg);
  });
}

int cmd_run(const std::string& config_path, const std::string& corpus_path,
            const std::string& platform_path, const std::string& lexicons_path,
            const std::string& out_dir, int workers, std::optional<std::uint64_t> seed_override) {
  return run_cmd("run", [&] {
    ExperimentConfig config = experiment_config_from_json_text(read_file(config_path));
    if (seed_override) config.master_seed = *seed_override;
    if (!corpus_path.empty()) config.corpus_ref = corpus_path;
    if (!platform_path.empty()) config.platform_ref = platform_path;
    if (!lexicons_path.empty()) config.lexicons_ref = lexicons_path;
    if (config.corpus_ref.empty()) fail(Errc::InvalidConfig, "no corpus path");
    if (config.platform_ref.empty()) fail(Errc::InvalidConfig, "no platform path");
    if (config.lexicons_ref.empty()) fail(Errc::InvalidConfig, "no lexicons path");

    const Corpus corpus = load_corpus(config.corpus_ref);
    const PlatformModel platform = PlatformModel::load(config.platform_ref);
    const LexiconSet lexicons = LexiconSet::load(config.lexicons_ref);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) fail(Errc::IoError, "cannot create " + out_dir);

    RunOptions options;
    options.workers = workers;
    options.trace_path = (fs::path(out_dir) / "traces.jsonl").string();

    const auto start = std::chrono::steady_clock::now();
    const TraceStore store = run_experiment(config, corpus, platform, lexicons, options);
    write_manifest((fs::path(out_dir) / "manifest.json").string(), store,
                   {{"traces.jsonl", options.trace_path}});
    char msg[200];
    std::snprintf(msg, sizeof msg, "%s: %zu sessions (%zu failed) in %.2fs -> %s",
                  store.experiment_id.c_str(), store.traces.size(), store.failures.size(),
                  elapsed_s(start), out_dir.c_str());
    log_line(msg);
  });
}

int cmd_analyze(const std::string& traces_path, const std::string& out_path) {
  return run_cmd("analyze", [&] {
    const TraceStore store = load_store(traces_path);
    const std::string text = analysis_summary(store).dump(2) + "\n";
    if (out_path.empty() || out_path == "-") {
      std::fputs(text.c_str(), stdout);
    } else {
      write_file(out_path, text);
      log_line("analysis summary -> " + out_path);
    }
  });
}

int cmd_report(const std::string& traces_path, const std::string& out_dir) {
  return run_cmd("report", [&] {
    const TraceStore store = load_store(traces_path);
    write_reports(store, out_dir);
    log_line("reports for " + store.experiment_id + " -> " + out_dir);
  });
}

stats::SimilarityReport validate_backends(const PlatformModel& a, const PlatformModel& b,
                                          const Corpus& corpus, const LexiconSet& lexicons,
                                          const std::vector<Preference>& personas,
                                          std::uint64_t seed, int steps, int repetitions,
                                          int held_out) {
  if (personas.empty()) fail(Errc::InvalidConfig, "no personas given");
  if (repetitions < 2) fail(Errc::InvalidConfig, "need at least 2 repetitions");
  if (steps < 1 || held_out < 1) fail(Errc::InvalidConfig, "steps and held_out must be >= 1");

  const UtilityScorer scorer(lexicons);
  const UtilityTable table = build_utility_table(corpus, scorer);
  const auto seeds = sample_seed_videos(corpus, Topic::Random, repetitions,
                                        derive_seed(seed, {hash_str64("validate-seeds")}));
  const auto queries = sample_seed_videos(corpus, Topic::Random, held_out,
                                          derive_seed(seed, {hash_str64("validate-queries")}));

  const PlatformModel* backends[2] = {&a, &b};
  const char* backend_labels[2] = {"backend_a", "backend_b"};

  std::vector<stats::LabeledSet> sets;
  for (std::size_t pi = 0; pi < personas.size(); ++pi) {
    for (int r = 0; r < repetitions; ++r) {
      for (int m = 0; m < 2; ++m) {
        SockPuppet puppet;
        puppet.id = std::string(preference_name(personas[pi])) + "-" + backend_labels[m] + "-r" +
                    std::to_string(r);
        puppet.preference = personas[pi];
        puppet.condition = Condition::Treatment;
        puppet.seed_video = seeds[r];
        puppet.seed_topic = corpus.at(seeds[r]).topic;
        // Same per-(persona, repetition) seed on both backends so set overlap
        // measures the backends, not the dice.
        puppet.rng_seed = derive_seed(seed, {pi, static_cast<std::uint64_t>(r)});

        SessionConfig session;
        session.steps = steps;
        const Trace trace = run_session(puppet, *backends[m], table, corpus, session);

        UserState state;
        state.history.push_back(puppet.seed_video);
        for (const StepRecord& step : trace.steps) state.history.push_back(step.selected);

        stats::LabeledSet set;
        set.preference = std::string(preference_name(personas[pi]));
        set.condition = backend_labels[m];
        set.replicate = r;
        for (const VideoId& q : queries) {
          const RecommendationList recs = backends[m]->recommend(q, &state);
          for (const RecItem& item : recs.items) set.ids.insert(item.id);
        }
        sets.push_back(std::move(set));
      }
    }
  }
  return stats::set_similarity(sets);
}

int cmd_validate(const std::string& platform_a_path, const std::string& platform_b_path,
                 const std::string& corpus_path, const std::string& lexicons_path,
                 const std::vector<std::string>& personas, const std::string& out_path,
                 std::uint64_t seed) {
  return run_cmd("validate", [&] {
    const PlatformModel a = PlatformModel::load(platform_a_path);
    const PlatformModel b = PlatformModel::load(platform_b_path);
    const Corpus corpus = load_corpus(corpus_path);
    const LexiconSet lexicons = LexiconSet::load(lexicons_path);

    std::vector<Preference> prefs;
    if (personas.empty()) {
      prefs = {Preference::Anger, Preference::Positive};
    } else {
      for (const std::string& name : personas) prefs.push_back(parse_preference(name));
    }

    const stats::SimilarityReport report =
        validate_backends(a, b, corpus, lexicons, prefs, seed);

    std::ostringstream out;
    out << "pair_class,mean_jaccard,sd,n_pairs\n";
    auto row = [&out](const char* name, const stats::SimilaritySummary& s) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%zu\n", name, s.mean, s.sd, s.n_pairs);
      out << buf;
    };
    row("within_group", report.within_group);
    row("across_preference", report.across_preference);
    row("across_condition", report.across_condition);
    if (out_path.empty() || out_path == "-") {
      std::fputs(out.str().c_str(), stdout);
    } else {
      write_file(out_path, out.str());
      log_line("backend agreement -> " + out_path);
    }
  });
}

int cmd_run_all(const std::string& config_path, const std::string& out_dir, int workers,
                std::optional<std::uint64_t> seed_override) {
  return run_cmd("run-all", [&] {
    const json j = parse_json(read_file(config_path), config_path);
    if (!j.contains("lexicons")) fail(Errc::InvalidConfig, "run-all config needs \"lexicons\"");
    if (!j.contains("corpus")) fail(Errc::InvalidConfig, "run-all config needs \"corpus\"");

    ExperimentConfig config;
    if (j.contains("experiment")) {
      config = experiment_config_from_json_text(j.at("experiment").dump());
    }
    if (seed_override) config.master_seed = *seed_override;
    const std::uint64_t master = config.master_seed;

    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "reports", ec);
    if (ec) fail(Errc::IoError, "cannot create " + out_dir);

    const LexiconSet lexicons = LexiconSet::load(j.at("lexicons").get<std::string>());

    std::optional<std::uint64_t> corpus_seed;
    CorpusSpec spec = corpus_spec_from_json(j.at("corpus"), &corpus_seed);
    if (!corpus_seed) spec.rng_seed = derive_seed(master, {hash_str64("corpus")});
    const auto start = std::chrono::steady_clock::now();
    const Corpus corpus = generate_corpus(spec, lexicons);
    const std::string corpus_path = (fs::path(out_dir) / "corpus.jsonl").string();
    save_corpus(corpus, corpus_path);
    log_line("corpus: " + std::to_string(corpus.videos.size()) + " videos");

    PlatformConfig pconfig;
    if (j.contains("platform")) {
      pconfig = platform_config_from_json_text(j.at("platform").dump());
    }
    const PlatformModel platform =
        build_platform(corpus, pconfig, derive_seed(master, {hash_str64("platform")}));
    const std::string platform_path = (fs::path(out_dir) / "platform.jsonl").string();
    platform.save(platform_path);
    log_line("platform: " + std::string(platform_mode_name(pconfig.mode)) + ", dim " +
             std::to_string(platform.dim()));

    // Record refs relative to the output directory: the artifacts live next to
    // traces.jsonl, and embedding absolute paths would make otherwise identical
    // runs differ byte-for-byte across output directories.
    config.corpus_ref = "corpus.jsonl";
    config.platform_ref = "platform.jsonl";
    config.lexicons_ref = j.at("lexicons").get<std::string>();

    RunOptions options;
    options.workers = workers;
    options.trace_path = (fs::path(out_dir) / "traces.jsonl").string();
    const TraceStore store = run_experiment(config, corpus, platform, lexicons, options);
    log_line("sessions: " + std::to_string(store.traces.size()) + " ok, " +
             std::to_string(store.failures.size()) + " failed");

    const std::string reports_dir = (fs::path(out_dir) / "reports").string();
    write_reports(store, reports_dir);

    std::vector<std::pair<std::string, std::string>> artifacts{
        {"corpus.jsonl", corpus_path},
        {"platform.jsonl", platform_path},
        {"traces.jsonl", options.trace_path},
    };
    for (const char* name :
         {"h1_prevalence_prominence.csv", "h2_contextual_vs_personalized.csv", "h3_moderation.csv",
          "h3_probe_persistence.csv", "similarity_validation.csv"}) {
      artifacts.emplace_back(std::string("reports/") + name,
                             (fs::path(reports_dir) / name).string());
    }
    write_manifest((fs::path(out_dir) / "manifest.json").string(), store, artifacts);

    char msg[160];
    std::snprintf(msg, sizeof msg, "%s complete in %.2fs -> %s", store.experiment_id.c_str(),
                  elapsed_s(start), out_dir.c_str());
    log_line(msg);
  });
}

}  // namespace recaudit
