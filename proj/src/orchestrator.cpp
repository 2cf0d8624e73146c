#include "recaudit/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "recaudit/errors.hpp"
#include "recaudit/rng.hpp"

namespace recaudit {

namespace {

using nlohmann::json;

json probe_to_json(const ProbeSpec& p) {
  return json{{"per_topic", p.per_topic}, {"n_random", p.n_random}};
}

json config_to_json(const ExperimentConfig& c) {
  json prefs = json::array();
  for (Preference p : c.preferences) prefs.push_back(std::string(preference_name(p)));
  json topics = json::array();
  for (Topic t : c.seed_topics) topics.push_back(std::string(topic_name(t)));
  return json{{"preferences", prefs},
              {"seed_topics", topics},
              {"seeds_per_topic", c.seeds_per_topic},
              {"replications", c.replications},
              {"steps", c.steps},
              {"probe_interval", c.probe_interval},
              {"probe", probe_to_json(c.probe)},
              {"corpus_ref", c.corpus_ref},
              {"platform_ref", c.platform_ref},
              {"lexicons_ref", c.lexicons_ref},
              {"master_seed", c.master_seed}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("preferences")) {
    c.preferences.clear();
    for (const auto& p : j.at("preferences")) {
      c.preferences.push_back(parse_preference(p.get<std::string>()));
    }
  }
  if (j.contains("seed_topics")) {
    c.seed_topics.clear();
    for (const auto& t : j.at("seed_topics")) {
      c.seed_topics.push_back(parse_topic(t.get<std::string>()));
    }
  }
  c.seeds_per_topic = j.value("seeds_per_topic", c.seeds_per_topic);
  c.replications = j.value("replications", c.replications);
  c.steps = j.value("steps", c.steps);
  c.probe_interval = j.value("probe_interval", c.probe_interval);
  if (j.contains("probe")) {
    c.probe.per_topic = j.at("probe").value("per_topic", c.probe.per_topic);
    c.probe.n_random = j.at("probe").value("n_random", c.probe.n_random);
  }
  c.corpus_ref = j.value("corpus_ref", c.corpus_ref);
  c.platform_ref = j.value("platform_ref", c.platform_ref);
  c.lexicons_ref = j.value("lexicons_ref", c.lexicons_ref);
  c.master_seed = j.value("master_seed", c.master_seed);
  return c;
}

std::string preference_label(const std::optional<Preference>& p) {
  return p ? std::string(preference_name(*p)) : std::string("control");
}

json utilities_json(const TraceStore& store, const VideoId& id) {
  const UtilityVector* u = store.utilities_of(id);
  if (!u) return nullptr;
  json out = json::object();
  for (Preference p : kAllPreferences) {
    out[std::string(preference_name(p))] = (*u)[static_cast<int>(p)];
  }
  return out;
}

json item_line(const TraceStore& store, const Trace& trace, const char* kind, Surface surface,
               int depth, const json& probe_video, const json& probe_topic, const RecItem& item,
               bool selected) {
  json j{{"kind", kind},
         {"schema_version", kTraceSchemaVersion},
         {"experiment_id", store.experiment_id},
         {"puppet_id", trace.puppet_id},
         {"preference", preference_label(trace.preference)},
         {"condition", std::string(condition_name(trace.condition))},
         {"seed_topic", std::string(topic_name(trace.seed_topic))},
         {"seed_video", trace.seed_video},
         {"depth", depth},
         {"surface", std::string(surface_name(surface))},
         {"probe_video", probe_video},
         {"rank", item.rank},
         {"video_id", item.id},
         {"model_probability", item.probability},
         {"utilities", utilities_json(store, item.id)},
         {"selected", selected}};
  if (!probe_topic.is_null()) j["probe_topic"] = probe_topic;
  return j;
}

std::string trace_block(const TraceStore& store, const Trace& trace) {
  std::string out;
  auto emit = [&out](const json& j) {
    out += j.dump();
    out.push_back('\n');
  };
  for (const StepRecord& step : trace.steps) {
    for (const RecItem& item : step.personalized.items) {
      emit(item_line(store, trace, "step", step.personalized.surface, step.depth, nullptr, nullptr,
                     item, item.id == step.selected));
    }
    for (const RecItem& item : step.contextual.items) {
      emit(item_line(store, trace, "step", Surface::Contextual, step.depth, nullptr, nullptr, item,
                     false));
    }
  }
  for (const ProbeRecord& probe : trace.probes) {
    const json topic = std::string(topic_name(probe.probe_topic));
    for (const RecItem& item : probe.personalized.items) {
      emit(item_line(store, trace, "probe", Surface::Probe, probe.depth, probe.probe_video, topic,
                     item, false));
    }
  }
  emit(json{{"kind", "meta"},
            {"schema_version", kTraceSchemaVersion},
            {"experiment_id", store.experiment_id},
            {"puppet_id", trace.puppet_id},
            {"preference", preference_label(trace.preference)},
            {"condition", std::string(condition_name(trace.condition))},
            {"seed_topic", std::string(topic_name(trace.seed_topic))},
            {"seed_video", trace.seed_video},
            {"rng_seed", trace.rng_seed},
            {"steps_completed", trace.steps.size()},
            {"truncated", trace.truncated},
            {"truncation_reason",
             trace.truncated ? json(trace.truncation_reason) : json(nullptr)}});
  return out;
}

std::string failure_block(const TraceStore& store, const SessionFailure& f) {
  json j{{"kind", "meta"},
         {"schema_version", kTraceSchemaVersion},
         {"experiment_id", store.experiment_id},
         {"puppet_id", f.puppet_id},
         {"failure", f.message}};
  return j.dump() + "\n";
}

std::string header_block(const TraceStore& store) {
  json j{{"kind", "meta"},
         {"schema_version", kTraceSchemaVersion},
         {"experiment_id", store.experiment_id},
         {"puppet_id", nullptr},
         {"config", config_to_json(store.config)}};
  return j.dump() + "\n";
}

// Writes completed session blocks in plan order regardless of completion
// order; flushes after each block so finished sessions survive a kill.
class BlockWriter {
 public:
  BlockWriter(const std::string& path, const std::string& header) {
    if (path.empty()) return;
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) fail(Errc::IoError, "cannot write " + path);
    out_ << header;
    out_.flush();
    active_ = true;
  }

  void submit(std::size_t index, std::string block) {
    if (!active_) return;
    std::lock_guard<std::mutex> lock(mu_);
    pending_.emplace(index, std::move(block));
    while (!pending_.empty() && pending_.begin()->first == next_) {
      out_ << pending_.begin()->second;
      out_.flush();
      pending_.erase(pending_.begin());
      ++next_;
    }
  }

  bool active() const { return active_; }

 private:
  std::ofstream out_;
  std::mutex mu_;
  std::map<std::size_t, std::string> pending_;
  std::size_t next_ = 0;
  bool active_ = false;
};

struct LoadedStep {
  std::vector<RecItem> personalized;
  std::vector<RecItem> contextual;
  VideoId selected;
  bool has_selected = false;
};

struct LoadedProbe {
  VideoId probe_video;
  Topic probe_topic = Topic::Random;
  int depth = 0;
  std::vector<RecItem> items;
};

struct LoadedPuppet {
  std::map<int, LoadedStep> steps;
  std::vector<LoadedProbe> probes;
  std::map<std::pair<int, VideoId>, std::size_t> probe_index;
};

}  // namespace

std::string experiment_config_to_json_text(const ExperimentConfig& config) {
  return config_to_json(config).dump(2) + "\n";
}

ExperimentConfig experiment_config_from_json_text(const std::string& text) {
  try {
    return config_from_json(json::parse(text));
  } catch (const json::exception& e) {
    fail(Errc::ParseError, std::string("experiment config: ") + e.what());
  }
}

void validate_config(const ExperimentConfig& config) {
  if (config.preferences.empty()) fail(Errc::InvalidConfig, "preference list is empty");
  std::set<Preference> prefs(config.preferences.begin(), config.preferences.end());
  if (prefs.size() != config.preferences.size()) {
    fail(Errc::InvalidConfig, "duplicate preference in config");
  }
  if (config.seed_topics.empty()) fail(Errc::InvalidConfig, "seed topic list is empty");
  std::set<Topic> topics(config.seed_topics.begin(), config.seed_topics.end());
  if (topics.size() != config.seed_topics.size()) {
    fail(Errc::InvalidConfig, "duplicate seed topic in config");
  }
  if (config.seeds_per_topic < 1) fail(Errc::InvalidConfig, "seeds_per_topic must be >= 1");
  if (config.replications < 1) fail(Errc::InvalidConfig, "replications must be >= 1");
  if (config.steps < 1) fail(Errc::InvalidConfig, "steps must be >= 1");
  if (config.probe.per_topic < 0 || config.probe.n_random < 0) {
    fail(Errc::InvalidConfig, "probe counts must be >= 0");
  }
  const bool probes_enabled = config.probe.per_topic > 0 || config.probe.n_random > 0;
  if (probes_enabled && config.probe_interval < 1) {
    fail(Errc::InvalidConfig, "probe_interval must be >= 1 when probes are enabled");
  }
}

std::string experiment_id_for(const ExperimentConfig& config) {
  const std::uint64_t h = mix64(hash_str64(config_to_json(config).dump()));
  char buf[32];
  std::snprintf(buf, sizeof buf, "exp-%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<Batch> plan_experiment(const ExperimentConfig& config, const Corpus& corpus) {
  validate_config(config);
  std::vector<Batch> batches;
  batches.reserve(config.seed_topics.size() * config.seeds_per_topic * config.replications);
  for (Topic topic : config.seed_topics) {
    const auto seeds = sample_seed_videos(
        corpus, topic, config.seeds_per_topic,
        derive_seed(config.master_seed, {hash_str64("seeds"), static_cast<std::uint64_t>(topic)}));
    for (int si = 0; si < config.seeds_per_topic; ++si) {
      for (int rep = 0; rep < config.replications; ++rep) {
        Batch batch;
        batch.topic = topic;
        batch.seed_index = si;
        batch.replication = rep;
        batch.seed_video = seeds[si];
        const int n_prefs = static_cast<int>(config.preferences.size());
        for (int pi = 0; pi <= n_prefs; ++pi) {
          PuppetPlan plan;
          const bool control = pi == n_prefs;
          plan.preference =
              control ? std::nullopt : std::optional<Preference>(config.preferences[pi]);
          plan.condition = control ? Condition::Control : Condition::Treatment;
          char buf[96];
          std::snprintf(buf, sizeof buf, "%s-s%02d-r%d-%s",
                        std::string(topic_name(topic)).c_str(), si, rep,
                        preference_label(plan.preference).c_str());
          plan.id = buf;
          plan.rng_seed = derive_seed(
              config.master_seed,
              {static_cast<std::uint64_t>(topic), static_cast<std::uint64_t>(si),
               static_cast<std::uint64_t>(rep), static_cast<std::uint64_t>(pi)});
          batch.puppets.push_back(std::move(plan));
        }
        batches.push_back(std::move(batch));
      }
    }
  }
  return batches;
}

TraceStore run_experiment(const ExperimentConfig& config, const Corpus& corpus,
                          const PlatformModel& platform, const LexiconSet& lexicons,
                          const RunOptions& options) {
  const std::vector<Batch> batches = plan_experiment(config, corpus);

  SessionConfig session;
  session.steps = config.steps;
  session.probe_interval = config.probe_interval;
  if (config.probe.per_topic > 0 || config.probe.n_random > 0) {
    session.probe_set =
        build_probe_set(corpus, config.probe.per_topic, config.probe.n_random,
                        derive_seed(config.master_seed, {hash_str64("probes")}));
  }

  const UtilityScorer scorer(lexicons);
  const UtilityTable table = build_utility_table(corpus, scorer);

  TraceStore store;
  store.experiment_id = experiment_id_for(config);
  store.config = config;
  store.utilities = table.scores;

  struct SessionSlot {
    const Batch* batch = nullptr;
    const PuppetPlan* plan = nullptr;
  };
  std::vector<SessionSlot> slots;
  for (const Batch& batch : batches) {
    for (const PuppetPlan& plan : batch.puppets) slots.push_back({&batch, &plan});
  }

  BlockWriter writer(options.trace_path, header_block(store));

  struct SessionResult {
    std::optional<Trace> trace;
    std::optional<SessionFailure> failure;
  };
  std::vector<SessionResult> results(slots.size());

  std::atomic<std::size_t> cursor{0};
  auto work = [&]() {
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= slots.size()) break;
      const SessionSlot& slot = slots[i];
      SockPuppet puppet;
      puppet.id = slot.plan->id;
      puppet.preference = slot.plan->preference;
      puppet.condition = slot.plan->condition;
      puppet.seed_video = slot.batch->seed_video;
      puppet.seed_topic = slot.batch->topic;
      puppet.rng_seed = slot.plan->rng_seed;
      try {
        Trace trace = run_session(puppet, platform, table, corpus, session);
        writer.submit(i, trace_block(store, trace));
        results[i].trace = std::move(trace);
      } catch (const std::exception& e) {
        SessionFailure f{puppet.id, e.what()};
        writer.submit(i, failure_block(store, f));
        results[i].failure = std::move(f);
      }
    }
  };

  const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(slots.size())));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  for (SessionResult& r : results) {
    if (r.trace) store.traces.push_back(std::move(*r.trace));
    if (r.failure) store.failures.push_back(std::move(*r.failure));
  }
  return store;
}

std::string store_to_string(const TraceStore& store) {
  std::string out = header_block(store);
  for (const Trace& trace : store.traces) out += trace_block(store, trace);
  for (const SessionFailure& f : store.failures) out += failure_block(store, f);
  return out;
}

void persist_store(const TraceStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write " + path);
  out << store_to_string(store);
  if (!out) fail(Errc::IoError, "write failed for " + path);
}

TraceStore load_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path);

  TraceStore store;
  bool have_header = false;
  std::map<std::string, LoadedPuppet> partial;
  std::vector<std::string> puppet_order;
  std::set<std::string> completed;

  std::string line;
  std::uint64_t lineno = 0;
  bool eof_tolerated = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      // A torn final line is the in-flight casualty of a killed run.
      if (in.peek() == std::char_traits<char>::eof()) {
        eof_tolerated = true;
        break;
      }
      fail(Errc::ParseError, "trace line " + std::to_string(lineno) + " is not valid JSON");
    }
    if (!j.contains("schema_version")) {
      fail(Errc::SchemaMismatch, "trace line " + std::to_string(lineno) + " lacks schema_version");
    }
    if (j.at("schema_version").get<std::uint32_t>() != kTraceSchemaVersion) {
      fail(Errc::SchemaMismatch, "unsupported trace schema version");
    }
    const std::string kind = j.value("kind", "");
    if (kind == "meta") {
      if (j.at("puppet_id").is_null()) {
        if (!have_header) {
          store.experiment_id = j.at("experiment_id").get<std::string>();
          store.config = config_from_json(j.at("config"));
          have_header = true;
        }
        continue;
      }
      const std::string puppet_id = j.at("puppet_id").get<std::string>();
      if (j.contains("failure")) {
        store.failures.push_back({puppet_id, j.at("failure").get<std::string>()});
        continue;
      }
      if (completed.count(puppet_id)) {  // concatenated duplicates: keep first
        partial.erase(puppet_id);
        continue;
      }
      Trace trace;
      trace.puppet_id = puppet_id;
      const std::string pref = j.at("preference").get<std::string>();
      if (pref != "control") trace.preference = parse_preference(pref);
      trace.condition = parse_condition(j.at("condition").get<std::string>());
      trace.seed_topic = parse_topic(j.at("seed_topic").get<std::string>());
      trace.seed_video = j.at("seed_video").get<std::string>();
      trace.rng_seed = j.at("rng_seed").get<std::uint64_t>();
      trace.truncated = j.at("truncated").get<bool>();
      if (!j.at("truncation_reason").is_null()) {
        trace.truncation_reason = j.at("truncation_reason").get<std::string>();
      }
      LoadedPuppet& lp = partial[puppet_id];
      VideoId watched = trace.seed_video;
      for (auto& [depth, step] : lp.steps) {
        StepRecord record;
        record.depth = depth;
        record.watched = watched;
        if (!step.has_selected) {
          fail(Errc::ParseError, "puppet " + puppet_id + " depth " + std::to_string(depth) +
                                     " has no selected item");
        }
        record.selected = step.selected;
        record.personalized.source_video = watched;
        record.personalized.surface = Surface::Personalized;
        record.personalized.items = std::move(step.personalized);
        record.contextual.source_video = watched;
        record.contextual.surface = Surface::Contextual;
        record.contextual.items = std::move(step.contextual);
        int eligible = 0;
        for (const RecItem& item : record.personalized.items) {
          if (store.utilities.count(item.id)) ++eligible;
        }
        record.eligible_count = eligible;
        watched = record.selected;
        trace.steps.push_back(std::move(record));
      }
      if (trace.steps.size() != j.at("steps_completed").get<std::size_t>()) {
        fail(Errc::ParseError, "puppet " + puppet_id + " step count mismatch");
      }
      for (LoadedProbe& probe : lp.probes) {
        ProbeRecord record;
        record.depth = probe.depth;
        record.probe_video = probe.probe_video;
        record.probe_topic = probe.probe_topic;
        record.personalized.source_video = probe.probe_video;
        record.personalized.surface = Surface::Personalized;
        record.personalized.items = std::move(probe.items);
        trace.probes.push_back(std::move(record));
      }
      partial.erase(puppet_id);
      completed.insert(puppet_id);
      puppet_order.push_back(puppet_id);
      store.traces.push_back(std::move(trace));
      continue;
    }
    if (kind != "step" && kind != "probe") {
      fail(Errc::ParseError, "trace line " + std::to_string(lineno) + ": unknown kind");
    }
    const std::string puppet_id = j.at("puppet_id").get<std::string>();
    if (completed.count(puppet_id)) continue;  // duplicate block from concatenation
    LoadedPuppet& lp = partial[puppet_id];
    RecItem item;
    item.rank = j.at("rank").get<int>();
    item.id = j.at("video_id").get<std::string>();
    item.probability = j.at("model_probability").get<double>();
    const auto& utilities = j.at("utilities");
    if (!utilities.is_null() && !store.utilities.count(item.id)) {
      UtilityVector u{};
      for (const auto& [key, value] : utilities.items()) {
        u[static_cast<int>(parse_preference(key))] = value.get<double>();
      }
      store.utilities.emplace(item.id, u);
    }
    const int depth = j.at("depth").get<int>();
    if (kind == "probe") {
      const VideoId probe_video = j.at("probe_video").get<std::string>();
      const auto key = std::make_pair(depth, probe_video);
      auto it = lp.probe_index.find(key);
      if (it == lp.probe_index.end()) {
        it = lp.probe_index.emplace(key, lp.probes.size()).first;
        LoadedProbe probe;
        probe.depth = depth;
        probe.probe_video = probe_video;
        probe.probe_topic = parse_topic(j.at("probe_topic").get<std::string>());
        lp.probes.push_back(std::move(probe));
      }
      lp.probes[it->second].items.push_back(std::move(item));
      continue;
    }
    const Surface surface = parse_surface(j.at("surface").get<std::string>());
    LoadedStep& step = lp.steps[depth];
    if (surface == Surface::Personalized) {
      if (j.at("selected").get<bool>()) {
        step.selected = item.id;
        step.has_selected = true;
      }
      step.personalized.push_back(std::move(item));
    } else {
      step.contextual.push_back(std::move(item));
    }
  }

  if (!have_header) fail(Errc::SchemaMismatch, "trace file has no experiment header");
  (void)eof_tolerated;
  return store;
}

}  // namespace recaudit
