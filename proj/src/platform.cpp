#include "recaudit/platform.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "recaudit/errors.hpp"
#include "recaudit/rng.hpp"

namespace recaudit {

namespace {

using nlohmann::json;

double dot(const double* a, const double* b, int dim) {
  double acc = 0.0;
  for (int i = 0; i < dim; ++i) acc += a[i] * b[i];
  return acc;
}

double norm(const double* a, int dim) { return std::sqrt(dot(a, a, dim)); }

void normalize_rows(std::vector<double>& rows, std::size_t n, int dim) {
  for (std::size_t i = 0; i < n; ++i) {
    double* r = rows.data() + i * dim;
    const double len = norm(r, dim);
    if (len > 1e-12) {
      for (int d = 0; d < dim; ++d) r[d] /= len;
    }
  }
}

json config_to_json(const PlatformConfig& c) {
  return json{{"mode", std::string(platform_mode_name(c.mode))},
              {"alpha_user", c.alpha_user},
              {"diversity_penalty", c.diversity_penalty},
              {"diversity_window", c.diversity_window},
              {"top_k", c.top_k},
              {"noise_sigma", c.noise_sigma},
              {"topic_weight", c.topic_weight},
              {"emotion_weight", c.emotion_weight},
              {"dim", c.dim},
              {"population_users", c.population_users},
              {"session_length", c.session_length},
              {"slate_size", c.slate_size},
              {"population_gamma", c.population_gamma},
              {"topic_affinity", c.topic_affinity},
              {"epochs", c.epochs},
              {"learning_rate", c.learning_rate},
              {"negatives", c.negatives}};
}

PlatformConfig config_from_json(const json& j) {
  PlatformConfig c;
  if (j.contains("mode")) c.mode = parse_platform_mode(j.at("mode").get<std::string>());
  c.alpha_user = j.value("alpha_user", c.alpha_user);
  c.diversity_penalty = j.value("diversity_penalty", c.diversity_penalty);
  c.diversity_window = j.value("diversity_window", c.diversity_window);
  c.top_k = j.value("top_k", c.top_k);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.topic_weight = j.value("topic_weight", c.topic_weight);
  c.emotion_weight = j.value("emotion_weight", c.emotion_weight);
  c.dim = j.value("dim", c.dim);
  c.population_users = j.value("population_users", c.population_users);
  c.session_length = j.value("session_length", c.session_length);
  c.slate_size = j.value("slate_size", c.slate_size);
  c.population_gamma = j.value("population_gamma", c.population_gamma);
  c.topic_affinity = j.value("topic_affinity", c.topic_affinity);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.negatives = j.value("negatives", c.negatives);
  if (c.alpha_user < 0.0 || c.alpha_user > 1.0) fail(Errc::InvalidConfig, "alpha_user outside [0,1]");
  if (c.top_k < 1) fail(Errc::InvalidConfig, "top_k must be >= 1");
  if (c.diversity_penalty < 0.0) fail(Errc::InvalidConfig, "diversity_penalty must be >= 0");
  return c;
}

std::vector<double> direct_embeddings(const Corpus& corpus, const PlatformConfig& config,
                                      Rng& rng, int dim) {
  std::vector<double> embed(corpus.videos.size() * dim, 0.0);
  for (std::size_t i = 0; i < corpus.videos.size(); ++i) {
    const Video& v = corpus.videos[i];
    double* row = embed.data() + i * dim;
    row[static_cast<int>(v.topic)] = config.topic_weight;
    for (int p = 0; p < kPreferenceCount; ++p) {
      row[kTopicCount + p] = config.emotion_weight * v.emotion_profile[p];
    }
    if (config.noise_sigma > 0.0) {
      for (int d = 0; d < dim; ++d) row[d] += rng.normal(0.0, config.noise_sigma);
    }
  }
  return embed;
}

// Synthetic viewers pick from random slates with probability proportional to
// exp(gamma * alignment); consecutive picks become co-watch pairs that a
// sampled-softmax SGD fits.
std::vector<double> trained_embeddings(const Corpus& corpus, const PlatformConfig& config,
                                       Rng& rng, int dim) {
  const std::size_t n = corpus.videos.size();
  if (config.population_users < 1 || config.session_length < 2 || config.slate_size < 2 ||
      config.epochs < 1 || config.negatives < 1) {
    fail(Errc::InvalidConfig, "trained-mode parameters must be positive");
  }

  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(config.population_users) * config.session_length * 2);
  for (int u = 0; u < config.population_users; ++u) {
    const Topic topic = static_cast<Topic>(rng.uniform_index(kTopicCount));
    EmotionProfile want{};
    const int k = 1 + static_cast<int>(rng.uniform_index(2));
    std::array<int, 6> prefs{0, 1, 2, 3, 4, 5};
    double total = 0.0;
    for (int j = 0; j < k; ++j) {
      std::swap(prefs[j], prefs[j + rng.uniform_index(6 - j)]);
      want[prefs[j]] = rng.uniform(0.5, 1.0);
      total += want[prefs[j]];
    }
    for (double& w : want) w /= total;

    int prev = -1;
    for (int s = 0; s < config.session_length; ++s) {
      std::vector<int> slate(config.slate_size);
      for (int& idx : slate) idx = static_cast<int>(rng.uniform_index(n));
      std::vector<double> logits(slate.size());
      for (std::size_t c = 0; c < slate.size(); ++c) {
        const Video& v = corpus.videos[slate[c]];
        double align = 0.0;
        for (int p = 0; p < 6; ++p) align += want[p] * v.emotion_profile[p];
        if (v.topic == topic) align += config.topic_affinity;
        logits[c] = config.population_gamma * align;
      }
      const std::vector<double> probs = softmax(logits);
      const double u01 = rng.uniform();
      double acc = 0.0;
      int pick = slate.back();
      for (std::size_t c = 0; c < slate.size(); ++c) {
        acc += probs[c];
        if (u01 < acc) {
          pick = slate[c];
          break;
        }
      }
      if (prev >= 0 && prev != pick) {
        pairs.emplace_back(prev, pick);
        pairs.emplace_back(pick, prev);
      }
      prev = pick;
    }
  }
  if (pairs.empty()) fail(Errc::InvalidConfig, "population produced no co-watch pairs");

  std::vector<double> in(n * dim), out(n * dim);
  const double init = 0.5 / dim;
  for (double& v : in) v = rng.uniform(-init, init);
  for (double& v : out) v = rng.uniform(-init, init);

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t total_updates = pairs.size() * static_cast<std::size_t>(config.epochs);
  std::size_t done = 0;
  std::vector<int> cand(config.negatives + 1);
  std::vector<double> logits(config.negatives + 1);
  std::vector<double> grad_in(dim);
  for (int e = 0; e < config.epochs; ++e) {
    rng.shuffle(order);
    for (std::size_t oi = 0; oi < order.size(); ++oi, ++done) {
      const auto [ctx, target] = pairs[order[oi]];
      const double lr = config.learning_rate *
                        std::max(0.1, 1.0 - static_cast<double>(done) / total_updates);
      cand[0] = target;
      for (int c = 1; c <= config.negatives; ++c) {
        int neg;
        do {
          neg = static_cast<int>(rng.uniform_index(n));
        } while (neg == target);
        cand[c] = neg;
      }
      double* vin = in.data() + static_cast<std::size_t>(ctx) * dim;
      for (int c = 0; c <= config.negatives; ++c) {
        logits[c] = dot(vin, out.data() + static_cast<std::size_t>(cand[c]) * dim, dim);
      }
      const std::vector<double> probs = softmax(logits);
      std::fill(grad_in.begin(), grad_in.end(), 0.0);
      for (int c = 0; c <= config.negatives; ++c) {
        const double g = probs[c] - (c == 0 ? 1.0 : 0.0);
        double* vout = out.data() + static_cast<std::size_t>(cand[c]) * dim;
        for (int d = 0; d < dim; ++d) {
          grad_in[d] += g * vout[d];
          vout[d] -= lr * g * vin[d];
        }
      }
      for (int d = 0; d < dim; ++d) vin[d] -= lr * grad_in[d];
    }
  }

  std::vector<double> embed(n * dim);
  for (std::size_t i = 0; i < n * static_cast<std::size_t>(dim); ++i) {
    embed[i] = 0.5 * (in[i] + out[i]);
  }
  normalize_rows(embed, n, dim);
  return embed;
}

}  // namespace

std::string_view platform_mode_name(PlatformMode m) {
  return m == PlatformMode::Direct ? "direct" : "trained";
}

PlatformMode parse_platform_mode(std::string_view name) {
  if (name == "direct") return PlatformMode::Direct;
  if (name == "trained") return PlatformMode::Trained;
  fail(Errc::ParseError, "unknown platform mode '" + std::string(name) + "'");
}

std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) fail(Errc::EmptyInput, "softmax of empty logits");
  double max_logit = logits[0];
  for (double l : logits) {
    if (!std::isfinite(l)) fail(Errc::NonFiniteInput, "softmax input not finite");
    max_logit = std::max(max_logit, l);
  }
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max_logit);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

PlatformModel PlatformModel::from_embeddings(std::vector<VideoId> ids,
                                             std::vector<std::vector<double>> embeddings,
                                             std::vector<double> popularity,
                                             PlatformConfig config, std::uint64_t rng_seed,
                                             bool frozen) {
  if (ids.size() != embeddings.size() || ids.size() != popularity.size() || ids.empty()) {
    fail(Errc::InvalidSpec, "embedding table shape mismatch");
  }
  PlatformModel m;
  m.ids_ = std::move(ids);
  m.dim_ = static_cast<int>(embeddings[0].size());
  m.embed_.reserve(m.ids_.size() * m.dim_);
  for (const auto& row : embeddings) {
    if (static_cast<int>(row.size()) != m.dim_) fail(Errc::InvalidSpec, "ragged embeddings");
    m.embed_.insert(m.embed_.end(), row.begin(), row.end());
  }
  m.log_pop_.reserve(popularity.size());
  for (double p : popularity) {
    if (p < 0.0) fail(Errc::InvalidSpec, "popularity must be >= 0");
    m.log_pop_.push_back(p > 0.0 ? std::log(p) : -1e30);
  }
  m.config_ = config;
  m.rng_seed_ = rng_seed;
  m.frozen_ = frozen;
  m.index_.reserve(m.ids_.size());
  for (std::size_t i = 0; i < m.ids_.size(); ++i) m.index_.emplace(m.ids_[i], static_cast<int>(i));
  m.norm_.resize(m.ids_.size());
  for (std::size_t i = 0; i < m.ids_.size(); ++i) m.norm_[i] = norm(m.row(static_cast<int>(i)), m.dim_);
  return m;
}

int PlatformModel::index_of(const VideoId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) fail(Errc::UnknownVideo, "video " + id + " not in platform");
  return it->second;
}

std::vector<double> PlatformModel::embedding(const VideoId& id) const {
  const int i = index_of(id);
  return std::vector<double>(row(i), row(i) + dim_);
}

std::optional<std::vector<double>> PlatformModel::user_embedding(const UserState& state) const {
  if (state.history.empty()) return std::nullopt;
  std::vector<double> acc(dim_, 0.0);
  for (const VideoId& id : state.history) {
    const double* r = row(index_of(id));
    for (int d = 0; d < dim_; ++d) acc[d] += r[d];
  }
  for (double& v : acc) v /= static_cast<double>(state.history.size());
  return acc;
}

RecommendationList PlatformModel::recommend(const VideoId& current, const UserState* state) const {
  if (!frozen_) fail(Errc::ModelNotFrozen, "platform must be frozen before serving");
  const int cur = index_of(current);
  const bool personalized = state != nullptr && !state->history.empty();

  std::vector<double> query;
  if (personalized) {
    auto user = user_embedding(*state);
    query = std::move(*user);
    const double* cur_row = row(cur);
    for (int d = 0; d < dim_; ++d) {
      query[d] = config_.alpha_user * query[d] + (1.0 - config_.alpha_user) * cur_row[d];
    }
  } else {
    query.assign(row(cur), row(cur) + dim_);
  }

  const std::size_t n = ids_.size();
  std::vector<double> logits(n);
  for (std::size_t i = 0; i < n; ++i) logits[i] = dot(row(static_cast<int>(i)), query.data(), dim_);
  for (std::size_t i = 0; i < n; ++i) logits[i] += log_pop_[i];

  if (personalized && config_.diversity_penalty > 0.0) {
    const std::size_t window = std::min<std::size_t>(config_.diversity_window, state->history.size());
    std::vector<double> max_cos(n, -2.0);
    for (std::size_t w = 0; w < window; ++w) {
      const VideoId& hid = state->history[state->history.size() - 1 - w];
      const int h = index_of(hid);
      const double hn = norm_[h];
      if (hn <= 1e-12) continue;
      const double* hrow = row(h);
      for (std::size_t i = 0; i < n; ++i) {
        const double in = norm_[i];
        if (in <= 1e-12) continue;
        const double c = dot(row(static_cast<int>(i)), hrow, dim_) / (in * hn);
        max_cos[i] = std::max(max_cos[i], c);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (max_cos[i] > -2.0) logits[i] -= config_.diversity_penalty * max_cos[i];
    }
  }

  std::vector<int> cand;
  cand.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<int>(i) != cur) cand.push_back(static_cast<int>(i));
  }
  if (cand.empty()) fail(Errc::InsufficientCandidates, "corpus has a single video");

  std::vector<double> cand_logits(cand.size());
  for (std::size_t i = 0; i < cand.size(); ++i) cand_logits[i] = logits[cand[i]];
  const std::vector<double> probs = softmax(cand_logits);

  std::vector<std::size_t> order(cand.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cand_logits[a] != cand_logits[b]) return cand_logits[a] > cand_logits[b];
    return ids_[cand[a]] < ids_[cand[b]];
  });

  RecommendationList list;
  list.source_video = current;
  list.surface = personalized ? Surface::Personalized : Surface::Contextual;
  const std::size_t k = std::min<std::size_t>(config_.top_k, order.size());
  list.items.reserve(k);
  for (std::size_t r = 0; r < k; ++r) {
    list.items.push_back(
        RecItem{static_cast<int>(r + 1), ids_[cand[order[r]]], probs[order[r]]});
  }
  return list;
}

PlatformModel build_platform(const Corpus& corpus, const PlatformConfig& config,
                             std::uint64_t rng_seed) {
  if (corpus.videos.empty()) fail(Errc::InvalidSpec, "cannot build platform over empty corpus");
  Rng rng(rng_seed);
  const int dim = config.mode == PlatformMode::Direct ? kTopicCount + kPreferenceCount : config.dim;
  if (dim < 1) fail(Errc::InvalidConfig, "embedding dimension must be >= 1");
  std::vector<double> embed = config.mode == PlatformMode::Direct
                                  ? direct_embeddings(corpus, config, rng, dim)
                                  : trained_embeddings(corpus, config, rng, dim);
  PlatformModel m;
  m.ids_.reserve(corpus.videos.size());
  m.log_pop_.reserve(corpus.videos.size());
  for (const Video& v : corpus.videos) {
    m.ids_.push_back(v.id);
    m.log_pop_.push_back(v.popularity > 0.0 ? std::log(v.popularity) : -1e30);
  }
  m.embed_ = std::move(embed);
  m.dim_ = dim;
  m.config_ = config;
  m.rng_seed_ = rng_seed;
  m.frozen_ = true;
  m.index_.reserve(m.ids_.size());
  for (std::size_t i = 0; i < m.ids_.size(); ++i) m.index_.emplace(m.ids_[i], static_cast<int>(i));
  m.norm_.resize(m.ids_.size());
  for (std::size_t i = 0; i < m.ids_.size(); ++i) m.norm_[i] = norm(m.row(static_cast<int>(i)), m.dim_);
  return m;
}

PlatformModel perturb_embeddings(const PlatformModel& model, double sigma,
                                 std::uint64_t rng_seed) {
  if (sigma < 0.0) fail(Errc::InvalidConfig, "sigma must be >= 0");
  PlatformModel m = model;
  Rng rng(rng_seed);
  for (double& v : m.embed_) v += rng.normal(0.0, sigma);
  for (std::size_t i = 0; i < m.ids_.size(); ++i) {
    m.norm_[i] = norm(m.row(static_cast<int>(i)), m.dim_);
  }
  m.rng_seed_ = rng_seed;
  m.frozen_ = true;
  return m;
}

std::string PlatformModel::to_string() const {
  std::string out;
  json header{{"kind", "platform_meta"},
              {"schema_version", 1},
              {"dim", dim_},
              {"n_videos", ids_.size()},
              {"rng_seed", rng_seed_},
              {"config", config_to_json(config_)}};
  out += header.dump();
  out.push_back('\n');
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    json j{{"kind", "video_embedding"},
           {"id", ids_[i]},
           {"embedding", std::vector<double>(row(static_cast<int>(i)), row(static_cast<int>(i)) + dim_)},
           {"log_popularity", log_pop_[i]}};
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

PlatformModel PlatformModel::from_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  PlatformModel m;
  bool have_header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(Errc::ParseError, "platform line " + std::to_string(lineno) + ": " + e.what());
    }
    const std::string kind = j.value("kind", "");
    if (kind == "platform_meta") {
      if (!j.contains("schema_version") || j.at("schema_version").get<int>() != 1) {
        fail(Errc::SchemaMismatch, "unsupported platform schema version");
      }
      m.dim_ = j.at("dim").get<int>();
      m.rng_seed_ = j.at("rng_seed").get<std::uint64_t>();
      m.config_ = config_from_json(j.at("config"));
      have_header = true;
    } else if (kind == "video_embedding") {
      if (!have_header) fail(Errc::SchemaMismatch, "embedding row before platform_meta");
      m.ids_.push_back(j.at("id").get<std::string>());
      const auto e = j.at("embedding").get<std::vector<double>>();
      if (static_cast<int>(e.size()) != m.dim_) fail(Errc::ParseError, "embedding width mismatch");
      m.embed_.insert(m.embed_.end(), e.begin(), e.end());
      m.log_pop_.push_back(j.at("log_popularity").get<double>());
    } else {
      fail(Errc::ParseError, "platform line " + std::to_string(lineno) + ": unknown kind");
    }
  }
  if (!have_header) fail(Errc::SchemaMismatch, "platform file has no platform_meta header");
  if (m.ids_.empty()) fail(Errc::ParseError, "platform file has no embeddings");
  m.frozen_ = true;
  m.index_.reserve(m.ids_.size());
  for (std::size_t i = 0; i < m.ids_.size(); ++i) m.index_.emplace(m.ids_[i], static_cast<int>(i));
  m.norm_.resize(m.ids_.size());
  for (std::size_t i = 0; i < m.ids_.size(); ++i) m.norm_[i] = norm(m.row(static_cast<int>(i)), m.dim_);
  return m;
}

void PlatformModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoError, "cannot write " + path);
  out << to_string();
  if (!out) fail(Errc::IoError, "write failed for " + path);
}

PlatformModel PlatformModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

PlatformConfig platform_config_from_json_text(const std::string& text) {
  try {
    return config_from_json(json::parse(text));
  } catch (const json::exception& e) {
    fail(Errc::ParseError, std::string("platform config: ") + e.what());
  }
}

std::string platform_config_to_json_text(const PlatformConfig& config) {
  return config_to_json(config).dump(2) + "\n";
}

}  // namespace recaudit
