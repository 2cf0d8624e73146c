#ifndef RECAUDIT_PLATFORM_HPP
#define RECAUDIT_PLATFORM_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "recaudit/corpus.hpp"
#include "recaudit/types.hpp"

namespace recaudit {

enum class PlatformMode { Direct, Trained };

std::string_view platform_mode_name(PlatformMode m);
PlatformMode parse_platform_mode(std::string_view name);

struct PlatformConfig {
  PlatformMode mode = PlatformMode::Direct;

  // Ranking behavior shared by both modes.
  double alpha_user = 0.5;        // personalized query = alpha*user + (1-alpha)*current
  double diversity_penalty = 0.3; // personalized surface only
  int diversity_window = 10;      // history suffix scanned for max-cosine
  int top_k = 20;

  // Direct mode: embedding = [topic one-hot * topic_weight | profile * emotion_weight] + noise.
  double noise_sigma = 0.05;
  double topic_weight = 1.0;
  double emotion_weight = 1.0;

  // Trained mode: synthetic population co-watch events fitted by SGD on a
  // sampled-softmax objective.
  int dim = 32;
  int population_users = 200;
  int session_length = 40;
  int slate_size = 25;
  double population_gamma = 6.0;  // choice sharpness: P(pick) ∝ exp(gamma * alignment)
  double topic_affinity = 1.0;
  int epochs = 10;
  double learning_rate = 0.05;
  int negatives = 8;
};

struct UserState {
  std::vector<VideoId> history;
};

inline UserState watch(UserState state, const VideoId& id) {
  state.history.push_back(id);
  return state;
}

struct RecItem {
  int rank = 0;  // 1-based
  VideoId id;
  double probability = 0.0;
};

struct RecommendationList {
  VideoId source_video;
  Surface surface = Surface::Contextual;
  std::vector<RecItem> items;
};

// Max-shifted; sums to 1. Throws EmptyInput / NonFiniteInput.
std::vector<double> softmax(const std::vector<double>& logits);

class PlatformModel {
 public:
  PlatformModel() = default;
  static PlatformModel from_embeddings(std::vector<VideoId> ids,
                                       std::vector<std::vector<double>> embeddings,
                                       std::vector<double> popularity, PlatformConfig config,
                                       std::uint64_t rng_seed, bool frozen = true);

  // state == nullptr or empty history -> contextual surface.
  RecommendationList recommend(const VideoId& current, const UserState* state) const;
  RecommendationList recommend(const VideoId& current) const { return recommend(current, nullptr); }

  // Arithmetic mean of history embeddings; nullopt when history is empty.
  std::optional<std::vector<double>> user_embedding(const UserState& state) const;

  std::vector<double> embedding(const VideoId& id) const;  // throws UnknownVideo

  int dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<VideoId>& ids() const { return ids_; }
  const PlatformConfig& config() const { return config_; }
  PlatformMode mode() const { return config_.mode; }
  std::uint64_t rng_seed() const { return rng_seed_; }
  bool frozen() const { return frozen_; }
  void set_frozen(bool frozen) { frozen_ = frozen; }

  void save(const std::string& path) const;
  static PlatformModel load(const std::string& path);
  std::string to_string() const;
  static PlatformModel from_string(const std::string& text);

 private:
  friend PlatformModel build_platform(const Corpus&, const PlatformConfig&, std::uint64_t);
  friend PlatformModel perturb_embeddings(const PlatformModel&, double, std::uint64_t);

  int index_of(const VideoId& id) const;  // throws UnknownVideo
  const double* row(int idx) const { return embed_.data() + static_cast<std::size_t>(idx) * dim_; }

  std::vector<VideoId> ids_;
  std::unordered_map<VideoId, int> index_;
  std::vector<double> embed_;  // row-major [n x dim]
  std::vector<double> norm_;   // cached row norms
  std::vector<double> log_pop_;
  PlatformConfig config_;
  int dim_ = 0;
  std::uint64_t rng_seed_ = 0;
  bool frozen_ = false;
};

PlatformModel build_platform(const Corpus& corpus, const PlatformConfig& config,
                             std::uint64_t rng_seed);

// Adds N(0, sigma^2) per dimension; used to fabricate a near-identical backend.
PlatformModel perturb_embeddings(const PlatformModel& model, double sigma, std::uint64_t rng_seed);

PlatformConfig platform_config_from_json_text(const std::string& text);
std::string platform_config_to_json_text(const PlatformConfig& config);

}  // namespace recaudit

#endif
