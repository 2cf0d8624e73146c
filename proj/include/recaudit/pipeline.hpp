#ifndef RECAUDIT_PIPELINE_HPP
#define RECAUDIT_PIPELINE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "recaudit/orchestrator.hpp"
#include "recaudit/stats.hpp"
#include "recaudit/types.hpp"

namespace recaudit {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

int cmd_corpus_gen(const std::string& spec_path, const std::string& lexicons_override,
                   const std::string& out_path, std::optional<std::uint64_t> seed_override);

int cmd_platform_build(const std::string& corpus_path, const std::string& config_path,
                       const std::string& out_path, std::optional<std::uint64_t> seed_override);

int cmd_platform_perturb(const std::string& in_path, const std::string& out_path, double sigma,
                         std::uint64_t seed);

int cmd_score(const std::string& lexicons_path, const std::string& corpus_path,
              const std::string& out_path);

int cmd_run(const std::string& config_path, const std::string& corpus_path,
            const std::string& platform_path, const std::string& lexicons_path,
            const std::string& out_dir, int workers, std::optional<std::uint64_t> seed_override);

int cmd_analyze(const std::string& traces_path, const std::string& out_path);

int cmd_report(const std::string& traces_path, const std::string& out_dir);

int cmd_validate(const std::string& platform_a_path, const std::string& platform_b_path,
                 const std::string& corpus_path, const std::string& lexicons_path,
                 const std::vector<std::string>& personas, const std::string& out_path,
                 std::uint64_t seed);

int cmd_run_all(const std::string& config_path, const std::string& out_dir, int workers,
                std::optional<std::uint64_t> seed_override);

// Library face of cmd_validate. Each persona is trained on both backends with
// shared seed videos per repetition, then queried on held-out videos.
stats::SimilarityReport validate_backends(const PlatformModel& a, const PlatformModel& b,
                                          const Corpus& corpus, const LexiconSet& lexicons,
                                          const std::vector<Preference>& personas,
                                          std::uint64_t seed, int steps = 40, int repetitions = 3,
                                          int held_out = 5);

// Report generation from a trace store (used by cmd_report and cmd_run_all).
void write_reports(const TraceStore& store, const std::string& out_dir);

std::uint64_t fnv1a_file(const std::string& path);  // throws IoError
std::string hex64(std::uint64_t v);

}  // namespace recaudit

#endif
