#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "recaudit/pipeline.hpp"

namespace {

std::optional<std::uint64_t> maybe_seed(const CLI::Option* opt, std::uint64_t value) {
  return opt->count() > 0 ? std::optional<std::uint64_t>(value) : std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recaudit: closed-loop preference audit of a simulated recommender"};
  app.require_subcommand(1);
  int rc = recaudit::kExitOk;

  // corpus gen
  auto* corpus = app.add_subcommand("corpus", "Synthetic video corpus tools");
  corpus->require_subcommand(1);
  auto* gen = corpus->add_subcommand("gen", "Generate a corpus from a spec file");
  std::string gen_spec, gen_lexicons, gen_out;
  std::uint64_t gen_seed = 0;
  gen->add_option("--spec", gen_spec, "Corpus spec JSON")->required();
  gen->add_option("--lexicons", gen_lexicons, "Lexicon file (overrides spec)");
  gen->add_option("--out", gen_out, "Output corpus path")->required();
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "Override the spec rng seed");
  gen->callback([&] {
    rc = recaudit::cmd_corpus_gen(gen_spec, gen_lexicons, gen_out,
                                  maybe_seed(gen_seed_opt, gen_seed));
  });

  // platform build / perturb
  auto* platform = app.add_subcommand("platform", "Simulated platform backends");
  platform->require_subcommand(1);
  auto* build = platform->add_subcommand("build", "Embed a corpus into a frozen backend");
  std::string build_corpus, build_config, build_out;
  std::uint64_t build_seed = 0;
  build->add_option("--corpus", build_corpus, "Corpus path")->required();
  build->add_option("--config", build_config, "Platform config JSON");
  build->add_option("--out", build_out, "Output model path")->required();
  auto* build_seed_opt = build->add_option("--seed", build_seed, "Build rng seed (default 0)");
  build->callback([&] {
    rc = recaudit::cmd_platform_build(build_corpus, build_config, build_out,
                                      maybe_seed(build_seed_opt, build_seed));
  });

  auto* perturb = platform->add_subcommand("perturb", "Copy a backend with noisy embeddings");
  std::string perturb_in, perturb_out;
  double perturb_sigma = 0.1;
  std::uint64_t perturb_seed = 0;
  perturb->add_option("--in", perturb_in, "Input model path")->required();
  perturb->add_option("--out", perturb_out, "Output model path")->required();
  perturb->add_option("--sigma", perturb_sigma, "Noise stddev per dimension (default 0.1)");
  perturb->add_option("--seed", perturb_seed, "Noise rng seed (default 0)");
  perturb->callback(
      [&] { rc = recaudit::cmd_platform_perturb(perturb_in, perturb_out, perturb_sigma, perturb_seed); });

  // score
  auto* score = app.add_subcommand("score", "Score every transcript against the lexicons");
  std::string score_lexicons, score_corpus, score_out;
  score->add_option("--lexicons", score_lexicons, "Lexicon file")->required();
  score->add_option("--corpus", score_corpus, "Corpus path")->required();
  score->add_option("--out", score_out, "Output CSV path")->required();
  score->callback([&] { rc = recaudit::cmd_score(score_lexicons, score_corpus, score_out); });

  // run
  auto* run = app.add_subcommand("run", "Run a sock-puppet experiment");
  std::string run_config, run_corpus, run_platform, run_lexicons, run_out;
  int run_workers = 1;
  std::uint64_t run_seed = 0;
  run->add_option("--config", run_config, "Experiment config JSON")->required();
  run->add_option("--corpus", run_corpus, "Corpus path (overrides config ref)");
  run->add_option("--platform", run_platform, "Model path (overrides config ref)");
  run->add_option("--lexicons", run_lexicons, "Lexicon file (overrides config ref)");
  run->add_option("--out", run_out, "Output directory")->required();
  run->add_option("--workers", run_workers, "Worker threads (default 1)")
      ->check(CLI::PositiveNumber);
  auto* run_seed_opt = run->add_option("--seed", run_seed, "Override the master seed");
  run->callback([&] {
    rc = recaudit::cmd_run(run_config, run_corpus, run_platform, run_lexicons, run_out,
                           run_workers, maybe_seed(run_seed_opt, run_seed));
  });

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Summarize a trace file as JSON");
  std::string analyze_traces, analyze_out;
  analyze->add_option("--traces", analyze_traces, "Trace JSONL path")->required();
  analyze->add_option("--out", analyze_out, "Output path (default stdout)");
  analyze->callback([&] { rc = recaudit::cmd_analyze(analyze_traces, analyze_out); });

  // report
  auto* report = app.add_subcommand("report", "Write CSV reports from a trace file");
  std::string report_traces, report_out;
  report->add_option("--traces", report_traces, "Trace JSONL path")->required();
  report->add_option("--out", report_out, "Output directory")->required();
  report->callback([&] { rc = recaudit::cmd_report(report_traces, report_out); });

  // validate
  auto* validate = app.add_subcommand("validate", "Compare audit behavior across two backends");
  std::string val_a, val_b, val_corpus, val_lexicons, val_out;
  std::vector<std::string> val_personas;
  std::uint64_t val_seed = 0;
  validate->add_option("--platform-a", val_a, "First model path")->required();
  validate->add_option("--platform-b", val_b, "Second model path")->required();
  validate->add_option("--corpus", val_corpus, "Corpus path")->required();
  validate->add_option("--lexicons", val_lexicons, "Lexicon file")->required();
  validate->add_option("--persona", val_personas, "Persona preference (repeatable)");
  validate->add_option("--out", val_out, "Output CSV path (default stdout)");
  validate->add_option("--seed", val_seed, "Validation rng seed (default 0)");
  validate->callback([&] {
    rc = recaudit::cmd_validate(val_a, val_b, val_corpus, val_lexicons, val_personas, val_out,
                                val_seed);
  });

  // run-all
  auto* run_all = app.add_subcommand("run-all", "Corpus, platform, run, and reports in one shot");
  std::string all_config, all_out;
  int all_workers = 1;
  std::uint64_t all_seed = 0;
  run_all->add_option("--config", all_config, "Combined config JSON")->required();
  run_all->add_option("--out", all_out, "Output directory")->required();
  run_all->add_option("--workers", all_workers, "Worker threads (default 1)")
      ->check(CLI::PositiveNumber);
  auto* all_seed_opt = run_all->add_option("--seed", all_seed, "Override the master seed");
  run_all->callback([&] {
    rc = recaudit::cmd_run_all(all_config, all_out, all_workers,
                               maybe_seed(all_seed_opt, all_seed));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return recaudit::kExitUsage;
  }
  return rc;
}
