#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cbd/agent.hpp"
#include "cbd/benchmark.hpp"
#include "cbd/metrics.hpp"
#include "cbd/pipeline.hpp"
#include "cbd/types.hpp"

namespace cbd {

// Full experiment description; every field has a config-file key of the same
// name (see parse_config / apply_config).
struct ExperimentConfig {
  GeneratorConfig bench;
  AgentConfig agent;
  int num_agents = 2;       // n for gcbd; other recipes use what they need
  int ibt_rounds = 4;
  int ibt_subsample = 2000;
  DecodeConfig decode;
  std::string recipe = "cbd";  // cbd | gcbd:n | bd11 | bd12 | bd22 | ens-distill | noised
  NoiseConfig noise;
  int passes = 1;
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string out_dir = "out";
  int threads = 1;
  int recon_sample = 500;

  void validate() const;
};

using ConfigMap = std::map<std::string, std::string>;

// Flat "key = value" file; '#' starts a comment. Unknown keys are an error.
ConfigMap parse_config_file(const std::string& path);
void apply_config(ExperimentConfig& cfg, const ConfigMap& kv);
std::string config_help();

struct EvalResult {
  std::string model;
  BleuScore s2t, t2s;
  double avg() const { return 0.5 * (s2t.score + t2s.score); }
};

// Test-set BLEU in both directions.
EvalResult evaluate_on_test(const Agent& agent, const BenchmarkSet& bench, const DecodeConfig& dc,
                            int threads = 1);

struct SeedOutcome {
  uint64_t seed = 0;
  bool ok = false;
  std::string error;  // failure reason when !ok
  std::vector<EvalResult> evals;            // agents first, student last
  std::vector<std::array<double, 3>> ibt_log;  // per agent per round: round, bleu_s2t, bleu_t2s
};

struct RunResult {
  ExperimentConfig config;
  std::vector<SeedOutcome> seeds;
};

// Drives one recipe end to end for every seed: benchmark generation, agent
// init + IBT, pair generation, student fit, evaluation and report emission.
// Every artifact is serialized under out_dir/seed<k>/. A failing seed records
// its reason and the remaining seeds still run.
RunResult run_experiment(const ExperimentConfig& cfg);

// Aligned cross-run comparison (BLEU and diversity per recipe, per-seed sign
// counts). Throws IncomparableRuns if benchmark seeds differ.
std::string compare_tables(const std::vector<std::string>& run_dirs);

}  // namespace cbd
