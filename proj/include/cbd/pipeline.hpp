#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cbd/agent.hpp"
#include "cbd/corpus.hpp"
#include "cbd/types.hpp"

namespace cbd {

// The four directed pair families emitted per monolingual seed sentence x:
// with y = alpha(x) and z = beta(y),
//   XY = (x, y), YX = (y, x)  [level 1]
//   YZ = (y, z), ZY = (z, y)  [level 2]
enum class PairFamily : uint8_t { XY, YX, YZ, ZY };

struct SyntheticPair {
  Sentence src, tgt;
  Direction dir = Direction::S2T;
  int level = 1;
  std::string alpha_id;
  std::string beta_id;  // empty for level-1 pairs
  int64_t origin_index = 0;
  PairFamily family = PairFamily::XY;
  Lang origin_side = Lang::S;
};

struct SyntheticCorpus {
  std::string recipe;
  uint64_t seed = 0;
  DecodeConfig decode;
  std::shared_ptr<const Vocab> vocab_s, vocab_t;
  std::vector<SyntheticPair> pairs;
  int64_t dropped_empty = 0;  // pairs discarded because noising emptied the target
  bool provenance_tagged = true;  // family/origin_side valid (false after read_synthetic)

  size_t size() const { return pairs.size(); }
};

// Cross-model pair generation: for every seed sentence, y = alpha's
// translation and z = beta's back-translation of y; emits the four directed
// families for both monolingual sides (4 * (|mono_s| + |mono_t|) pairs).
// Throws SameAgentError when alpha and beta share an id.
SyntheticCorpus generate_cbd_pairs(const Agent& alpha, const Agent& beta, const Corpus& mono_s,
                                   const Corpus& mono_t, const DecodeConfig& dc, int threads = 1);

struct FitConfig {
  int lm_order = 3;
  int em_iterations = 5;
  double lm_weight = 0.4;
  int reorder_window = 2;
  uint64_t seed = 0;
};

// A distilled model plus the recipe provenance it was fitted from.
struct StudentModel {
  Agent agent;
  std::string recipe;
  std::map<std::string, int64_t> pair_counts;  // by direction and level
};

// Count-based MLE on directed pairs: per direction an IBM Model 1 table over
// all pairs of that direction, LMs trained on the per-direction target sides.
// Level-1 and level-2 pairs weigh equally. Throws MissingDirection if either
// direction has no pairs.
StudentModel supervised_fit(const SyntheticCorpus& pairs, std::shared_ptr<const Vocab> vocab_s,
                            std::shared_ptr<const Vocab> vocab_t, const FitConfig& cfg);

// CBD: pairs from both role orders (alpha, beta) and (beta, alpha), one
// generate-then-fit pass. `passes` > 1 regenerates with fresh seed streams
// (only meaningful for sampling decodes) and fits on the union.
StudentModel cbd_train(const Agent& theta1, const Agent& theta2, const Corpus& mono_s,
                       const Corpus& mono_t, const DecodeConfig& dc, const FitConfig& fit,
                       int passes = 1, int threads = 1);

// Generalized CBD over n >= 2 agents: all ordered distinct role pairs.
StudentModel gcbd_train(const std::vector<const Agent*>& agents, const Corpus& mono_s,
                        const Corpus& mono_t, const DecodeConfig& dc, const FitConfig& fit,
                        int passes = 1, int threads = 1);

// Pair corpora for the recipes above without the fit step.
SyntheticCorpus cbd_generate(const Agent& theta1, const Agent& theta2, const Corpus& mono_s,
                             const Corpus& mono_t, const DecodeConfig& dc, int passes = 1,
                             int threads = 1);
SyntheticCorpus gcbd_generate(const std::vector<const Agent*>& agents, const Corpus& mono_s,
                              const Corpus& mono_t, const DecodeConfig& dc, int passes = 1,
                              int threads = 1);

enum class BdVariant { BD11, BD12, BD22 };

BdVariant bd_variant_from_string(const std::string& name);

// Ablations without the cross-model rule. BD(1,1): one agent, level-1 pairs.
// BD(1,2): both agents' level-1 pairs. BD(2,2): per agent, level-1 and level-2
// pairs with beta = alpha (same-model back-translation).
SyntheticCorpus bd_generate(BdVariant variant, const std::vector<const Agent*>& agents,
                            const Corpus& mono_s, const Corpus& mono_t, const DecodeConfig& dc,
                            int threads = 1);

// Level-1 pairs decoded by the stepwise ensemble of all agents.
SyntheticCorpus ensemble_distill(const std::vector<const Agent*>& agents, const Corpus& mono_s,
                                 const Corpus& mono_t, const DecodeConfig& dc, int threads = 1);

struct NoiseConfig {
  double p_drop = 0.1;
  double p_swap = 0.1;
  double p_blank = 0.1;  // replace with a random vocabulary word

  void validate() const;
};

// Independently noises each target side (drop, adjacent swap, random
// replacement); sources untouched. Pairs whose target becomes empty are
// dropped and counted in dropped_empty.
SyntheticCorpus apply_target_noise(const SyntheticCorpus& pairs, const NoiseConfig& noise,
                                   uint64_t seed);

// TSV with columns src, tgt, direction, level, alpha_id, beta_id, origin_index
// and a header line carrying the recipe tag and seed.
void write_synthetic(const SyntheticCorpus& corpus, const std::string& path);
SyntheticCorpus read_synthetic(const std::string& path, std::shared_ptr<const Vocab> vocab_s,
                               std::shared_ptr<const Vocab> vocab_t);

// Restores family/origin_side tags on a corpus read back from disk by
// matching real sides against the monolingual corpora.
void reconstruct_provenance(SyntheticCorpus& corpus, const Corpus& mono_s, const Corpus& mono_t);

// The agent-generated sentences of a corpus (each y and z once).
std::vector<Sentence> generated_sentences(const SyntheticCorpus& corpus);

// Throws if a level-2 pair's y side does not match the level-1 translation it
// chains from, or if a cross-model/same-model beta tag is inconsistent.
void check_chain_consistency(const SyntheticCorpus& corpus);

void save_student(const StudentModel& student, const std::string& dir);
StudentModel load_student(const std::string& dir);

}  // namespace cbd
