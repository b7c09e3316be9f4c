#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cbd/corpus.hpp"
#include "cbd/ngram_lm.hpp"
#include "cbd/translation_table.hpp"
#include "cbd/types.hpp"

namespace cbd {

enum class DecodeStrategy { Greedy, Beam, SampleTemperature, TopK, TopP };

struct DecodeConfig {
  DecodeStrategy strategy = DecodeStrategy::Greedy;
  int beam_size = 5;
  double temperature = 0.3;
  int top_k = 10;
  double top_p = 0.9;
  uint64_t seed = 0;
  int max_out_len = kMaxSentenceLen;

  void validate() const;
};

DecodeStrategy strategy_from_string(const std::string& name);
std::string to_string(DecodeStrategy s);

// A bidirectional translation model: one word table per direction plus a
// fixed language model per language, decoded as a token-factorized noisy
// channel (channel^(1-lambda) * lm^lambda with a monotone coverage window).
struct Agent {
  std::string id;
  std::shared_ptr<const Vocab> vocab_s, vocab_t;
  TranslationTable table_s2t{Direction::S2T};
  TranslationTable table_t2s{Direction::T2S};
  LanguageModel lm_s, lm_t;
  double lm_weight = 0.4;   // lambda
  int reorder_window = 2;
  int em_iterations = 5;
  uint64_t seed = 0;
  int ibt_rounds_done = 0;
  std::string init_warning;  // InitDegenerate note, empty if none

  const TranslationTable& table(Direction d) const {
    return d == Direction::S2T ? table_s2t : table_t2s;
  }
  TranslationTable& table(Direction d) { return d == Direction::S2T ? table_s2t : table_t2s; }
  const LanguageModel& target_lm(Direction d) const {
    return d == Direction::S2T ? lm_t : lm_s;
  }
  const Vocab& src_vocab(Direction d) const {
    return d == Direction::S2T ? *vocab_s : *vocab_t;
  }
  const Vocab& tgt_vocab(Direction d) const {
    return d == Direction::S2T ? *vocab_t : *vocab_s;
  }
};

struct AgentConfig {
  double lm_weight = 0.4;
  int reorder_window = 2;
  int lm_order = 3;
  int em_iterations = 5;
};

// Unsupervised initialization: frequency-rank matching (rank i -> rank i with
// mass 0.7, ranks i+-1 with 0.15 each, edges renormalized) with seeded tie
// shuffling and +-1-rank jitter (p = 0.1), plus LMs trained on the two
// monolingual corpora.
Agent init_agent(const Corpus& mono_s, const Corpus& mono_t, uint64_t seed,
                 const AgentConfig& cfg = {}, const std::string& id = "");

// Per-step decoder distribution over the target vocabulary for the given
// source sentence and decoded prefix. Normalized; zero outside the channel
// support except for the <eos>-only state once coverage is complete.
std::vector<double> next_token_distribution(const Agent& agent, const Sentence& src,
                                            const Sentence& prefix, Direction dir);

// Autoregressive decode. Greedy/beam are deterministic; sampling strategies
// derive their stream from mix(dc.seed, sentence_index) so batch results are
// independent of scheduling.
Sentence translate(const Agent& agent, const Sentence& src, Direction dir,
                   const DecodeConfig& dc, uint64_t sentence_index = 0);

// Stepwise ensemble: arithmetic mean of the member distributions, then the
// wrapped strategy selects. A one-agent ensemble is exactly translate().
Sentence ensemble_translate(const std::vector<const Agent*>& agents, const Sentence& src,
                            Direction dir, const DecodeConfig& dc, uint64_t sentence_index = 0);

// Batch decode with sentence i seeded as mix(dc.seed, i); output order and
// content are independent of the worker count.
std::vector<Sentence> translate_corpus(const std::vector<const Agent*>& agents,
                                       const std::vector<Sentence>& sents, Direction dir,
                                       const DecodeConfig& dc, int threads = 1,
                                       uint64_t index_offset = 0);

// Iterative back-translation: per round and direction, back-translate a seeded
// subsample of the target-side monolingual data with the current reverse
// table, then re-estimate the forward table with IBM Model 1 EM. LMs stay
// fixed after initialization. rounds = 0 returns the input unchanged.
Agent ibt_train(const Agent& agent, const Corpus& mono_s, const Corpus& mono_t, int rounds,
                int subsample, const DecodeConfig& dc, int threads = 1);

// Serialization: directory with table.s2t.tsv, table.t2s.tsv, vocab/LM files
// and meta.txt. Loading reproduces bit-identical decode behavior.
void save_agent(const Agent& agent, const std::string& dir);
Agent load_agent(const std::string& dir);

}  // namespace cbd
