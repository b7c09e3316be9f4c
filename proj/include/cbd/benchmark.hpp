#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cbd/corpus.hpp"
#include "cbd/types.hpp"

namespace cbd {

// Settings for the synthetic cipher-language pair generator.
struct GeneratorConfig {
  int vocab_size = 200;
  int sentences_per_side = 5000;
  int test_size = 400;
  double swap_prob = 0.2;
  double zipf_exponent = 1.1;
  int min_len = 4;
  int max_len = 14;
  int successor_pool = 12;  // bigram branching factor of the base generator
};

// A generated language pair: non-parallel monolingual sides, a gold bijective
// lexicon and a held-out parallel test set. The *_base / *_swaps members are
// generation provenance kept for property checks; they are not serialized.
struct BenchmarkSet {
  Corpus mono_s;
  Corpus mono_t;
  std::map<TokenId, TokenId> gold_lexicon;  // s-vocab id -> t-vocab id
  std::vector<std::pair<Sentence, Sentence>> test_pairs;
  std::vector<std::vector<int>> test_swaps;  // disjoint adjacent transpositions
  std::vector<Sentence> mono_t_base;         // s-vocab originals behind mono_t
  std::vector<std::vector<int>> mono_t_swaps;
  GeneratorConfig config;
  uint64_t seed = 0;

  // Word-by-word lexicon image of an s-vocab sentence (no reordering).
  Sentence lexicon_translate(const Sentence& src) const;
  Sentence lexicon_translate_back(const Sentence& tgt) const;
};

// Applies the recorded disjoint adjacent transpositions. Involution: applying
// the same swap list twice restores the input.
Sentence apply_swaps(const Sentence& s, const std::vector<int>& swaps);

BenchmarkSet generate_language_pair(const GeneratorConfig& cfg, uint64_t seed);

// Directory layout: mono.s.txt, mono.t.txt, test.s.txt, test.t.txt,
// lexicon.tsv (source<TAB>target), meta.txt (key = value).
void write_benchmark(const BenchmarkSet& bench, const std::string& dir);
BenchmarkSet load_benchmark(const std::string& dir);

}  // namespace cbd
