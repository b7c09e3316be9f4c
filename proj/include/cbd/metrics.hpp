#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cbd/agent.hpp"
#include "cbd/corpus.hpp"
#include "cbd/pipeline.hpp"
#include "cbd/types.hpp"

namespace cbd {

// Corpus-level BLEU-4 with multi-bleu.perl semantics: clipped modified n-gram
// precisions summed over the corpus, geometric mean over orders 1-4,
// multiplicative brevity penalty, single reference, no smoothing.
struct BleuScore {
  double score = 0.0;  // in [0, 100]
  std::array<double, 4> precisions{};
  double brevity_penalty = 0.0;
  int64_t hyp_len = 0;
  int64_t ref_len = 0;
};

BleuScore corpus_bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs);
BleuScore corpus_bleu(const Corpus& hyps, const Corpus& refs);

// Round-trips mono through fwd then bwd and scores the reconstruction against
// the original. Lower means the chain generated more diverse data.
BleuScore reconstruction_bleu(const Corpus& mono, const Agent& fwd, const Agent& bwd,
                              const DecodeConfig& dc, int threads = 1);

// Fraction of pairs whose (direction, src, tgt) triple already occurred
// earlier in the corpus (duplicates beyond first occurrence over total).
double duplicate_ratio(const SyntheticCorpus& corpus);
double duplicate_ratio(const SyntheticCorpus& corpus, std::map<std::string, double>* per_family);

// Fraction of sentences containing a token repeated >= 3 times consecutively.
double trigram_repetition_rate(const std::vector<Sentence>& sents);

struct ReconEntry {
  Lang side;
  std::string fwd_id, bwd_id;
  BleuScore bleu;
};

struct DiversityReport {
  std::vector<ReconEntry> reconstruction;  // all ordered agent pairs x both sides
  double dup_ratio = 0.0;
  double trigram_rate = 0.0;  // over the agent-generated sentences
  std::map<std::string, int64_t> pair_counts;  // by direction and level
  int recon_sample = 0;
};

// Aggregates the diversity instruments for one synthetic corpus.
// Reconstruction BLEU uses the first `recon_sample` sentences of each side.
DiversityReport diversity_report(const SyntheticCorpus& corpus, const Corpus& mono_s,
                                 const Corpus& mono_t, const std::vector<const Agent*>& agents,
                                 const DecodeConfig& dc, int recon_sample = 500, int threads = 1);

void write_diversity_tsv(const DiversityReport& report, const std::string& path);
std::string format_diversity_text(const DiversityReport& report);

std::string format_bleu(const BleuScore& b);

}  // namespace cbd
