#include "cbd/agent.hpp"

#include <algorithm>

#include "cbd/rng.hpp"

namespace cbd {

namespace {

constexpr uint64_t kInitS2t = 0x696e6974'732d74ull;
constexpr uint64_t kInitT2s = 0x696e6974'742d73ull;
constexpr uint64_t kIbtSample = 0x69627473ull;
constexpr uint64_t kIbtDecode = 0x69627464ull;

// Word ids in frequency-rank order with equal-frequency runs shuffled by the
// agent seed. Ids are already rank-ordered by Vocab construction.
std::vector<TokenId> perturbed_ranking(const Vocab& vocab, Rng& rng) {
  std::vector<TokenId> ranks;
  for (TokenId id = Vocab::kFirstWord; id < vocab.size(); ++id) ranks.push_back(id);
  size_t i = 0;
  while (i < ranks.size()) {
    size_t j = i + 1;
    while (j < ranks.size() && vocab.frequency(ranks[j]) == vocab.frequency(ranks[i])) ++j;
    for (size_t k = j - 1; k > i; --k)
      std::swap(ranks[k], ranks[i + rng.below(static_cast<uint64_t>(k - i + 1))]);
    i = j;
  }
  return ranks;
}

void rank_jitter(std::vector<TokenId>& ranks, double p, Rng& rng) {
  size_t i = 0;
  while (i + 1 < ranks.size()) {
    if (rng.bernoulli(p)) {
      std::swap(ranks[i], ranks[i + 1]);
      i += 2;
    } else {
      ++i;
    }
  }
}

TranslationTable rank_match_table(const Vocab& src_vocab, const Vocab& tgt_vocab, Direction dir,
                                  Rng rng) {
  std::vector<TokenId> src_ranks = perturbed_ranking(src_vocab, rng);
  std::vector<TokenId> tgt_ranks = perturbed_ranking(tgt_vocab, rng);
  rank_jitter(tgt_ranks, 0.1, rng);

  TranslationTable table(dir);
  const int nt = static_cast<int>(tgt_ranks.size());
  for (size_t i = 0; i < src_ranks.size(); ++i) {
    int center = std::min(static_cast<int>(i), nt - 1);
    TableRow row;
    row.cands.emplace_back(tgt_ranks[static_cast<size_t>(center)], 0.7);
    if (center - 1 >= 0) row.cands.emplace_back(tgt_ranks[static_cast<size_t>(center - 1)], 0.15);
    if (center + 1 < nt) row.cands.emplace_back(tgt_ranks[static_cast<size_t>(center + 1)], 0.15);
    table.set_row(src_ranks[i], std::move(row));  // edge rows renormalize
  }
  return table;
}

}  // namespace

Agent init_agent(const Corpus& mono_s, const Corpus& mono_t, uint64_t seed,
                 const AgentConfig& cfg, const std::string& id) {
  if (mono_s.empty() || mono_t.empty())
    throw EmptyCorpus("both monolingual corpora must be non-empty");
  if (cfg.lm_weight < 0.0 || cfg.lm_weight > 1.0)
    throw ConfigError("lm_weight must be in [0, 1]");
  if (cfg.reorder_window < 0) throw ConfigError("reorder_window must be >= 0");

  Agent agent;
  agent.id = id.empty() ? "agent-" + std::to_string(seed) : id;
  agent.seed = seed;
  agent.lm_weight = cfg.lm_weight;
  agent.reorder_window = cfg.reorder_window;
  agent.em_iterations = cfg.em_iterations;
  agent.vocab_s = mono_s.vocab;
  agent.vocab_t = mono_t.vocab;

  const int ns = mono_s.vocab->num_words();
  const int nt = mono_t.vocab->num_words();
  if (ns > nt + nt / 2 || nt > ns + ns / 2)
    agent.init_warning = "InitDegenerate: vocabulary sizes " + std::to_string(ns) + " vs " +
                         std::to_string(nt) + " differ by more than 50%";

  agent.table_s2t = rank_match_table(*mono_s.vocab, *mono_t.vocab, Direction::S2T,
                                     Rng(mix64(seed, kInitS2t)));
  agent.table_t2s = rank_match_table(*mono_t.vocab, *mono_s.vocab, Direction::T2S,
                                     Rng(mix64(seed, kInitT2s)));
  agent.lm_s = LanguageModel::train(mono_s, cfg.lm_order);
  agent.lm_t = LanguageModel::train(mono_t, cfg.lm_order);
  return agent;
}

Agent ibt_train(const Agent& agent, const Corpus& mono_s, const Corpus& mono_t, int rounds,
                int subsample, const DecodeConfig& dc, int threads) {
  if (rounds < 0) throw ConfigError("rounds must be >= 0");
  if (rounds == 0) return agent;
  if (subsample <= 0) throw ConfigError("subsample must be positive");
  if (subsample > static_cast<int>(mono_s.size()) || subsample > static_cast<int>(mono_t.size()))
    throw ConfigError("subsample exceeds corpus size");

  Agent cur = agent;
  for (int r = 0; r < rounds; ++r) {
    const int round_idx = cur.ibt_rounds_done;
    for (Direction dir : {Direction::S2T, Direction::T2S}) {
      const Corpus& real_tgt = dir == Direction::S2T ? mono_t : mono_s;
      Rng sampler(mix64(cur.seed, kIbtSample,
                        mix64(static_cast<uint64_t>(round_idx), static_cast<uint64_t>(dir))));
      std::vector<int64_t> idx = sampler.sample_indices(static_cast<int64_t>(real_tgt.size()),
                                                        subsample);
      std::vector<Sentence> targets;
      targets.reserve(idx.size());
      for (int64_t i : idx) targets.push_back(real_tgt.sentences[static_cast<size_t>(i)]);

      // Back-translate real target-side text with the current reverse model.
      DecodeConfig round_dc = dc;
      round_dc.seed = mix64(dc.seed, kIbtDecode,
                            mix64(static_cast<uint64_t>(round_idx), static_cast<uint64_t>(dir)));
      std::vector<Sentence> synthetic =
          translate_corpus({&cur}, targets, reverse(dir), round_dc, threads);

      std::vector<std::pair<const Sentence*, const Sentence*>> pairs;
      pairs.reserve(targets.size());
      for (size_t i = 0; i < targets.size(); ++i) {
        if (synthetic[i].empty()) continue;  // degenerate decode, skip pair
        pairs.emplace_back(&synthetic[i], &targets[i]);
      }
      cur.table(dir) = ibm1_fit(pairs, dir, cur.em_iterations, 0.01,
                                cur.src_vocab(dir).size(), cur.tgt_vocab(dir).size());
    }
    ++cur.ibt_rounds_done;
  }
  return cur;
}

}  // namespace cbd
