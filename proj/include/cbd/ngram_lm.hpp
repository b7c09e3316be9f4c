#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cbd/corpus.hpp"
#include "cbd/types.hpp"

namespace cbd {

// Interpolated Kneser-Ney n-gram language model with a fixed discount of 0.75
// at every order. Sentences are padded with <bos> x (order-1) and terminated
// by <eos>; <bos> is context only and never predicted. Immutable once trained.
class LanguageModel {
 public:
  static constexpr double kDiscount = 0.75;

  LanguageModel() = default;

  static LanguageModel train(const Corpus& corpus, int order);

  int order() const { return order_; }
  const std::shared_ptr<const Vocab>& vocab() const { return vocab_; }
  bool trained() const { return order_ > 0; }

  // Smoothed P(next | last order-1 tokens of <bos>-padded prefix).
  // Strictly positive for every token except <bos>.
  double prob(TokenId next, std::span<const TokenId> prefix) const;

  // Precomputed per-prefix context chain for repeated queries at one decoding
  // step. step_prob(make_step(p), w) == prob(w, p) exactly.
  struct Step {
    struct Level {
      bool present = false;
      double total = 0.0;
      double backoff = 0.0;  // discount * distinct / total
      std::string ctx_key;
    };
    std::vector<Level> levels;  // level k at index k-1
    double uniform = 0.0;
  };
  Step make_step(std::span<const TokenId> prefix) const;
  double step_prob(const Step& step, TokenId next) const;

  // Full distribution over the vocabulary (entry for <bos> is 0).
  std::vector<double> next_token_dist(std::span<const TokenId> prefix) const;

  // Natural-log score of the sentence including the <eos> event.
  double logprob(const Sentence& sentence) const;

  double perplexity(const Corpus& corpus) const;

  // Debug dump: "context<TAB>token<TAB>logprob", sorted; not a stable format.
  void dump(std::ostream& os) const;

  // Exact round-trip of the integer count tables.
  void save(std::ostream& os) const;
  static LanguageModel load(std::istream& is, std::shared_ptr<const Vocab> vocab);

  bool operator==(const LanguageModel& other) const;

 private:
  struct ContextStats {
    int64_t total = 0;
    int32_t distinct = 0;
  };
  using GramCounts = std::unordered_map<std::string, int64_t>;
  using ContextCounts = std::unordered_map<std::string, ContextStats>;

  static std::string key(std::span<const TokenId> toks);

  void rebuild_derived();
  double prob_at(int k, std::span<const TokenId> context, TokenId next) const;

  int order_ = 0;
  std::shared_ptr<const Vocab> vocab_;
  // raw_[k-1]: k-gram counts over the padded corpus, k = 1..order.
  std::vector<GramCounts> raw_;
  // kn_[k-1]: counts used at level k (raw at the top order, continuation
  // type-counts below), with per-context totals in ctx_[k-1].
  std::vector<GramCounts> kn_;
  std::vector<ContextCounts> ctx_;
};

// Spec-facing wrappers.
LanguageModel train_lm(const Corpus& corpus, int order = 3);
double lm_logprob(const LanguageModel& lm, const Sentence& sentence);

}  // namespace cbd
