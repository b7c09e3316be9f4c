#pragma once

#include <cstdint>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cbd/types.hpp"

namespace cbd {

// One source word's translation candidates, sorted by descending probability
// (ties by ascending target id). Probabilities sum to 1.
struct TableRow {
  std::vector<std::pair<TokenId, double>> cands;

  double prob(TokenId tgt) const {
    for (const auto& [t, p] : cands)
      if (t == tgt) return p;
    return 0.0;
  }
};

// Word translation table for one direction: source word -> candidate list.
class TranslationTable {
 public:
  TranslationTable() = default;
  explicit TranslationTable(Direction dir) : dir_(dir) {}

  Direction direction() const { return dir_; }
  int em_iterations() const { return em_iterations_; }
  void set_em_iterations(int n) { em_iterations_ = n; }

  const TableRow* row(TokenId src) const {
    auto it = rows_.find(src);
    return it == rows_.end() ? nullptr : &it->second;
  }
  // Normalizes, sorts and stores the row.
  void set_row(TokenId src, TableRow row);
  // Stores an already normalized and sorted row verbatim (deserialization
  // path; renormalizing would perturb the stored bits).
  void set_row_raw(TokenId src, TableRow row) { rows_[src] = std::move(row); }

  size_t size() const { return rows_.size(); }
  std::vector<TokenId> source_words() const;  // ascending id

  bool operator==(const TranslationTable& other) const;

 private:
  Direction dir_ = Direction::S2T;
  int em_iterations_ = 0;
  std::unordered_map<TokenId, TableRow> rows_;
};

// IBM Model 1 EM over (source sentence, target sentence) pairs: uniform
// initialization over co-occurring words, `iterations` EM steps, then
// add-`smoothing` over each source word's observed candidate set and a final
// renormalization. Deterministic.
TranslationTable ibm1_fit(const std::vector<std::pair<const Sentence*, const Sentence*>>& pairs,
                          Direction dir, int iterations = 5, double smoothing = 0.01,
                          int src_vocab_size = 0, int tgt_vocab_size = 0);

// Data log-likelihood of Model 1 under a table (test oracle for the
// EM monotonicity property).
double ibm1_loglik(const std::vector<std::pair<const Sentence*, const Sentence*>>& pairs,
                   const TranslationTable& table);

}  // namespace cbd
