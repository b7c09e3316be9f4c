#include "cbd/translation_table.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace cbd {

void TranslationTable::set_row(TokenId src, TableRow row) {
  if (row.cands.empty()) throw ConfigError("empty translation row");
  double sum = 0.0;
  for (const auto& [t, p] : row.cands) {
    if (p <= 0.0) throw ConfigError("non-positive candidate probability");
    sum += p;
  }
  for (auto& [t, p] : row.cands) p /= sum;
  std::sort(row.cands.begin(), row.cands.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  rows_[src] = std::move(row);
}

std::vector<TokenId> TranslationTable::source_words() const {
  std::vector<TokenId> out;
  out.reserve(rows_.size());
  for (const auto& [s, row] : rows_) out.push_back(s);
  std::sort(out.begin(), out.end());
  return out;
}

bool TranslationTable::operator==(const TranslationTable& other) const {
  if (dir_ != other.dir_ || rows_.size() != other.rows_.size()) return false;
  for (const auto& [s, row] : rows_) {
    auto it = other.rows_.find(s);
    if (it == other.rows_.end() || it->second.cands != row.cands) return false;
  }
  return true;
}

TranslationTable ibm1_fit(const std::vector<std::pair<const Sentence*, const Sentence*>>& pairs,
                          Direction dir, int iterations, double smoothing, int src_vocab_size,
                          int tgt_vocab_size) {
  if (pairs.empty()) throw InsufficientData("no pairs for table estimation");
  if (iterations < 1) throw ConfigError("EM iterations must be >= 1");

  TokenId max_s = 0, max_t = 0;
  for (const auto& [src, tgt] : pairs) {
    for (TokenId s : *src) max_s = std::max(max_s, s);
    for (TokenId t : *tgt) max_t = std::max(max_t, t);
  }
  const int64_t vs = std::max<int64_t>(max_s + 1, src_vocab_size);
  const int64_t vt = std::max<int64_t>(max_t + 1, tgt_vocab_size);
  if (vs * vt > 16'000'000)
    throw ConfigError("vocabulary too large for the dense Model 1 estimator");

  std::vector<uint8_t> cooc(static_cast<size_t>(vs * vt), 0);
  for (const auto& [src, tgt] : pairs)
    for (TokenId s : *src)
      for (TokenId t : *tgt) cooc[static_cast<size_t>(s) * vt + t] = 1;

  std::vector<std::vector<TokenId>> cands(static_cast<size_t>(vs));
  for (int64_t s = 0; s < vs; ++s)
    for (int64_t t = 0; t < vt; ++t)
      if (cooc[static_cast<size_t>(s * vt + t)]) cands[static_cast<size_t>(s)].push_back(static_cast<TokenId>(t));

  std::vector<double> prob(static_cast<size_t>(vs * vt), 0.0);
  for (int64_t s = 0; s < vs; ++s) {
    const auto& cs = cands[static_cast<size_t>(s)];
    if (cs.empty()) continue;
    double u = 1.0 / static_cast<double>(cs.size());
    for (TokenId t : cs) prob[static_cast<size_t>(s * vt + t)] = u;
  }

  std::vector<double> counts(static_cast<size_t>(vs * vt), 0.0);
  for (int iter = 0; iter < iterations; ++iter) {
    std::fill(counts.begin(), counts.end(), 0.0);
    for (const auto& [src, tgt] : pairs) {
      for (TokenId t : *tgt) {
        double denom = 0.0;
        for (TokenId s : *src) denom += prob[static_cast<size_t>(s) * vt + t];
        if (denom <= 0.0) continue;
        for (TokenId s : *src) {
          size_t idx = static_cast<size_t>(s) * vt + t;
          counts[idx] += prob[idx] / denom;
        }
      }
    }
    for (int64_t s = 0; s < vs; ++s) {
      double total = 0.0;
      for (TokenId t : cands[static_cast<size_t>(s)]) total += counts[static_cast<size_t>(s * vt + t)];
      if (total <= 0.0) continue;
      for (TokenId t : cands[static_cast<size_t>(s)]) {
        size_t idx = static_cast<size_t>(s * vt + t);
        prob[idx] = counts[idx] / total;
      }
    }
  }

  // Final table: last E-step counts with additive smoothing over the observed
  // candidate set, renormalized by set_row.
  TranslationTable table(dir);
  table.set_em_iterations(iterations);
  for (int64_t s = 0; s < vs; ++s) {
    const auto& cs = cands[static_cast<size_t>(s)];
    if (cs.empty()) continue;
    TableRow row;
    row.cands.reserve(cs.size());
    for (TokenId t : cs)
      row.cands.emplace_back(t, counts[static_cast<size_t>(s * vt + t)] + smoothing);
    table.set_row(static_cast<TokenId>(s), std::move(row));
  }
  return table;
}

double ibm1_loglik(const std::vector<std::pair<const Sentence*, const Sentence*>>& pairs,
                   const TranslationTable& table) {
  double sum = 0.0;
  for (const auto& [src, tgt] : pairs) {
    for (TokenId t : *tgt) {
      double p = 0.0;
      for (TokenId s : *src) {
        const TableRow* row = table.row(s);
        if (row) p += row->prob(t);
      }
      sum += std::log(p / static_cast<double>(src->size()));
    }
  }
  return sum;
}

}  // namespace cbd
