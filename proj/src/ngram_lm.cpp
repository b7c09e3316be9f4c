#include "cbd/ngram_lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <ostream>
#include <sstream>

namespace cbd {

std::string LanguageModel::key(std::span<const TokenId> toks) {
  std::string s(toks.size() * sizeof(TokenId), '\0');
  if (!toks.empty()) std::memcpy(s.data(), toks.data(), s.size());
  return s;
}

LanguageModel LanguageModel::train(const Corpus& corpus, int order) {
  if (order < 1 || order > 5) throw ConfigError("LM order must be in [1, 5]");
  if (corpus.empty()) throw EmptyCorpus("cannot train LM on empty corpus");
  int64_t total_tokens = 0;
  for (const auto& s : corpus.sentences) total_tokens += static_cast<int64_t>(s.size());
  if (total_tokens < order)
    throw InsufficientData("corpus has " + std::to_string(total_tokens) +
                           " tokens, need at least " + std::to_string(order));

  LanguageModel lm;
  lm.order_ = order;
  lm.vocab_ = corpus.vocab;
  lm.raw_.assign(order, {});
  std::vector<TokenId> padded;
  for (const auto& sent : corpus.sentences) {
    padded.assign(order - 1, Vocab::kBos);
    padded.insert(padded.end(), sent.begin(), sent.end());
    padded.push_back(Vocab::kEos);
    for (size_t pos = order - 1; pos < padded.size(); ++pos) {
      for (int k = 1; k <= order; ++k) {
        std::span<const TokenId> gram(padded.data() + pos - k + 1, static_cast<size_t>(k));
        ++lm.raw_[k - 1][key(gram)];
      }
    }
  }
  lm.rebuild_derived();
  return lm;
}

void LanguageModel::rebuild_derived() {
  kn_.assign(order_, {});
  ctx_.assign(order_, {});
  kn_[order_ - 1] = raw_[order_ - 1];
  // Continuation type counts: the level-k count of a k-gram is the number of
  // distinct (k+1)-gram types it suffixes.
  for (int k = order_ - 1; k >= 1; --k) {
    for (const auto& [gram, cnt] : raw_[k]) {
      (void)cnt;
      ++kn_[k - 1][gram.substr(sizeof(TokenId))];
    }
  }
  for (int k = 1; k <= order_; ++k) {
    for (const auto& [gram, cnt] : kn_[k - 1]) {
      auto& st = ctx_[k - 1][gram.substr(0, gram.size() - sizeof(TokenId))];
      st.total += cnt;
      st.distinct += 1;
    }
  }
}

double LanguageModel::prob_at(int k, std::span<const TokenId> context, TokenId next) const {
  if (k == 0) return 1.0 / (vocab_->size() - 1);  // uniform, <bos> excluded
  double lower = prob_at(k - 1, context.empty() ? context : context.subspan(1), next);
  auto it = ctx_[k - 1].find(key(context));
  if (it == ctx_[k - 1].end() || it->second.total == 0) return lower;
  const ContextStats& st = it->second;
  std::string gram = key(context);
  gram.append(reinterpret_cast<const char*>(&next), sizeof(TokenId));
  auto git = kn_[k - 1].find(gram);
  double cnt = git == kn_[k - 1].end() ? 0.0 : static_cast<double>(git->second);
  double total = static_cast<double>(st.total);
  return std::max(cnt - kDiscount, 0.0) / total + kDiscount * st.distinct / total * lower;
}

LanguageModel::Step LanguageModel::make_step(std::span<const TokenId> prefix) const {
  if (!trained()) throw ConfigError("language model not trained");
  std::vector<TokenId> context(order_ - 1, Vocab::kBos);
  size_t keep = std::min(prefix.size(), static_cast<size_t>(order_ - 1));
  for (size_t i = 0; i < keep; ++i)
    context[order_ - 1 - keep + i] = prefix[prefix.size() - keep + i];

  Step step;
  step.uniform = 1.0 / (vocab_->size() - 1);
  step.levels.resize(static_cast<size_t>(order_));
  for (int k = 1; k <= order_; ++k) {
    // level-k context: the last k-1 tokens
    std::span<const TokenId> ctx(context.data() + (order_ - k), static_cast<size_t>(k - 1));
    Step::Level& level = step.levels[static_cast<size_t>(k - 1)];
    level.ctx_key = key(ctx);
    auto it = ctx_[k - 1].find(level.ctx_key);
    if (it != ctx_[k - 1].end() && it->second.total > 0) {
      level.present = true;
      level.total = static_cast<double>(it->second.total);
      level.backoff = kDiscount * it->second.distinct / level.total;
    }
  }
  return step;
}

double LanguageModel::step_prob(const Step& step, TokenId next) const {
  if (next == Vocab::kBos) return 0.0;
  double p = step.uniform;
  std::string gram;
  for (int k = 1; k <= order_; ++k) {
    const Step::Level& level = step.levels[static_cast<size_t>(k - 1)];
    if (!level.present) continue;
    gram.assign(level.ctx_key);
    gram.append(reinterpret_cast<const char*>(&next), sizeof(TokenId));
    auto git = kn_[k - 1].find(gram);
    double cnt = git == kn_[k - 1].end() ? 0.0 : static_cast<double>(git->second);
    p = std::max(cnt - kDiscount, 0.0) / level.total + level.backoff * p;
  }
  return p;
}

double LanguageModel::prob(TokenId next, std::span<const TokenId> prefix) const {
  if (!trained()) throw ConfigError("language model not trained");
  if (next == Vocab::kBos) return 0.0;
  std::vector<TokenId> context(order_ - 1, Vocab::kBos);
  size_t keep = std::min(prefix.size(), static_cast<size_t>(order_ - 1));
  for (size_t i = 0; i < keep; ++i)
    context[order_ - 1 - keep + i] = prefix[prefix.size() - keep + i];
  return prob_at(order_, context, next);
}

std::vector<double> LanguageModel::next_token_dist(std::span<const TokenId> prefix) const {
  std::vector<double> dist(static_cast<size_t>(vocab_->size()), 0.0);
  for (TokenId id = 0; id < vocab_->size(); ++id)
    if (id != Vocab::kBos) dist[static_cast<size_t>(id)] = prob(id, prefix);
  return dist;
}

double LanguageModel::logprob(const Sentence& sentence) const {
  validate_sentence(sentence, *vocab_);
  double sum = 0.0;
  for (size_t i = 0; i <= sentence.size(); ++i) {
    TokenId next = i < sentence.size() ? sentence[i] : Vocab::kEos;
    sum += std::log(prob(next, std::span<const TokenId>(sentence.data(), i)));
  }
  return sum;
}

double LanguageModel::perplexity(const Corpus& corpus) const {
  double log_sum = 0.0;
  int64_t events = 0;
  for (const auto& sent : corpus.sentences) {
    log_sum += logprob(sent);
    events += static_cast<int64_t>(sent.size()) + 1;
  }
  return std::exp(-log_sum / static_cast<double>(events));
}

void LanguageModel::dump(std::ostream& os) const {
  std::vector<std::string> lines;
  for (const auto& [gram, cnt] : raw_[order_ - 1]) {
    (void)cnt;
    const auto* ids = reinterpret_cast<const TokenId*>(gram.data());
    size_t n = gram.size() / sizeof(TokenId);
    std::string ctx;
    for (size_t i = 0; i + 1 < n; ++i) {
      if (i) ctx += ' ';
      ctx += vocab_->surface(ids[i]);
    }
    std::span<const TokenId> context(ids, n - 1);
    double lp = std::log(prob_at(order_, context, ids[n - 1]));
    std::ostringstream line;
    line << ctx << '\t' << vocab_->surface(ids[n - 1]) << '\t' << lp;
    lines.push_back(line.str());
  }
  std::sort(lines.begin(), lines.end());
  for (const auto& l : lines) os << l << '\n';
}

void LanguageModel::save(std::ostream& os) const {
  os << "order " << order_ << '\n';
  for (int k = 1; k <= order_; ++k) {
    std::vector<std::pair<std::vector<TokenId>, int64_t>> rows;
    for (const auto& [gram, cnt] : raw_[k - 1]) {
      const auto* ids = reinterpret_cast<const TokenId*>(gram.data());
      rows.emplace_back(std::vector<TokenId>(ids, ids + k), cnt);
    }
    std::sort(rows.begin(), rows.end());
    os << "grams " << k << ' ' << rows.size() << '\n';
    for (const auto& [ids, cnt] : rows) {
      for (TokenId t : ids) os << t << ' ';
      os << cnt << '\n';
    }
  }
}

LanguageModel LanguageModel::load(std::istream& is, std::shared_ptr<const Vocab> vocab) {
  LanguageModel lm;
  lm.vocab_ = std::move(vocab);
  std::string word;
  if (!(is >> word) || word != "order" || !(is >> lm.order_) || lm.order_ < 1 || lm.order_ > 5)
    throw IoError("malformed LM header");
  lm.raw_.assign(lm.order_, {});
  for (int k = 1; k <= lm.order_; ++k) {
    size_t count = 0;
    if (!(is >> word) || word != "grams") throw IoError("malformed LM gram section");
    int kk;
    if (!(is >> kk >> count) || kk != k) throw IoError("unexpected LM gram order");
    std::vector<TokenId> ids(static_cast<size_t>(k));
    for (size_t i = 0; i < count; ++i) {
      int64_t cnt;
      for (int j = 0; j < k; ++j)
        if (!(is >> ids[static_cast<size_t>(j)])) throw IoError("truncated LM grams");
      if (!(is >> cnt)) throw IoError("truncated LM gram count");
      lm.raw_[k - 1][key(ids)] = cnt;
    }
  }
  lm.rebuild_derived();
  return lm;
}

bool LanguageModel::operator==(const LanguageModel& other) const {
  return order_ == other.order_ && raw_ == other.raw_;
}

LanguageModel train_lm(const Corpus& corpus, int order) {
  return LanguageModel::train(corpus, order);
}

double lm_logprob(const LanguageModel& lm, const Sentence& sentence) {
  return lm.logprob(sentence);
}

}  // namespace cbd
