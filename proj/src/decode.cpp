#include <algorithm>
#include <cmath>
#include <thread>

#include "cbd/agent.hpp"
#include "cbd/rng.hpp"

namespace cbd {

namespace {

// Coverage state of one agent while decoding one hypothesis: which source
// positions its channel has already explained.
struct Coverage {
  std::vector<bool> consumed;
  int left = 0;  // unconsumed count

  explicit Coverage(size_t src_len) : consumed(src_len, false), left(static_cast<int>(src_len)) {}
};

// Allowed positions at output step `out_pos`: unconsumed j with
// |j - out_pos| <= window.
template <typename Fn>
void for_allowed(const Coverage& cov, int out_pos, int window, Fn&& fn) {
  int lo = std::max(0, out_pos - window);
  int hi = std::min(static_cast<int>(cov.consumed.size()) - 1, out_pos + window);
  for (int j = lo; j <= hi; ++j)
    if (!cov.consumed[j]) fn(j);
}

// Marks the source position that best explains the emitted token (ties to the
// smallest position). No-op when no position is allowed.
void consume(const Agent& agent, Direction dir, const Sentence& src, Coverage& cov, int out_pos,
             TokenId emitted) {
  const TranslationTable& table = agent.table(dir);
  int best_j = -1;
  double best_p = -1.0;
  for_allowed(cov, out_pos, agent.reorder_window, [&](int j) {
    const TableRow* row = table.row(src[static_cast<size_t>(j)]);
    double p = 0.0;
    if (row) {
      p = row->prob(emitted);
    } else if (emitted == Vocab::kUnk) {
      p = 1.0;  // missing rows act as <unk> -> <unk>
    }
    if (p > best_p) {
      best_p = p;
      best_j = j;
    }
  });
  if (best_j >= 0) {
    cov.consumed[static_cast<size_t>(best_j)] = true;
    --cov.left;
  }
}

// One agent's unnormalized step scores into `scores` (dense over the target
// vocab). Returns false when the agent is in the <eos>-only state.
bool channel_lm_scores(const Agent& agent, Direction dir, const Sentence& src,
                       const Coverage& cov, const LanguageModel::Step& lm_step, int out_pos,
                       std::vector<double>& scores) {
  const TranslationTable& table = agent.table(dir);
  const LanguageModel& lm = agent.target_lm(dir);
  std::fill(scores.begin(), scores.end(), 0.0);

  bool any = false;
  for_allowed(cov, out_pos, agent.reorder_window, [&](int j) {
    any = true;
    const TableRow* row = table.row(src[static_cast<size_t>(j)]);
    if (row) {
      for (const auto& [t, p] : row->cands) {
        double& slot = scores[static_cast<size_t>(t)];
        if (p > slot) slot = p;
      }
    } else {
      double& slot = scores[static_cast<size_t>(Vocab::kUnk)];
      if (1.0 > slot) slot = 1.0;
    }
  });
  if (!any) return false;

  const double lambda = agent.lm_weight;
  for (size_t t = 0; t < scores.size(); ++t) {
    if (scores[t] <= 0.0) continue;
    double channel = lambda == 1.0 ? 1.0 : std::pow(scores[t], 1.0 - lambda);
    double lmp = lambda == 0.0 ? 1.0 : std::pow(lm.step_prob(lm_step, static_cast<TokenId>(t)), lambda);
    scores[t] = channel * lmp;
  }
  return true;
}

void normalize(std::vector<double>& dist) {
  double sum = 0.0;
  for (double v : dist) sum += v;
  if (sum <= 0.0) throw ConfigError("decoder step distribution has no support");
  for (double& v : dist) v /= sum;
}

// Mean of the member distributions; members in the <eos>-only state
// contribute a point mass on <eos>.
void merged_step_dist(const std::vector<const Agent*>& agents, Direction dir, const Sentence& src,
                      const std::vector<Coverage>& covs, const Sentence& prefix,
                      std::vector<double>& dist, std::vector<double>& scratch) {
  std::fill(dist.begin(), dist.end(), 0.0);
  const double w = 1.0 / static_cast<double>(agents.size());
  for (size_t a = 0; a < agents.size(); ++a) {
    const Agent& agent = *agents[a];
    LanguageModel::Step lm_step = agent.target_lm(dir).make_step(prefix);
    if (channel_lm_scores(agent, dir, src, covs[a], lm_step, static_cast<int>(prefix.size()),
                          scratch)) {
      normalize(scratch);
      for (size_t t = 0; t < dist.size(); ++t) dist[t] += w * scratch[t];
    } else {
      dist[static_cast<size_t>(Vocab::kEos)] += w;
    }
  }
}

TokenId select_greedy(const std::vector<double>& dist) {
  size_t best = 0;
  for (size_t t = 1; t < dist.size(); ++t)
    if (dist[t] > dist[best]) best = t;
  return static_cast<TokenId>(best);
}

// Candidates ordered by (prob desc, id asc); the order fixes cumulative-sum
// sampling and truncation ties.
std::vector<std::pair<TokenId, double>> sorted_support(const std::vector<double>& dist) {
  std::vector<std::pair<TokenId, double>> out;
  for (size_t t = 0; t < dist.size(); ++t)
    if (dist[t] > 0.0) out.emplace_back(static_cast<TokenId>(t), dist[t]);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

TokenId select_sampling(const std::vector<double>& dist, const DecodeConfig& dc, Rng& rng) {
  auto cands = sorted_support(dist);
  switch (dc.strategy) {
    case DecodeStrategy::SampleTemperature: {
      double pmax = cands.front().second;
      for (auto& [t, p] : cands) p = std::pow(p / pmax, 1.0 / dc.temperature);
      break;
    }
    case DecodeStrategy::TopK:
      if (cands.size() > static_cast<size_t>(dc.top_k)) cands.resize(static_cast<size_t>(dc.top_k));
      break;
    case DecodeStrategy::TopP: {
      double cum = 0.0;
      size_t keep = cands.size();
      for (size_t i = 0; i < cands.size(); ++i) {
        cum += cands[i].second;
        if (cum >= dc.top_p - 1e-12) {
          keep = i + 1;
          break;
        }
      }
      cands.resize(keep);
      break;
    }
    default:
      throw ConfigError("not a sampling strategy");
  }
  double total = 0.0;
  for (const auto& [t, p] : cands) total += p;
  double u = rng.uniform() * total;
  double cum = 0.0;
  for (const auto& [t, p] : cands) {
    cum += p;
    if (cum > u) return t;
  }
  return cands.back().first;
}

struct Hypothesis {
  Sentence tokens;
  std::vector<Coverage> covs;
  double logscore = 0.0;
};

Sentence decode_beam(const std::vector<const Agent*>& agents, const Sentence& src, Direction dir,
                     const DecodeConfig& dc, size_t max_steps) {
  struct Finished {
    Sentence tokens;
    double logscore;
  };
  std::vector<Hypothesis> live;
  live.push_back({{}, std::vector<Coverage>(agents.size(), Coverage(src.size())), 0.0});
  std::vector<Finished> finished;

  std::vector<double> dist(static_cast<size_t>(agents[0]->tgt_vocab(dir).size()));
  std::vector<double> scratch(dist.size());

  struct Expansion {
    double logscore;
    double step_prob;
    size_t hyp;
    TokenId token;
  };

  for (size_t step = 0; step < max_steps && !live.empty(); ++step) {
    std::vector<Expansion> expansions;
    for (size_t h = 0; h < live.size(); ++h) {
      merged_step_dist(agents, dir, src, live[h].covs, live[h].tokens, dist, scratch);
      for (size_t t = 0; t < dist.size(); ++t) {
        if (dist[t] <= 0.0) continue;
        expansions.push_back({live[h].logscore + std::log(dist[t]), dist[t], h,
                              static_cast<TokenId>(t)});
      }
    }
    std::sort(expansions.begin(), expansions.end(), [](const Expansion& a, const Expansion& b) {
      if (a.logscore != b.logscore) return a.logscore > b.logscore;
      if (a.step_prob != b.step_prob) return a.step_prob > b.step_prob;
      if (a.hyp != b.hyp) return a.hyp < b.hyp;
      return a.token < b.token;
    });
    size_t keep = std::min(expansions.size(), static_cast<size_t>(dc.beam_size));

    std::vector<Hypothesis> next;
    for (size_t i = 0; i < keep; ++i) {
      const Expansion& e = expansions[i];
      if (e.token == Vocab::kEos) {
        finished.push_back({live[e.hyp].tokens, e.logscore});
        continue;
      }
      Hypothesis h = live[e.hyp];
      h.logscore = e.logscore;
      for (size_t a = 0; a < agents.size(); ++a)
        consume(*agents[a], dir, src, h.covs[a], static_cast<int>(h.tokens.size()), e.token);
      h.tokens.push_back(e.token);
      next.push_back(std::move(h));
    }
    live = std::move(next);
  }
  for (auto& h : live) finished.push_back({std::move(h.tokens), h.logscore});  // cap reached

  const Finished* best = nullptr;
  for (const auto& f : finished)
    if (!best || f.logscore > best->logscore ||
        (f.logscore == best->logscore && f.tokens < best->tokens))
      best = &f;
  return best->tokens;
}

Sentence decode_sequential(const std::vector<const Agent*>& agents, const Sentence& src,
                           Direction dir, const DecodeConfig& dc, uint64_t sentence_index,
                           size_t max_steps) {
  Rng rng(mix64(dc.seed, sentence_index));
  Sentence out;
  std::vector<Coverage> covs(agents.size(), Coverage(src.size()));
  std::vector<double> dist(static_cast<size_t>(agents[0]->tgt_vocab(dir).size()));
  std::vector<double> scratch(dist.size());

  while (out.size() < max_steps) {
    merged_step_dist(agents, dir, src, covs, out, dist, scratch);
    TokenId next = dc.strategy == DecodeStrategy::Greedy ? select_greedy(dist)
                                                         : select_sampling(dist, dc, rng);
    if (next == Vocab::kEos) break;
    for (size_t a = 0; a < agents.size(); ++a)
      consume(*agents[a], dir, src, covs[a], static_cast<int>(out.size()), next);
    out.push_back(next);
  }
  return out;
}

size_t output_cap(const std::vector<const Agent*>& agents, const Sentence& src,
                  const DecodeConfig& dc) {
  int window = 0;
  for (const Agent* a : agents) window = std::max(window, a->reorder_window);
  return std::max(src.size() + static_cast<size_t>(window), static_cast<size_t>(dc.max_out_len));
}

void check_ensemble(const std::vector<const Agent*>& agents) {
  if (agents.empty()) throw ConfigError("need at least one agent");
  for (size_t i = 1; i < agents.size(); ++i) {
    const bool same = (agents[i]->vocab_s == agents[0]->vocab_s ||
                       *agents[i]->vocab_s == *agents[0]->vocab_s) &&
                      (agents[i]->vocab_t == agents[0]->vocab_t ||
                       *agents[i]->vocab_t == *agents[0]->vocab_t);
    if (!same) throw EnsembleMismatch("ensemble members use different vocabularies");
  }
}

}  // namespace

void DecodeConfig::validate() const {
  if (beam_size < 1) throw ConfigError("beam size must be >= 1");
  if (temperature <= 0.0) throw ConfigError("temperature must be > 0");
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  if (top_p <= 0.0 || top_p > 1.0) throw ConfigError("top_p must be in (0, 1]");
  if (max_out_len < 1) throw ConfigError("max_out_len must be >= 1");
}

DecodeStrategy strategy_from_string(const std::string& name) {
  if (name == "greedy") return DecodeStrategy::Greedy;
  if (name == "beam") return DecodeStrategy::Beam;
  if (name == "temp" || name == "temperature") return DecodeStrategy::SampleTemperature;
  if (name == "top-k" || name == "top_k") return DecodeStrategy::TopK;
  if (name == "top-p" || name == "top_p") return DecodeStrategy::TopP;
  throw ConfigError("unknown decode strategy: " + name);
}

std::string to_string(DecodeStrategy s) {
  switch (s) {
    case DecodeStrategy::Greedy: return "greedy";
    case DecodeStrategy::Beam: return "beam";
    case DecodeStrategy::SampleTemperature: return "temp";
    case DecodeStrategy::TopK: return "top-k";
    case DecodeStrategy::TopP: return "top-p";
  }
  return "greedy";
}

std::vector<double> next_token_distribution(const Agent& agent, const Sentence& src,
                                            const Sentence& prefix, Direction dir) {
  if (prefix.size() > src.size() + static_cast<size_t>(agent.reorder_window))
    throw ConfigError("prefix longer than source plus reorder window");
  // Replay the coverage decisions the decoder would have made along prefix.
  Coverage cov(src.size());
  for (size_t i = 0; i < prefix.size(); ++i)
    consume(agent, dir, src, cov, static_cast<int>(i), prefix[i]);

  std::vector<double> dist(static_cast<size_t>(agent.tgt_vocab(dir).size()), 0.0);
  LanguageModel::Step lm_step = agent.target_lm(dir).make_step(prefix);
  if (channel_lm_scores(agent, dir, src, cov, lm_step, static_cast<int>(prefix.size()), dist)) {
    normalize(dist);
  } else {
    dist[static_cast<size_t>(Vocab::kEos)] = 1.0;
  }
  return dist;
}

Sentence ensemble_translate(const std::vector<const Agent*>& agents, const Sentence& src,
                            Direction dir, const DecodeConfig& dc, uint64_t sentence_index) {
  check_ensemble(agents);
  dc.validate();
  validate_sentence(src, agents[0]->src_vocab(dir));
  size_t cap = output_cap(agents, src, dc);
  if (dc.strategy == DecodeStrategy::Beam) return decode_beam(agents, src, dir, dc, cap);
  return decode_sequential(agents, src, dir, dc, sentence_index, cap);
}

Sentence translate(const Agent& agent, const Sentence& src, Direction dir, const DecodeConfig& dc,
                   uint64_t sentence_index) {
  return ensemble_translate({&agent}, src, dir, dc, sentence_index);
}

std::vector<Sentence> translate_corpus(const std::vector<const Agent*>& agents,
                                       const std::vector<Sentence>& sents, Direction dir,
                                       const DecodeConfig& dc, int threads,
                                       uint64_t index_offset) {
  check_ensemble(agents);
  std::vector<Sentence> out(sents.size());
  auto work = [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i)
      out[i] = ensemble_translate(agents, sents[i], dir, dc, index_offset + i);
  };
  if (threads <= 1 || sents.size() < 2) {
    work(0, sents.size());
    return out;
  }
  size_t n_workers = std::min<size_t>(static_cast<size_t>(threads), sents.size());
  std::vector<std::thread> pool;
  size_t chunk = (sents.size() + n_workers - 1) / n_workers;
  for (size_t w = 0; w < n_workers; ++w) {
    size_t begin = w * chunk;
    size_t end = std::min(sents.size(), begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(work, begin, end);
  }
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace cbd
