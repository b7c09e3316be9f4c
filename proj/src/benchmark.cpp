#include "cbd/benchmark.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "cbd/rng.hpp"

namespace cbd {

namespace {

constexpr uint64_t kGenStream = 0x67656e62ull;  // generator RNG domain

void validate(const GeneratorConfig& cfg) {
  if (cfg.vocab_size < 10) throw ConfigError("vocab_size must be >= 10");
  if (cfg.sentences_per_side < 100) throw ConfigError("sentences_per_side must be >= 100");
  if (cfg.swap_prob < 0.0 || cfg.swap_prob > 0.5)
    throw ConfigError("swap_prob must be in [0, 0.5]");
  if (cfg.test_size < 1) throw ConfigError("test_size must be >= 1");
  if (cfg.test_size >= cfg.sentences_per_side)
    throw ConfigError("test_size must be smaller than sentences_per_side");
  if (cfg.min_len < 1 || cfg.max_len < cfg.min_len || cfg.max_len > kMaxSentenceLen)
    throw ConfigError("sentence length bounds invalid");
  if (cfg.successor_pool < 1) throw ConfigError("successor_pool must be >= 1");
  if (cfg.zipf_exponent <= 0.0) throw ConfigError("zipf_exponent must be positive");
}

std::string rank_word(char prefix, int rank, int width) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%c%0*d", prefix, width, rank);
  return buf;
}

// Base sentence sampler: order-2 generator with Zipf-weighted successor pools.
class BaseSampler {
 public:
  BaseSampler(const GeneratorConfig& cfg, Rng& rng) : cfg_(cfg), rng_(rng) {
    const int v = cfg.vocab_size;
    zipf_cum_.resize(v);
    double acc = 0.0;
    for (int r = 0; r < v; ++r) {
      acc += std::pow(static_cast<double>(r + 1), -cfg.zipf_exponent);
      zipf_cum_[r] = acc;
    }
    const int pool = std::min(cfg.successor_pool, v);
    pools_.resize(v);
    pool_cums_.resize(v);
    for (int r = 0; r < v; ++r) {
      std::unordered_set<int> seen;
      auto& members = pools_[r];
      while (static_cast<int>(members.size()) < pool) {
        int cand = static_cast<int>(rng_.weighted(zipf_cum_));
        if (seen.insert(cand).second) members.push_back(cand);
      }
      std::sort(members.begin(), members.end());
      auto& cum = pool_cums_[r];
      cum.resize(members.size());
      acc = 0.0;
      for (size_t i = 0; i < members.size(); ++i) {
        acc += std::pow(static_cast<double>(members[i] + 1), -cfg.zipf_exponent);
        cum[i] = acc;
      }
    }
  }

  // Ranks, not vocab ids.
  std::vector<int> sample() {
    int len = rng_.range(cfg_.min_len, cfg_.max_len);
    std::vector<int> out;
    out.reserve(len);
    int cur = static_cast<int>(rng_.weighted(zipf_cum_));
    out.push_back(cur);
    for (int i = 1; i < len; ++i) {
      cur = pools_[cur][rng_.weighted(pool_cums_[cur])];
      out.push_back(cur);
    }
    return out;
  }

 private:
  const GeneratorConfig& cfg_;
  Rng& rng_;
  std::vector<double> zipf_cum_;
  std::vector<std::vector<int>> pools_;
  std::vector<std::vector<double>> pool_cums_;
};

std::vector<int> sample_swaps(size_t len, double p, Rng& rng) {
  std::vector<int> swaps;
  size_t i = 0;
  while (i + 1 < len) {
    if (rng.bernoulli(p)) {
      swaps.push_back(static_cast<int>(i));
      i += 2;
    } else {
      ++i;
    }
  }
  return swaps;
}

struct RankVectorHash {
  size_t operator()(const std::vector<int>& v) const {
    uint64_t h = 0x9e3779b97f4a7c15ull;
    for (int t : v) h = (h ^ static_cast<uint64_t>(t)) * 0x100000001b3ull;
    return static_cast<size_t>(h);
  }
};

std::shared_ptr<const Vocab> vocab_from_rank_counts(char prefix, int vocab_size, int width,
                                                    const std::vector<int64_t>& counts) {
  std::vector<std::pair<std::string, int64_t>> entries;
  entries.reserve(vocab_size);
  for (int r = 0; r < vocab_size; ++r)
    entries.emplace_back(rank_word(prefix, r, width), std::max<int64_t>(1, counts[r]));
  return std::make_shared<Vocab>(Vocab::from_counts(std::move(entries)));
}

Sentence ranks_to_ids(const std::vector<int>& ranks, const Vocab& vocab, char prefix, int width) {
  Sentence out;
  out.reserve(ranks.size());
  for (int r : ranks) out.push_back(vocab.id(rank_word(prefix, r, width)));
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Sentence apply_swaps(const Sentence& s, const std::vector<int>& swaps) {
  Sentence out = s;
  for (int pos : swaps) {
    if (pos < 0 || pos + 1 >= static_cast<int>(out.size()))
      throw ConfigError("swap position out of range");
    std::swap(out[pos], out[pos + 1]);
  }
  return out;
}

Sentence BenchmarkSet::lexicon_translate(const Sentence& src) const {
  Sentence out;
  out.reserve(src.size());
  for (TokenId t : src) {
    auto it = gold_lexicon.find(t);
    if (it == gold_lexicon.end())
      throw ConfigError("token " + std::to_string(t) + " not in gold lexicon");
    out.push_back(it->second);
  }
  return out;
}

Sentence BenchmarkSet::lexicon_translate_back(const Sentence& tgt) const {
  Sentence out;
  out.reserve(tgt.size());
  for (TokenId t : tgt) {
    bool found = false;
    for (const auto& [s, img] : gold_lexicon) {
      if (img == t) {
        out.push_back(s);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("token " + std::to_string(t) + " has no lexicon preimage");
  }
  return out;
}

BenchmarkSet generate_language_pair(const GeneratorConfig& cfg, uint64_t seed) {
  validate(cfg);
  Rng rng(mix64(seed, kGenStream));
  const int v = cfg.vocab_size;
  const int width = static_cast<int>(std::to_string(v - 1).size());
  BaseSampler sampler(cfg, rng);

  // Language-s corpus (rank space).
  const int n = cfg.sentences_per_side;
  std::vector<std::vector<int>> s_base(n);
  std::unordered_set<std::vector<int>, RankVectorHash> s_set;
  for (int i = 0; i < n; ++i) {
    s_base[i] = sampler.sample();
    s_set.insert(s_base[i]);
  }

  // Bijective lexicon over ranks.
  std::vector<int> perm(v);
  for (int r = 0; r < v; ++r) perm[r] = r;
  for (int r = v - 1; r > 0; --r)
    std::swap(perm[r], perm[rng.below(static_cast<uint64_t>(r + 1))]);

  auto map_ranks = [&](const std::vector<int>& ranks) {
    std::vector<int> out;
    out.reserve(ranks.size());
    for (int r : ranks) out.push_back(perm[r]);
    return out;
  };

  // Language-t corpus from a disjoint base sample, so the sides are
  // non-parallel by construction.
  const int64_t max_attempts = 1000LL * n + 1000;
  int64_t attempts = 0;
  std::vector<std::vector<int>> t_base(n), t_ranks(n);
  std::vector<std::vector<int>> t_swaps(n);
  std::unordered_set<std::vector<int>, RankVectorHash> t_set;
  for (int i = 0; i < n; ++i) {
    std::vector<int> base;
    do {
      if (++attempts > max_attempts)
        throw ConfigError("cannot sample a disjoint target side; config infeasible");
      base = sampler.sample();
    } while (s_set.count(base));
    t_base[i] = base;
    t_swaps[i] = sample_swaps(base.size(), cfg.swap_prob, rng);
    std::vector<int> image = map_ranks(base);
    for (int pos : t_swaps[i]) std::swap(image[pos], image[pos + 1]);
    t_ranks[i] = image;
    t_set.insert(image);
  }

  // Held-out test pairs, disjoint from both monolingual sides.
  std::vector<std::vector<int>> test_src(cfg.test_size), test_tgt(cfg.test_size);
  std::vector<std::vector<int>> test_swaps(cfg.test_size);
  attempts = 0;
  const int64_t max_test_attempts = 1000LL * cfg.test_size + 1000;
  for (int i = 0; i < cfg.test_size; ++i) {
    for (;;) {
      if (++attempts > max_test_attempts)
        throw ConfigError("cannot sample disjoint test pairs; config infeasible");
      std::vector<int> base = sampler.sample();
      if (s_set.count(base)) continue;
      std::vector<int> swaps = sample_swaps(base.size(), cfg.swap_prob, rng);
      std::vector<int> image = map_ranks(base);
      for (int pos : swaps) std::swap(image[pos], image[pos + 1]);
      if (t_set.count(image)) continue;
      test_src[i] = std::move(base);
      test_tgt[i] = std::move(image);
      test_swaps[i] = std::move(swaps);
      break;
    }
  }

  // Vocabularies with observed monolingual frequencies (floor 1).
  std::vector<int64_t> s_counts(v, 0), t_counts(v, 0);
  for (const auto& sent : s_base)
    for (int r : sent) ++s_counts[r];
  for (const auto& sent : t_ranks)
    for (int r : sent) ++t_counts[r];
  auto vocab_s = vocab_from_rank_counts('s', v, width, s_counts);
  auto vocab_t = vocab_from_rank_counts('t', v, width, t_counts);

  BenchmarkSet bench;
  bench.config = cfg;
  bench.seed = seed;
  bench.mono_s.lang = Lang::S;
  bench.mono_s.vocab = vocab_s;
  bench.mono_t.lang = Lang::T;
  bench.mono_t.vocab = vocab_t;
  for (int i = 0; i < n; ++i) {
    bench.mono_s.sentences.push_back(ranks_to_ids(s_base[i], *vocab_s, 's', width));
    bench.mono_t.sentences.push_back(ranks_to_ids(t_ranks[i], *vocab_t, 't', width));
    bench.mono_t_base.push_back(ranks_to_ids(t_base[i], *vocab_s, 's', width));
  }
  bench.mono_t_swaps = std::move(t_swaps);
  for (int r = 0; r < v; ++r)
    bench.gold_lexicon.emplace(vocab_s->id(rank_word('s', r, width)),
                               vocab_t->id(rank_word('t', perm[r], width)));
  for (int i = 0; i < cfg.test_size; ++i)
    bench.test_pairs.emplace_back(ranks_to_ids(test_src[i], *vocab_s, 's', width),
                                  ranks_to_ids(test_tgt[i], *vocab_t, 't', width));
  bench.test_swaps = std::move(test_swaps);
  return bench;
}

void write_benchmark(const BenchmarkSet& bench, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_corpus(bench.mono_s, dir + "/mono.s.txt");
  write_corpus(bench.mono_t, dir + "/mono.t.txt");

  std::ofstream ts(dir + "/test.s.txt", std::ios::binary);
  std::ofstream tt(dir + "/test.t.txt", std::ios::binary);
  if (!ts || !tt) throw IoError("cannot write test files under " + dir);
  for (const auto& [src, tgt] : bench.test_pairs) {
    ts << to_line(src, *bench.mono_s.vocab) << '\n';
    tt << to_line(tgt, *bench.mono_t.vocab) << '\n';
  }

  std::ofstream lex(dir + "/lexicon.tsv", std::ios::binary);
  if (!lex) throw IoError("cannot write lexicon under " + dir);
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& [s, t] : bench.gold_lexicon)
    rows.emplace_back(bench.mono_s.vocab->surface(s), bench.mono_t.vocab->surface(t));
  std::sort(rows.begin(), rows.end());
  for (const auto& [s, t] : rows) lex << s << '\t' << t << '\n';

  std::ofstream meta(dir + "/meta.txt", std::ios::binary);
  if (!meta) throw IoError("cannot write meta under " + dir);
  meta << "seed = " << bench.seed << '\n'
       << "vocab_size = " << bench.config.vocab_size << '\n'
       << "sentences_per_side = " << bench.config.sentences_per_side << '\n'
       << "test_size = " << bench.config.test_size << '\n'
       << "swap_prob = " << format_double(bench.config.swap_prob) << '\n'
       << "zipf_exponent = " << format_double(bench.config.zipf_exponent) << '\n'
       << "min_len = " << bench.config.min_len << '\n'
       << "max_len = " << bench.config.max_len << '\n'
       << "successor_pool = " << bench.config.successor_pool << '\n';
}

BenchmarkSet load_benchmark(const std::string& dir) {
  std::ifstream meta(dir + "/meta.txt");
  if (!meta) throw IoError("cannot open " + dir + "/meta.txt");
  BenchmarkSet bench;
  std::string line;
  while (std::getline(meta, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
    };
    trim(key);
    trim(val);
    if (key == "seed") bench.seed = std::stoull(val);
    else if (key == "vocab_size") bench.config.vocab_size = std::stoi(val);
    else if (key == "sentences_per_side") bench.config.sentences_per_side = std::stoi(val);
    else if (key == "test_size") bench.config.test_size = std::stoi(val);
    else if (key == "swap_prob") bench.config.swap_prob = std::stod(val);
    else if (key == "zipf_exponent") bench.config.zipf_exponent = std::stod(val);
    else if (key == "min_len") bench.config.min_len = std::stoi(val);
    else if (key == "max_len") bench.config.max_len = std::stoi(val);
    else if (key == "successor_pool") bench.config.successor_pool = std::stoi(val);
    else throw IoError("unknown benchmark meta key: " + key);
  }

  std::ifstream lex(dir + "/lexicon.tsv");
  if (!lex) throw IoError("cannot open " + dir + "/lexicon.tsv");
  std::vector<std::pair<std::string, std::string>> lex_rows;
  while (std::getline(lex, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw IoError("malformed lexicon line: " + line);
    std::string t = line.substr(tab + 1);
    if (!t.empty() && t.back() == '\r') t.pop_back();
    lex_rows.emplace_back(line.substr(0, tab), t);
  }

  auto count_tokens = [](const std::string& path, std::map<std::string, int64_t>& counts) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string ln, tok;
    while (std::getline(in, ln)) {
      std::istringstream is(ln);
      while (is >> tok) ++counts[tok];
    }
  };
  std::map<std::string, int64_t> s_counts, t_counts;
  count_tokens(dir + "/mono.s.txt", s_counts);
  count_tokens(dir + "/mono.t.txt", t_counts);

  std::vector<std::pair<std::string, int64_t>> s_entries, t_entries;
  for (const auto& [s, t] : lex_rows) {
    auto si = s_counts.find(s);
    auto ti = t_counts.find(t);
    s_entries.emplace_back(s, si == s_counts.end() ? 1 : std::max<int64_t>(1, si->second));
    t_entries.emplace_back(t, ti == t_counts.end() ? 1 : std::max<int64_t>(1, ti->second));
  }
  auto vocab_s = std::make_shared<Vocab>(Vocab::from_counts(std::move(s_entries)));
  auto vocab_t = std::make_shared<Vocab>(Vocab::from_counts(std::move(t_entries)));

  bench.mono_s = read_corpus(dir + "/mono.s.txt", vocab_s, Lang::S);
  bench.mono_t = read_corpus(dir + "/mono.t.txt", vocab_t, Lang::T);
  for (const auto& [s, t] : lex_rows) bench.gold_lexicon.emplace(vocab_s->id(s), vocab_t->id(t));

  Corpus test_s = read_corpus(dir + "/test.s.txt", vocab_s, Lang::S);
  Corpus test_t = read_corpus(dir + "/test.t.txt", vocab_t, Lang::T);
  if (test_s.size() != test_t.size()) throw IoError("test files are not line-aligned");
  for (size_t i = 0; i < test_s.size(); ++i) {
    const Sentence& src = test_s.sentences[i];
    const Sentence& tgt = test_t.sentences[i];
    Sentence image = bench.lexicon_translate(src);
    if (image.size() != tgt.size()) throw IoError("test pair " + std::to_string(i) + " misaligned");
    std::vector<int> swaps;
    for (size_t j = 0; j < image.size();) {
      if (image[j] == tgt[j]) {
        ++j;
      } else if (j + 1 < image.size() && image[j] == tgt[j + 1] && image[j + 1] == tgt[j]) {
        swaps.push_back(static_cast<int>(j));
        j += 2;
      } else {
        throw IoError("test pair " + std::to_string(i) + " is not a swapped lexicon image");
      }
    }
    bench.test_pairs.emplace_back(src, tgt);
    bench.test_swaps.push_back(std::move(swaps));
  }
  return bench;
}

}  // namespace cbd
