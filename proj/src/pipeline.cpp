#include "cbd/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "cbd/rng.hpp"

namespace cbd {

namespace {

constexpr uint64_t kStageY = 0x73746167'6579ull;
constexpr uint64_t kStageZ = 0x73746167'657aull;
constexpr uint64_t kNoiseStream = 0x6e6f6973ull;

DecodeConfig stage_config(const DecodeConfig& dc, uint64_t stage, Lang side) {
  DecodeConfig out = dc;
  out.seed = mix64(dc.seed, stage, static_cast<uint64_t>(side));
  return out;
}

std::string joined_ids(const std::vector<const Agent*>& agents) {
  std::string out;
  for (size_t i = 0; i < agents.size(); ++i) {
    if (i) out += '+';
    out += agents[i]->id;
  }
  return out;
}

// Level-1 families for one monolingual side; returns the y batch for chaining.
std::vector<Sentence> emit_level1(const std::vector<const Agent*>& translator,
                                  const std::string& alpha_tag, Lang side, const Corpus& mono,
                                  const DecodeConfig& dc, int threads, SyntheticCorpus& out) {
  Direction d = side == Lang::S ? Direction::S2T : Direction::T2S;
  std::vector<Sentence> y =
      translate_corpus(translator, mono.sentences, d, stage_config(dc, kStageY, side), threads);
  for (size_t i = 0; i < mono.sentences.size(); ++i) {
    const int64_t origin = static_cast<int64_t>(i);
    out.pairs.push_back({mono.sentences[i], y[i], d, 1, alpha_tag, "", origin, PairFamily::XY,
                         side});
    out.pairs.push_back({y[i], mono.sentences[i], reverse(d), 1, alpha_tag, "", origin,
                         PairFamily::YX, side});
  }
  return y;
}

SyntheticCorpus new_corpus(const std::string& recipe, const Corpus& mono_s, const Corpus& mono_t,
                           const DecodeConfig& dc) {
  if (mono_s.empty() || mono_t.empty()) throw EmptyCorpus("monolingual corpora must be non-empty");
  SyntheticCorpus out;
  out.recipe = recipe;
  out.seed = dc.seed;
  out.decode = dc;
  out.vocab_s = mono_s.vocab;
  out.vocab_t = mono_t.vocab;
  return out;
}

// Both levels for both sides with an explicit (alpha, beta) role assignment;
// beta may equal alpha (same-model back-translation, BD(2,2)).
void generate_families(const Agent& alpha, const Agent& beta, const Corpus& mono_s,
                       const Corpus& mono_t, const DecodeConfig& dc, int threads,
                       SyntheticCorpus& out) {
  for (Lang side : {Lang::S, Lang::T}) {
    const Corpus& mono = side == Lang::S ? mono_s : mono_t;
    Direction d = side == Lang::S ? Direction::S2T : Direction::T2S;
    std::vector<Sentence> y = translate_corpus({&alpha}, mono.sentences, d,
                                               stage_config(dc, kStageY, side), threads);
    std::vector<Sentence> z =
        translate_corpus({&beta}, y, reverse(d), stage_config(dc, kStageZ, side), threads);
    for (size_t i = 0; i < mono.size(); ++i) {
      const int64_t origin = static_cast<int64_t>(i);
      out.pairs.push_back({mono.sentences[i], y[i], d, 1, alpha.id, "", origin, PairFamily::XY,
                           side});
      out.pairs.push_back({y[i], mono.sentences[i], reverse(d), 1, alpha.id, "", origin,
                           PairFamily::YX, side});
      out.pairs.push_back({y[i], z[i], reverse(d), 2, alpha.id, beta.id, origin, PairFamily::YZ,
                           side});
      out.pairs.push_back({z[i], y[i], d, 2, alpha.id, beta.id, origin, PairFamily::ZY, side});
    }
  }
}

}  // namespace

void NoiseConfig::validate() const {
  for (double p : {p_drop, p_swap, p_blank})
    if (p < 0.0 || p > 1.0) throw ConfigError("noise probabilities must be in [0, 1]");
}

SyntheticCorpus generate_cbd_pairs(const Agent& alpha, const Agent& beta, const Corpus& mono_s,
                                   const Corpus& mono_t, const DecodeConfig& dc, int threads) {
  if (alpha.id == beta.id)
    throw SameAgentError("cross-model back-translation requires two distinct agents, got '" +
                         alpha.id + "' twice");
  SyntheticCorpus out = new_corpus("cbd", mono_s, mono_t, dc);
  generate_families(alpha, beta, mono_s, mono_t, dc, threads, out);
  return out;
}

SyntheticCorpus cbd_generate(const Agent& theta1, const Agent& theta2, const Corpus& mono_s,
                             const Corpus& mono_t, const DecodeConfig& dc, int passes,
                             int threads) {
  if (passes < 1) throw ConfigError("passes must be >= 1");
  SyntheticCorpus out = new_corpus("cbd", mono_s, mono_t, dc);
  for (int pass = 0; pass < passes; ++pass) {
    DecodeConfig pass_dc = dc;
    if (pass > 0) pass_dc.seed = mix64(dc.seed, static_cast<uint64_t>(pass));
    SyntheticCorpus a = generate_cbd_pairs(theta1, theta2, mono_s, mono_t, pass_dc, threads);
    SyntheticCorpus b = generate_cbd_pairs(theta2, theta1, mono_s, mono_t, pass_dc, threads);
    for (auto& p : a.pairs) out.pairs.push_back(std::move(p));
    for (auto& p : b.pairs) out.pairs.push_back(std::move(p));
  }
  return out;
}

SyntheticCorpus gcbd_generate(const std::vector<const Agent*>& agents, const Corpus& mono_s,
                              const Corpus& mono_t, const DecodeConfig& dc, int passes,
                              int threads) {
  if (agents.size() < 2) throw ConfigError("gcbd needs at least 2 agents");
  if (passes < 1) throw ConfigError("passes must be >= 1");
  for (size_t i = 0; i < agents.size(); ++i)
    for (size_t j = i + 1; j < agents.size(); ++j)
      if (agents[i]->id == agents[j]->id)
        throw ConfigError("gcbd agent ids must be distinct, got '" + agents[i]->id + "' twice");
  SyntheticCorpus out =
      new_corpus("gcbd(" + std::to_string(agents.size()) + ")", mono_s, mono_t, dc);
  for (int pass = 0; pass < passes; ++pass) {
    DecodeConfig pass_dc = dc;
    if (pass > 0) pass_dc.seed = mix64(dc.seed, static_cast<uint64_t>(pass));
    for (size_t i = 0; i < agents.size(); ++i) {
      for (size_t j = 0; j < agents.size(); ++j) {
        if (i == j) continue;
        SyntheticCorpus part =
            generate_cbd_pairs(*agents[i], *agents[j], mono_s, mono_t, pass_dc, threads);
        for (auto& p : part.pairs) out.pairs.push_back(std::move(p));
      }
    }
  }
  return out;
}

SyntheticCorpus bd_generate(BdVariant variant, const std::vector<const Agent*>& agents,
                            const Corpus& mono_s, const Corpus& mono_t, const DecodeConfig& dc,
                            int threads) {
  const size_t need = variant == BdVariant::BD11 ? 1 : 2;
  if (agents.size() != need)
    throw ConfigError("this BD variant needs exactly " + std::to_string(need) + " agent(s), got " +
                      std::to_string(agents.size()));
  const char* tag = variant == BdVariant::BD11 ? "bd11"
                    : variant == BdVariant::BD12 ? "bd12"
                                                 : "bd22";
  SyntheticCorpus out = new_corpus(tag, mono_s, mono_t, dc);
  switch (variant) {
    case BdVariant::BD11:
      for (Lang side : {Lang::S, Lang::T})
        emit_level1({agents[0]}, agents[0]->id, side, side == Lang::S ? mono_s : mono_t, dc,
                    threads, out);
      break;
    case BdVariant::BD12:
      for (const Agent* agent : agents)
        for (Lang side : {Lang::S, Lang::T})
          emit_level1({agent}, agent->id, side, side == Lang::S ? mono_s : mono_t, dc, threads,
                      out);
      break;
    case BdVariant::BD22:
      for (const Agent* agent : agents)
        generate_families(*agent, *agent, mono_s, mono_t, dc, threads, out);
      break;
  }
  return out;
}

BdVariant bd_variant_from_string(const std::string& name) {
  if (name == "bd11") return BdVariant::BD11;
  if (name == "bd12") return BdVariant::BD12;
  if (name == "bd22") return BdVariant::BD22;
  throw ConfigError("unknown BD variant: " + name);
}

SyntheticCorpus ensemble_distill(const std::vector<const Agent*>& agents, const Corpus& mono_s,
                                 const Corpus& mono_t, const DecodeConfig& dc, int threads) {
  if (agents.empty()) throw ConfigError("ensemble_distill needs at least one agent");
  SyntheticCorpus out = new_corpus("ens-distill", mono_s, mono_t, dc);
  const std::string tag = joined_ids(agents);
  for (Lang side : {Lang::S, Lang::T})
    emit_level1(agents, tag, side, side == Lang::S ? mono_s : mono_t, dc, threads, out);
  return out;
}

SyntheticCorpus apply_target_noise(const SyntheticCorpus& corpus, const NoiseConfig& noise,
                                   uint64_t seed) {
  noise.validate();
  SyntheticCorpus out = corpus;
  out.recipe = "noised";
  out.pairs.clear();
  out.dropped_empty = 0;
  for (size_t k = 0; k < corpus.pairs.size(); ++k) {
    const SyntheticPair& pair = corpus.pairs[k];
    Rng rng(mix64(seed, kNoiseStream, static_cast<uint64_t>(k)));
    Sentence tgt;
    tgt.reserve(pair.tgt.size());
    for (TokenId t : pair.tgt)
      if (!rng.bernoulli(noise.p_drop)) tgt.push_back(t);
    // disjoint adjacent transpositions, skip after a swap
    size_t i = 0;
    while (i + 1 < tgt.size()) {
      if (rng.bernoulli(noise.p_swap)) {
        std::swap(tgt[i], tgt[i + 1]);
        i += 2;
      } else {
        ++i;
      }
    }
    const Vocab& tgt_vocab = tgt_lang(pair.dir) == Lang::T ? *corpus.vocab_t : *corpus.vocab_s;
    for (TokenId& t : tgt)
      if (rng.bernoulli(noise.p_blank))
        t = Vocab::kFirstWord + static_cast<TokenId>(
                                    rng.below(static_cast<uint64_t>(tgt_vocab.num_words())));
    if (tgt.empty()) {
      ++out.dropped_empty;
      continue;
    }
    SyntheticPair noised = pair;
    noised.tgt = std::move(tgt);
    out.pairs.push_back(std::move(noised));
  }
  return out;
}

StudentModel supervised_fit(const SyntheticCorpus& corpus, std::shared_ptr<const Vocab> vocab_s,
                            std::shared_ptr<const Vocab> vocab_t, const FitConfig& cfg) {
  if (corpus.pairs.empty()) throw EmptyCorpus("no synthetic pairs to fit on");

  std::vector<std::pair<const Sentence*, const Sentence*>> s2t, t2s;
  for (const auto& pair : corpus.pairs) {
    auto& bucket = pair.dir == Direction::S2T ? s2t : t2s;
    bucket.emplace_back(&pair.src, &pair.tgt);
  }
  if (s2t.empty()) throw MissingDirection("no s2t pairs in synthetic corpus");
  if (t2s.empty()) throw MissingDirection("no t2s pairs in synthetic corpus");

  StudentModel student;
  student.recipe = corpus.recipe;
  student.agent.id = "student";
  student.agent.seed = cfg.seed;
  student.agent.lm_weight = cfg.lm_weight;
  student.agent.reorder_window = cfg.reorder_window;
  student.agent.em_iterations = cfg.em_iterations;
  student.agent.vocab_s = vocab_s;
  student.agent.vocab_t = vocab_t;
  student.agent.table_s2t =
      ibm1_fit(s2t, Direction::S2T, cfg.em_iterations, 0.01, vocab_s->size(), vocab_t->size());
  student.agent.table_t2s =
      ibm1_fit(t2s, Direction::T2S, cfg.em_iterations, 0.01, vocab_t->size(), vocab_s->size());

  // LMs from the per-direction target sides.
  Corpus tgt_t{Lang::T, vocab_t, {}};
  for (const auto& [src, tgt] : s2t) tgt_t.sentences.push_back(*tgt);
  Corpus tgt_s{Lang::S, vocab_s, {}};
  for (const auto& [src, tgt] : t2s) tgt_s.sentences.push_back(*tgt);
  student.agent.lm_t = LanguageModel::train(tgt_t, cfg.lm_order);
  student.agent.lm_s = LanguageModel::train(tgt_s, cfg.lm_order);

  int64_t level1 = 0, level2 = 0;
  for (const auto& pair : corpus.pairs) (pair.level == 1 ? level1 : level2) += 1;
  student.pair_counts["s2t"] = static_cast<int64_t>(s2t.size());
  student.pair_counts["t2s"] = static_cast<int64_t>(t2s.size());
  student.pair_counts["level1"] = level1;
  student.pair_counts["level2"] = level2;
  student.pair_counts["total"] = static_cast<int64_t>(corpus.pairs.size());
  return student;
}

StudentModel cbd_train(const Agent& theta1, const Agent& theta2, const Corpus& mono_s,
                       const Corpus& mono_t, const DecodeConfig& dc, const FitConfig& fit,
                       int passes, int threads) {
  SyntheticCorpus pairs = cbd_generate(theta1, theta2, mono_s, mono_t, dc, passes, threads);
  return supervised_fit(pairs, mono_s.vocab, mono_t.vocab, fit);
}

StudentModel gcbd_train(const std::vector<const Agent*>& agents, const Corpus& mono_s,
                        const Corpus& mono_t, const DecodeConfig& dc, const FitConfig& fit,
                        int passes, int threads) {
  SyntheticCorpus pairs = gcbd_generate(agents, mono_s, mono_t, dc, passes, threads);
  return supervised_fit(pairs, mono_s.vocab, mono_t.vocab, fit);
}

void write_synthetic(const SyntheticCorpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "#recipe=" << corpus.recipe << "\tseed=" << corpus.seed
      << "\tdecode=" << to_string(corpus.decode.strategy) << '\n';
  for (const auto& pair : corpus.pairs) {
    const Vocab& sv = src_lang(pair.dir) == Lang::S ? *corpus.vocab_s : *corpus.vocab_t;
    const Vocab& tv = tgt_lang(pair.dir) == Lang::T ? *corpus.vocab_t : *corpus.vocab_s;
    out << to_line(pair.src, sv) << '\t' << to_line(pair.tgt, tv) << '\t' << to_string(pair.dir)
        << '\t' << pair.level << '\t' << pair.alpha_id << '\t' << pair.beta_id << '\t'
        << pair.origin_index << '\n';
  }
}

SyntheticCorpus read_synthetic(const std::string& path, std::shared_ptr<const Vocab> vocab_s,
                               std::shared_ptr<const Vocab> vocab_t) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  SyntheticCorpus corpus;
  corpus.vocab_s = std::move(vocab_s);
  corpus.vocab_t = std::move(vocab_t);
  corpus.provenance_tagged = false;
  std::string line;
  if (!std::getline(in, line) || line.empty() || line[0] != '#')
    throw IoError("missing synthetic corpus header");
  {
    std::istringstream hdr(line.substr(1));
    std::string field;
    while (std::getline(hdr, field, '\t')) {
      auto eq = field.find('=');
      if (eq == std::string::npos) continue;
      std::string key = field.substr(0, eq), val = field.substr(eq + 1);
      if (key == "recipe") corpus.recipe = val;
      else if (key == "seed") corpus.seed = std::stoull(val);
      else if (key == "decode") corpus.decode.strategy = strategy_from_string(val);
    }
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == '\t') {
        cols.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (cols.size() != 7) throw IoError("synthetic corpus row needs 7 columns");
    SyntheticPair pair;
    pair.dir = direction_from_string(cols[2]);
    const Vocab& sv = src_lang(pair.dir) == Lang::S ? *corpus.vocab_s : *corpus.vocab_t;
    const Vocab& tv = tgt_lang(pair.dir) == Lang::T ? *corpus.vocab_t : *corpus.vocab_s;
    pair.src = tokenize(cols[0], sv);
    pair.tgt = tokenize(cols[1], tv);
    pair.level = std::stoi(cols[3]);
    pair.alpha_id = cols[4];
    pair.beta_id = cols[5];
    pair.origin_index = std::stoll(cols[6]);
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

void reconstruct_provenance(SyntheticCorpus& corpus, const Corpus& mono_s, const Corpus& mono_t) {
  // level-1 tags first, so the y sentences are known for the level-2 pass
  std::map<std::tuple<int64_t, std::string, Lang>, const Sentence*> y_of;
  for (auto& pair : corpus.pairs) {
    if (pair.level != 1) continue;
    const Corpus& s_side = src_lang(pair.dir) == Lang::S ? mono_s : mono_t;
    const Corpus& t_side = tgt_lang(pair.dir) == Lang::T ? mono_t : mono_s;
    const size_t origin = static_cast<size_t>(pair.origin_index);
    if (origin < s_side.size() && pair.src == s_side.sentences[origin]) {
      pair.family = PairFamily::XY;
      pair.origin_side = src_lang(pair.dir);
      y_of[{pair.origin_index, pair.alpha_id, pair.origin_side}] = &pair.tgt;
    } else if (origin < t_side.size() && pair.tgt == t_side.sentences[origin]) {
      pair.family = PairFamily::YX;
      pair.origin_side = tgt_lang(pair.dir);
    } else {
      throw ChainInconsistency("level-1 pair at origin " + std::to_string(pair.origin_index) +
                               " matches neither monolingual side");
    }
  }
  for (auto& pair : corpus.pairs) {
    if (pair.level != 2) continue;
    // YZ: src is the y of the opposite-side chain; ZY: tgt is the y.
    Lang yz_side = tgt_lang(pair.dir);  // chain whose y lives in src's language
    Lang zy_side = src_lang(pair.dir);
    auto yz = y_of.find({pair.origin_index, pair.alpha_id, yz_side});
    auto zy = y_of.find({pair.origin_index, pair.alpha_id, zy_side});
    if (yz != y_of.end() && pair.src == *yz->second) {
      pair.family = PairFamily::YZ;
      pair.origin_side = yz_side;
    } else if (zy != y_of.end() && pair.tgt == *zy->second) {
      pair.family = PairFamily::ZY;
      pair.origin_side = zy_side;
    } else {
      throw ChainInconsistency("level-2 pair at origin " + std::to_string(pair.origin_index) +
                               " has no matching level-1 translation");
    }
  }
  corpus.provenance_tagged = true;
}

std::vector<Sentence> generated_sentences(const SyntheticCorpus& corpus) {
  if (!corpus.provenance_tagged)
    throw ConfigError("corpus lacks provenance tags; call reconstruct_provenance first");
  std::vector<Sentence> out;
  for (const auto& pair : corpus.pairs)
    if (pair.family == PairFamily::XY || pair.family == PairFamily::YZ) out.push_back(pair.tgt);
  return out;
}

void check_chain_consistency(const SyntheticCorpus& corpus) {
  if (!corpus.provenance_tagged)
    throw ConfigError("corpus lacks provenance tags; call reconstruct_provenance first");
  const bool cross = corpus.recipe.rfind("cbd", 0) == 0 || corpus.recipe.rfind("gcbd", 0) == 0;
  const bool same_model = corpus.recipe == "bd22";
  std::map<std::tuple<int64_t, std::string, Lang>, const Sentence*> y_of;
  for (const auto& pair : corpus.pairs)
    if (pair.level == 1 && pair.family == PairFamily::XY)
      y_of[{pair.origin_index, pair.alpha_id, pair.origin_side}] = &pair.tgt;

  for (const auto& pair : corpus.pairs) {
    if (pair.level == 1) {
      if (!pair.beta_id.empty())
        throw ChainInconsistency("level-1 pair carries a beta id");
      continue;
    }
    if (pair.beta_id.empty()) throw ChainInconsistency("level-2 pair lacks a beta id");
    if (cross && pair.beta_id == pair.alpha_id)
      throw ChainInconsistency("cross-model recipe produced a same-agent level-2 pair");
    if (same_model && pair.beta_id != pair.alpha_id)
      throw ChainInconsistency("bd22 level-2 pair with distinct alpha/beta");
    auto it = y_of.find({pair.origin_index, pair.alpha_id, pair.origin_side});
    if (it == y_of.end())
      throw ChainInconsistency("level-2 pair without matching level-1 chain at origin " +
                               std::to_string(pair.origin_index));
    const Sentence& y = pair.family == PairFamily::YZ ? pair.src : pair.tgt;
    if (y != *it->second)
      throw ChainInconsistency("level-2 y side diverges from its level-1 translation at origin " +
                               std::to_string(pair.origin_index));
  }
}

void save_student(const StudentModel& student, const std::string& dir) {
  save_agent(student.agent, dir);
  std::ofstream out(dir + "/student.txt", std::ios::binary);
  if (!out) throw IoError("cannot write " + dir + "/student.txt");
  out << "recipe = " << student.recipe << '\n';
  for (const auto& [key, value] : student.pair_counts)
    out << "pairs." << key << " = " << value << '\n';
}

StudentModel load_student(const std::string& dir) {
  StudentModel student;
  student.agent = load_agent(dir);
  std::ifstream in(dir + "/student.txt");
  if (!in) throw IoError("cannot open " + dir + "/student.txt");
  std::string line;
  while (std::getline(in, line)) {
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
    if (key == "recipe") student.recipe = val;
    else if (key.rfind("pairs.", 0) == 0) student.pair_counts[key.substr(6)] = std::stoll(val);
  }
  return student;
}

}  // namespace cbd
