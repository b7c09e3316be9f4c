#include "cbd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace cbd {

namespace {

std::string ngram_key(const Sentence& s, size_t start, size_t n) {
  std::string key(n * sizeof(TokenId), '\0');
  std::memcpy(key.data(), s.data() + start, key.size());
  return key;
}

std::string pair_key(const SyntheticPair& pair) {
  std::string key;
  key.push_back(pair.dir == Direction::S2T ? 's' : 't');
  uint32_t src_len = static_cast<uint32_t>(pair.src.size());
  key.append(reinterpret_cast<const char*>(&src_len), sizeof(src_len));
  key.append(reinterpret_cast<const char*>(pair.src.data()), pair.src.size() * sizeof(TokenId));
  key.append(reinterpret_cast<const char*>(pair.tgt.data()), pair.tgt.size() * sizeof(TokenId));
  return key;
}

}  // namespace

BleuScore corpus_bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
  if (hyps.size() != refs.size())
    throw AlignmentError("hypothesis/reference counts differ: " + std::to_string(hyps.size()) +
                         " vs " + std::to_string(refs.size()));
  if (hyps.empty()) throw AlignmentError("cannot score an empty corpus");

  BleuScore bleu;
  std::array<int64_t, 4> matches{}, totals{};
  std::unordered_map<std::string, int64_t> hyp_counts, ref_counts;
  for (size_t i = 0; i < hyps.size(); ++i) {
    const Sentence& hyp = hyps[i];
    const Sentence& ref = refs[i];
    bleu.hyp_len += static_cast<int64_t>(hyp.size());
    bleu.ref_len += static_cast<int64_t>(ref.size());
    for (size_t n = 1; n <= 4; ++n) {
      if (hyp.size() < n) continue;
      hyp_counts.clear();
      ref_counts.clear();
      for (size_t j = 0; j + n <= hyp.size(); ++j) ++hyp_counts[ngram_key(hyp, j, n)];
      for (size_t j = 0; j + n <= ref.size(); ++j) ++ref_counts[ngram_key(ref, j, n)];
      for (const auto& [gram, cnt] : hyp_counts) {
        totals[n - 1] += cnt;
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matches[n - 1] += std::min(cnt, it->second);
      }
    }
  }

  bool zero = false;
  for (size_t n = 0; n < 4; ++n) {
    bleu.precisions[n] =
        totals[n] > 0 ? static_cast<double>(matches[n]) / static_cast<double>(totals[n]) : 0.0;
    if (bleu.precisions[n] <= 0.0) zero = true;
  }
  bleu.brevity_penalty =
      bleu.hyp_len == 0
          ? 0.0
          : (bleu.hyp_len > bleu.ref_len
                 ? 1.0
                 : std::exp(1.0 - static_cast<double>(bleu.ref_len) /
                                      static_cast<double>(bleu.hyp_len)));
  if (zero || bleu.hyp_len == 0) {
    bleu.score = 0.0;
    return bleu;
  }
  double log_mean = 0.0;
  for (double p : bleu.precisions) log_mean += std::log(p);
  bleu.score = bleu.brevity_penalty * std::exp(log_mean / 4.0) * 100.0;
  return bleu;
}

BleuScore corpus_bleu(const Corpus& hyps, const Corpus& refs) {
  return corpus_bleu(hyps.sentences, refs.sentences);
}

BleuScore reconstruction_bleu(const Corpus& mono, const Agent& fwd, const Agent& bwd,
                              const DecodeConfig& dc, int threads) {
  Direction out_dir = mono.lang == Lang::S ? Direction::S2T : Direction::T2S;
  std::vector<Sentence> there = translate_corpus({&fwd}, mono.sentences, out_dir, dc, threads);
  std::vector<Sentence> back = translate_corpus({&bwd}, there, reverse(out_dir), dc, threads);
  return corpus_bleu(back, mono.sentences);
}

double duplicate_ratio(const SyntheticCorpus& corpus) {
  return duplicate_ratio(corpus, nullptr);
}

double duplicate_ratio(const SyntheticCorpus& corpus, std::map<std::string, double>* per_family) {
  if (corpus.pairs.empty()) throw EmptyCorpus("duplicate_ratio needs a non-empty corpus");
  std::unordered_set<std::string> seen;
  int64_t dups = 0;
  std::map<std::string, std::pair<int64_t, int64_t>> family;  // dups, total
  std::map<std::string, std::unordered_set<std::string>> family_seen;
  for (const auto& pair : corpus.pairs) {
    std::string key = pair_key(pair);
    if (!seen.insert(key).second) ++dups;
    if (per_family) {
      std::string tag = std::string("level") + std::to_string(pair.level) + "-" +
                        to_string(pair.dir);
      auto& [fd, ft] = family[tag];
      ++ft;
      if (!family_seen[tag].insert(key).second) ++fd;
    }
  }
  if (per_family) {
    per_family->clear();
    for (const auto& [tag, counts] : family)
      (*per_family)[tag] = static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  return static_cast<double>(dups) / static_cast<double>(corpus.pairs.size());
}

double trigram_repetition_rate(const std::vector<Sentence>& sents) {
  if (sents.empty()) throw EmptyCorpus("trigram_repetition_rate needs sentences");
  int64_t flagged = 0;
  for (const auto& s : sents) {
    for (size_t i = 0; i + 2 < s.size(); ++i) {
      if (s[i] == s[i + 1] && s[i] == s[i + 2]) {
        ++flagged;
        break;
      }
    }
  }
  return static_cast<double>(flagged) / static_cast<double>(sents.size());
}

DiversityReport diversity_report(const SyntheticCorpus& corpus, const Corpus& mono_s,
                                 const Corpus& mono_t, const std::vector<const Agent*>& agents,
                                 const DecodeConfig& dc, int recon_sample, int threads) {
  if (agents.empty()) throw ConfigError("diversity_report needs at least one agent");
  DiversityReport report;

  SyntheticCorpus tagged;
  const SyntheticCorpus* source = &corpus;
  if (!corpus.provenance_tagged) {
    tagged = corpus;
    reconstruct_provenance(tagged, mono_s, mono_t);
    source = &tagged;
  }

  report.dup_ratio = duplicate_ratio(*source);
  std::vector<Sentence> generated = generated_sentences(*source);
  report.trigram_rate = generated.empty() ? 0.0 : trigram_repetition_rate(generated);
  for (const auto& pair : source->pairs) {
    std::string tag = std::string("level") + std::to_string(pair.level) + "-" +
                      to_string(pair.dir);
    ++report.pair_counts[tag];
    ++report.pair_counts["total"];
  }

  report.recon_sample = recon_sample;
  for (Lang side : {Lang::S, Lang::T}) {
    const Corpus& mono = side == Lang::S ? mono_s : mono_t;
    Corpus sample;
    sample.lang = mono.lang;
    sample.vocab = mono.vocab;
    size_t n = std::min(mono.size(), static_cast<size_t>(recon_sample));
    sample.sentences.assign(mono.sentences.begin(), mono.sentences.begin() + n);
    for (const Agent* fwd : agents) {
      for (const Agent* bwd : agents) {
        ReconEntry entry;
        entry.side = side;
        entry.fwd_id = fwd->id;
        entry.bwd_id = bwd->id;
        entry.bleu = reconstruction_bleu(sample, *fwd, *bwd, dc, threads);
        report.reconstruction.push_back(std::move(entry));
      }
    }
  }
  return report;
}

std::string format_bleu(const BleuScore& b) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%.2f (p1=%.4f p2=%.4f p3=%.4f p4=%.4f bp=%.4f len=%lld/%lld)",
                b.score, b.precisions[0], b.precisions[1], b.precisions[2], b.precisions[3],
                b.brevity_penalty, static_cast<long long>(b.hyp_len),
                static_cast<long long>(b.ref_len));
  return buf;
}

void write_diversity_tsv(const DiversityReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };
  out << "metric\tside\tfwd\tbwd\tvalue\n";
  for (const auto& e : report.reconstruction)
    out << "reconstruction_bleu\t" << to_string(e.side) << '\t' << e.fwd_id << '\t' << e.bwd_id
        << '\t' << fmt(e.bleu.score) << '\n';
  out << "duplicate_ratio\t-\t-\t-\t" << fmt(report.dup_ratio) << '\n';
  out << "trigram_repetition_rate\t-\t-\t-\t" << fmt(report.trigram_rate) << '\n';
  for (const auto& [tag, count] : report.pair_counts)
    out << "pairs." << tag << "\t-\t-\t-\t" << count << '\n';
}

std::string format_diversity_text(const DiversityReport& report) {
  std::ostringstream out;
  char buf[128];
  out << "reconstruction BLEU (fwd->bwd, per side):\n";
  out << "  side  fwd          bwd          bleu\n";
  for (const auto& e : report.reconstruction) {
    std::snprintf(buf, sizeof(buf), "  %-5s %-12s %-12s %7.2f\n", to_string(e.side),
                  e.fwd_id.c_str(), e.bwd_id.c_str(), e.bleu.score);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "duplicate ratio: %.4f\n", report.dup_ratio);
  out << buf;
  std::snprintf(buf, sizeof(buf), "tri-gram repetition rate: %.6f\n", report.trigram_rate);
  out << buf;
  out << "pair counts:";
  for (const auto& [tag, count] : report.pair_counts) out << ' ' << tag << '=' << count;
  out << '\n';
  return out.str();
}

}  // namespace cbd
