#include "cbd/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace cbd {

namespace {
const char* kReserved[] = {"<unk>", "<bos>", "<eos>"};
}

Vocab::Vocab() {
  for (const char* s : kReserved) {
    index_.emplace(s, static_cast<TokenId>(surfaces_.size()));
    surfaces_.emplace_back(s);
    freqs_.push_back(0);
  }
}

Vocab Vocab::from_counts(std::vector<std::pair<std::string, int64_t>> counts) {
  std::sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab v;
  for (auto& [surface, freq] : counts) {
    if (freq < 1) throw ConfigError("vocabulary frequency < 1 for '" + surface + "'");
    if (v.index_.count(surface)) throw ConfigError("duplicate vocabulary entry '" + surface + "'");
    v.index_.emplace(surface, static_cast<TokenId>(v.surfaces_.size()));
    v.surfaces_.push_back(std::move(surface));
    v.freqs_.push_back(freq);
  }
  return v;
}

TokenId Vocab::id(const std::string& surface) const {
  auto it = index_.find(surface);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::has(const std::string& surface) const { return index_.count(surface) > 0; }

const std::string& Vocab::surface(TokenId id) const {
  return surfaces_.at(static_cast<size_t>(id));
}

int64_t Vocab::frequency(TokenId id) const { return freqs_.at(static_cast<size_t>(id)); }

bool Vocab::operator==(const Vocab& other) const {
  return surfaces_ == other.surfaces_ && freqs_ == other.freqs_;
}

Sentence tokenize(const std::string& line, const Vocab& vocab, int max_len) {
  Sentence out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(vocab.id(tok));
  if (out.empty()) throw EmptySentence("line is empty after whitespace split");
  if (static_cast<int>(out.size()) > max_len)
    throw OverlongSentence("sentence has " + std::to_string(out.size()) + " tokens, limit " +
                           std::to_string(max_len));
  return out;
}

Vocab build_vocab(const std::vector<std::string>& lines, int64_t min_count) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  if (lines.empty()) throw EmptyCorpus("no input lines for vocabulary");
  std::map<std::string, int64_t> counts;
  std::istringstream in;
  std::string tok;
  for (const auto& line : lines) {
    in.clear();
    in.str(line);
    while (in >> tok) ++counts[tok];
  }
  if (counts.empty()) throw EmptyCorpus("input lines contain no tokens");
  std::vector<std::pair<std::string, int64_t>> kept;
  for (auto& [surface, freq] : counts)
    if (freq >= min_count) kept.emplace_back(surface, freq);
  return Vocab::from_counts(std::move(kept));
}

std::string to_line(const Sentence& s, const Vocab& vocab) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ' ';
    out += vocab.surface(s[i]);
  }
  return out;
}

void validate_sentence(const Sentence& s, const Vocab& vocab, int max_len) {
  if (s.empty()) throw EmptySentence("empty sentence");
  if (static_cast<int>(s.size()) > max_len)
    throw OverlongSentence("sentence exceeds " + std::to_string(max_len) + " tokens");
  for (TokenId t : s)
    if (t < 0 || t >= vocab.size())
      throw ConfigError("token id " + std::to_string(t) + " outside vocabulary");
}

void write_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const auto& sent : corpus.sentences) out << to_line(sent, *corpus.vocab) << '\n';
}

Corpus read_corpus(const std::string& path, std::shared_ptr<const Vocab> vocab, Lang lang,
                   int max_len) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  Corpus c;
  c.lang = lang;
  c.vocab = std::move(vocab);
  std::string line;
  while (std::getline(in, line)) c.sentences.push_back(tokenize(line, *c.vocab, max_len));
  if (c.sentences.empty()) throw EmptyCorpus(path + " holds no sentences");
  return c;
}

}  // namespace cbd
