#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "cbd/types.hpp"

namespace cbd {

// Word-level vocabulary: a bijection surface string <-> dense id, with ids
// 0..2 reserved and word ids assigned in descending-frequency order (ties
// broken lexicographically), so id order doubles as frequency rank order.
class Vocab {
 public:
  static constexpr TokenId kUnk = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kFirstWord = 3;

  Vocab();

  // Builds from (surface, frequency) pairs; frequencies must be >= 1.
  static Vocab from_counts(std::vector<std::pair<std::string, int64_t>> counts);

  TokenId id(const std::string& surface) const;  // kUnk when absent
  bool has(const std::string& surface) const;
  const std::string& surface(TokenId id) const;
  int64_t frequency(TokenId id) const;
  int size() const { return static_cast<int>(surfaces_.size()); }
  int num_words() const { return size() - kFirstWord; }
  bool is_reserved(TokenId id) const { return id < kFirstWord; }

  bool operator==(const Vocab& other) const;

 private:
  std::vector<std::string> surfaces_;
  std::vector<int64_t> freqs_;
  std::unordered_map<std::string, TokenId> index_;
};

// Splits on whitespace runs, maps unknown words to <unk>.
// Throws EmptySentence / OverlongSentence.
Sentence tokenize(const std::string& line, const Vocab& vocab, int max_len = kMaxSentenceLen);

// Tokens with frequency >= min_count get ids in descending-frequency order,
// ties broken lexicographically. Throws EmptyCorpus on empty input.
Vocab build_vocab(const std::vector<std::string>& lines, int64_t min_count = 1);

struct Corpus {
  Lang lang = Lang::S;
  std::shared_ptr<const Vocab> vocab;
  std::vector<Sentence> sentences;

  size_t size() const { return sentences.size(); }
  bool empty() const { return sentences.empty(); }
};

std::string to_line(const Sentence& s, const Vocab& vocab);

// One sentence per line, single-space separated, LF endings.
void write_corpus(const Corpus& corpus, const std::string& path);
Corpus read_corpus(const std::string& path, std::shared_ptr<const Vocab> vocab, Lang lang,
                   int max_len = kMaxSentenceLen);

void validate_sentence(const Sentence& s, const Vocab& vocab, int max_len = kMaxSentenceLen);

struct SentenceHash {
  size_t operator()(const Sentence& s) const {
    uint64_t h = 0x9e3779b97f4a7c15ull;
    for (TokenId t : s) h = (h ^ static_cast<uint64_t>(t)) * 0x100000001b3ull;
    return static_cast<size_t>(h);
  }
};

}  // namespace cbd
