#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbd {

using TokenId = int32_t;

// A tokenized sentence: word-level token ids, resolvable through a Vocab.
using Sentence = std::vector<TokenId>;

// The two languages of an experiment.
enum class Lang : uint8_t { S, T };

enum class Direction : uint8_t { S2T, T2S };

inline Lang src_lang(Direction d) { return d == Direction::S2T ? Lang::S : Lang::T; }
inline Lang tgt_lang(Direction d) { return d == Direction::S2T ? Lang::T : Lang::S; }
inline Direction reverse(Direction d) {
  return d == Direction::S2T ? Direction::T2S : Direction::S2T;
}

inline const char* to_string(Lang l) { return l == Lang::S ? "s" : "t"; }
inline const char* to_string(Direction d) { return d == Direction::S2T ? "s2t" : "t2s"; }

inline Direction direction_from_string(const std::string& s) {
  if (s == "s2t") return Direction::S2T;
  if (s == "t2s") return Direction::T2S;
  throw std::invalid_argument("bad direction tag: " + s);
}

// Sentences longer than this are rejected at tokenization time.
constexpr int kMaxSentenceLen = 175;

// Base class for all library errors. `kind` is a stable machine-readable tag.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define CBD_DEFINE_ERROR(NAME)                                          \
  class NAME : public Error {                                           \
   public:                                                              \
    explicit NAME(const std::string& msg) : Error(#NAME, msg) {}        \
  }

CBD_DEFINE_ERROR(EmptySentence);
CBD_DEFINE_ERROR(OverlongSentence);
CBD_DEFINE_ERROR(EmptyCorpus);
CBD_DEFINE_ERROR(ConfigError);
CBD_DEFINE_ERROR(InsufficientData);
CBD_DEFINE_ERROR(SameAgentError);
CBD_DEFINE_ERROR(MissingDirection);
CBD_DEFINE_ERROR(EnsembleMismatch);
CBD_DEFINE_ERROR(AlignmentError);
CBD_DEFINE_ERROR(IncomparableRuns);
CBD_DEFINE_ERROR(ChainInconsistency);
CBD_DEFINE_ERROR(IoError);

#undef CBD_DEFINE_ERROR

}  // namespace cbd
