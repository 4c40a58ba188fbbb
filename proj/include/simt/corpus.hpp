// Synthetic sentence-pair corpora and the shared toy vocabulary.
#pragma once

#include <string>
#include <vector>

namespace simt {

// Fixed 40-symbol vocabulary. Corpus files store raw sentence ids; sequence
// markers are added by the model pipeline, never stored.
inline constexpr int kBos = 0;
inline constexpr int kEos = 1;
inline constexpr int kUnk = 2;
inline constexpr int kFiller = 3;
inline constexpr int kFirstContent = 4;
inline constexpr int kVocabSize = 40;

std::string token_name(int id);

struct SentencePair {
  std::vector<int> src;
  std::vector<int> tgt;
  std::vector<char> cls;  // 'C'/'F' per source token; empty when untagged
};

// Tasks: copy (tgt = src), reverse (tgt = reversed src), skewed-copy (a filler
// precedes every other content token on the source side, so n > m; tokens are
// tagged). Content lengths are uniform in [4, 16]; deterministic per seed.
std::vector<SentencePair> generate_corpus(const std::string& task, int count,
                                          unsigned long long seed);

void save_corpus_jsonl(const std::string& path, const std::vector<SentencePair>& pairs);
std::vector<SentencePair> load_corpus_jsonl(const std::string& path);

}  // namespace simt
