#ifndef OLNMT_BPE_HPP
#define OLNMT_BPE_HPP

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

// Joint byte-pair encoding: greedy most-frequent-pair merges learned over a
// word-frequency table, replayed in order to segment new text. Word-final
// subwords carry the end-of-word marker so detokenization is exact.

namespace olnmt {

inline const std::string kEndOfWord = "</w>";

struct MergeTable {
  // merge order is significant; no duplicate pairs
  std::vector<std::pair<std::string, std::string>> merges;

  size_t size() const { return merges.size(); }
};

// Whitespace split with leading/trailing ASCII punctuation detached as
// separate tokens; case is preserved.
std::vector<std::string> tokenize(const std::string& line);

// Splits a word into UTF-8 code points. Invalid bytes pass through as
// singleton symbols.
std::vector<std::string> utf8_chars(const std::string& word);

// Learns up to num_merges merges from a token stream (typically both sides of
// a parallel corpus jointly). Ties on pair frequency break lexicographically.
MergeTable learn_bpe(const std::vector<std::string>& corpus_tokens, int num_merges);

// Segments one word by replaying the merges in learned order.
std::vector<std::string> apply_bpe_word(const std::string& word, const MergeTable& table);

// Segments a whole pre-tokenized sentence.
std::vector<std::string> apply_bpe(const std::vector<std::string>& tokens,
                                   const MergeTable& table);

// Inverse of apply_bpe: joins subwords and resolves end-of-word markers.
std::vector<std::string> bpe_detokenize(const std::vector<std::string>& subwords);

// Fraction of running subword tokens present in vocab.
double coverage(const std::vector<std::string>& subword_tokens,
                const std::unordered_set<std::string>& vocab);

// One merge per line ("left right"), ordered; first line is a version comment.
void save_merge_table(const MergeTable& table, const std::string& path);
MergeTable load_merge_table(const std::string& path);

// Memoizes per-word segmentations over an immutable table.
class BpeSegmenter {
 public:
  explicit BpeSegmenter(MergeTable table) : table_(std::move(table)) {}

  const MergeTable& table() const { return table_; }

  std::vector<std::string> segment(const std::vector<std::string>& tokens);

 private:
  MergeTable table_;
  std::unordered_map<std::string, std::vector<std::string>> cache_;
};

}  // namespace olnmt

#endif  // OLNMT_BPE_HPP
