#ifndef OLNMT_CORPUS_HPP
#define OLNMT_CORPUS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

// Parallel-corpus ingestion, vocabulary construction, and a synthetic toy-task
// generator. Corpus files are plain UTF-8 text, one whitespace-tokenized
// sentence per line.

namespace olnmt {

class CorpusError : public std::runtime_error {
 public:
  explicit CorpusError(const std::string& msg) : std::runtime_error(msg) {}
};

std::vector<std::string> split_ws(const std::string& line);

struct SentencePair {
  std::vector<int> src;  // filled by index_corpus
  std::vector<int> tgt;
  std::string src_text;
  std::string tgt_text;
};

struct ParallelCorpus {
  std::vector<SentencePair> pairs;
  long dropped = 0;  // pairs removed because one side was empty
};

// Pairs line i of both files; validates UTF-8 (error names the line); drops
// and counts pairs empty on either side.
ParallelCorpus load_parallel(const std::string& src_path, const std::string& tgt_path);

ParallelCorpus pair_lines(const std::vector<std::string>& src_lines,
                          const std::vector<std::string>& tgt_lines);

class VocabularyMap {
 public:
  static constexpr int kPad = 0;
  static constexpr int kSos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  VocabularyMap();

  // Most frequent symbols first, ties lexicographic; indices 0-3 reserved.
  static VocabularyMap build(const std::vector<std::string>& tokens, int max_size);

  int size() const { return (int)symbols_.size(); }
  int index(const std::string& sym) const;  // kUnk when absent
  bool contains(const std::string& sym) const { return by_symbol_.count(sym) != 0; }
  const std::string& symbol(int idx) const;

  std::vector<int> to_indices(const std::vector<std::string>& toks) const;
  // Drops special tokens; inverse of to_indices for in-vocabulary text.
  std::vector<std::string> to_symbols(const std::vector<int>& ids) const;

  void save(const std::string& path) const;
  static VocabularyMap load(const std::string& path);

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> by_symbol_;
  void push(const std::string& sym);
};

// Converts raw text to index sequences; out-of-vocabulary symbols map to unk.
void index_corpus(ParallelCorpus& corpus, const VocabularyMap& src_vocab,
                  const VocabularyMap& tgt_vocab);

// --- toy tasks -------------------------------------------------------------

enum class ToyKind { Copy, Reverse, SubstitutionGrammar };

ToyKind toy_kind_from_string(const std::string& s);

struct ToyTaskConfig {
  ToyKind kind = ToyKind::SubstitutionGrammar;
  int n_train = 1000;
  int n_dev = 100;
  int n_indomain_train = 0;
  int n_test = 100;
  int vocab_size = 20;  // content symbols per side
  int min_len = 3;
  int max_len = 8;
  std::uint64_t seed = 1;
  double domain_shift = 0.0;  // fraction of the substitution table re-drawn
};

struct TextCorpus {
  std::vector<std::string> src_lines;
  std::vector<std::string> tgt_lines;
};

struct ToyTask {
  TextCorpus train;           // out-of-domain distribution
  TextCorpus dev;             // out-of-domain distribution
  TextCorpus indomain_train;  // shifted distribution
  TextCorpus indomain_dev;    // shifted distribution
  TextCorpus test;            // shifted distribution
  std::vector<int> subst_ood;  // content symbol index -> target symbol index
  std::vector<int> subst_id;
};

// Deterministic given the seed. SubstitutionGrammar maps each source symbol
// through a randomized substitution table and swaps adjacent target tokens
// where the source symbol's reorder flag is set; domain_shift re-draws that
// fraction of the substitution table for the in-domain side.
ToyTask generate_toy_task(const ToyTaskConfig& cfg);

std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::string& path, const std::vector<std::string>& lines);

}  // namespace olnmt

#endif  // OLNMT_CORPUS_HPP
