#include "olnmt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace olnmt {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

namespace {

bool valid_utf8(const std::string& s) {
  size_t i = 0;
  while (i < s.size()) {
    unsigned char b = (unsigned char)s[i];
    int extra;
    if (b < 0x80)
      extra = 0;
    else if ((b >> 5) == 0x6)
      extra = 1;
    else if ((b >> 4) == 0xE)
      extra = 2;
    else if ((b >> 3) == 0x1E)
      extra = 3;
    else
      return false;
    if (i + extra >= s.size() && extra > 0) return false;
    for (int k = 1; k <= extra; ++k)
      if (((unsigned char)s[i + k] >> 6) != 0x2) return false;
    i += extra + 1;
  }
  return true;
}

std::vector<std::string> read_lines_checked(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CorpusError("cannot open corpus file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!valid_utf8(line))
      throw CorpusError(path + ": undecodable bytes at line " +
                        std::to_string(lines.size() + 1));
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

std::vector<std::string> read_lines(const std::string& path) {
  return read_lines_checked(path);
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CorpusError("cannot write file: " + path);
  for (const auto& l : lines) f << l << '\n';
}

ParallelCorpus pair_lines(const std::vector<std::string>& src_lines,
                          const std::vector<std::string>& tgt_lines) {
  if (src_lines.size() != tgt_lines.size())
    throw CorpusError("parallel corpus line count mismatch: " +
                      std::to_string(tgt_lines.size()) + " != " +
                      std::to_string(src_lines.size()));
  ParallelCorpus c;
  for (size_t i = 0; i < src_lines.size(); ++i) {
    if (split_ws(src_lines[i]).empty() || split_ws(tgt_lines[i]).empty()) {
      c.dropped++;
      continue;
    }
    SentencePair p;
    p.src_text = src_lines[i];
    p.tgt_text = tgt_lines[i];
    c.pairs.push_back(std::move(p));
  }
  return c;
}

ParallelCorpus load_parallel(const std::string& src_path, const std::string& tgt_path) {
  return pair_lines(read_lines_checked(src_path), read_lines_checked(tgt_path));
}

VocabularyMap::VocabularyMap() {
  push("<pad>");
  push("<s>");
  push("</s>");
  push("<unk>");
}

void VocabularyMap::push(const std::string& sym) {
  by_symbol_[sym] = (int)symbols_.size();
  symbols_.push_back(sym);
}

VocabularyMap VocabularyMap::build(const std::vector<std::string>& tokens, int max_size) {
  if (max_size < 5) throw CorpusError("vocabulary max_size must be at least 5");
  std::map<std::string, long> freq;
  for (const auto& t : tokens) freq[t]++;
  std::vector<std::pair<std::string, long>> by_freq(freq.begin(), freq.end());
  std::stable_sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  VocabularyMap v;
  for (const auto& [sym, c] : by_freq) {
    (void)c;
    if (v.size() >= max_size) break;
    if (!v.contains(sym)) v.push(sym);
  }
  return v;
}

int VocabularyMap::index(const std::string& sym) const {
  auto it = by_symbol_.find(sym);
  return it == by_symbol_.end() ? kUnk : it->second;
}

const std::string& VocabularyMap::symbol(int idx) const {
  if (idx < 0 || idx >= size())
    throw CorpusError("vocabulary index " + std::to_string(idx) + " out of range [0," +
                      std::to_string(size()) + ")");
  return symbols_[idx];
}

std::vector<int> VocabularyMap::to_indices(const std::vector<std::string>& toks) const {
  std::vector<int> out;
  out.reserve(toks.size());
  for (const auto& t : toks) out.push_back(index(t));
  return out;
}

std::vector<std::string> VocabularyMap::to_symbols(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  for (int id : ids) {
    if (id == kPad || id == kSos || id == kEos) continue;
    out.push_back(symbol(id));
  }
  return out;
}

void VocabularyMap::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CorpusError("cannot write vocabulary: " + path);
  for (int i = 0; i < size(); ++i) f << symbols_[i] << '\t' << i << '\n';
}

VocabularyMap VocabularyMap::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CorpusError("cannot read vocabulary: " + path);
  VocabularyMap v;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw CorpusError(path + ": malformed vocabulary line " + std::to_string(lineno));
    std::string sym = line.substr(0, tab);
    int idx = std::stoi(line.substr(tab + 1));
    if (idx < 4) {
      if (idx != v.index(sym) || sym != v.symbol(idx))
        throw CorpusError(path + ": special token mismatch at line " + std::to_string(lineno));
      continue;
    }
    if (idx != v.size())
      throw CorpusError(path + ": non-contiguous index " + std::to_string(idx) + " at line " +
                        std::to_string(lineno));
    if (v.contains(sym))
      throw CorpusError(path + ": duplicate symbol '" + sym + "' at line " +
                        std::to_string(lineno));
    v.push(sym);
  }
  return v;
}

void index_corpus(ParallelCorpus& corpus, const VocabularyMap& src_vocab,
                  const VocabularyMap& tgt_vocab) {
  for (auto& p : corpus.pairs) {
    p.src = src_vocab.to_indices(split_ws(p.src_text));
    p.tgt = tgt_vocab.to_indices(split_ws(p.tgt_text));
  }
}

// --- toy tasks -------------------------------------------------------------

ToyKind toy_kind_from_string(const std::string& s) {
  if (s == "copy") return ToyKind::Copy;
  if (s == "reverse") return ToyKind::Reverse;
  if (s == "substitution-grammar") return ToyKind::SubstitutionGrammar;
  throw CorpusError("unknown toy task kind: '" + s + "'");
}

namespace {

std::string sym_name(char prefix, int i) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%c%02d", prefix, i);
  return buf;
}

struct ToyTables {
  std::vector<int> subst;   // source content symbol -> target content symbol
  std::vector<bool> swap_next;  // reorder flag per source symbol
};

void gen_corpus(TextCorpus& out, int n, const ToyTaskConfig& cfg, const ToyTables& tables,
                std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len_d(cfg.min_len, cfg.max_len);
  std::uniform_int_distribution<int> sym_d(0, cfg.vocab_size - 1);
  for (int s = 0; s < n; ++s) {
    int len = len_d(rng);
    std::vector<int> src(len);
    for (int i = 0; i < len; ++i) src[i] = sym_d(rng);

    std::vector<int> tgt;
    std::vector<char> tgt_is_src;  // copy/reverse emit source symbols
    switch (cfg.kind) {
      case ToyKind::Copy:
        tgt = src;
        break;
      case ToyKind::Reverse:
        tgt.assign(src.rbegin(), src.rend());
        break;
      case ToyKind::SubstitutionGrammar: {
        tgt.resize(len);
        for (int i = 0; i < len; ++i) tgt[i] = tables.subst[src[i]];
        for (int i = 0; i + 1 < len; i += 2)
          if (tables.swap_next[src[i]]) std::swap(tgt[i], tgt[i + 1]);
        break;
      }
    }

    std::string src_line, tgt_line;
    for (int i = 0; i < len; ++i) {
      if (i) src_line += ' ';
      src_line += sym_name('s', src[i]);
    }
    char tgt_prefix = cfg.kind == ToyKind::SubstitutionGrammar ? 't' : 's';
    for (size_t i = 0; i < tgt.size(); ++i) {
      if (i) tgt_line += ' ';
      tgt_line += sym_name(tgt_prefix, tgt[i]);
    }
    out.src_lines.push_back(std::move(src_line));
    out.tgt_lines.push_back(std::move(tgt_line));
  }
}

}  // namespace

ToyTask generate_toy_task(const ToyTaskConfig& cfg) {
  if (cfg.n_train < 1 || cfg.n_test < 1 || cfg.n_dev < 1)
    throw CorpusError("toy task needs at least one train, dev and test sentence");
  if (cfg.vocab_size < 2 || cfg.min_len < 1 || cfg.max_len < cfg.min_len)
    throw CorpusError("toy task size parameters out of range");
  if (cfg.domain_shift < 0.0 || cfg.domain_shift > 1.0)
    throw CorpusError("domain_shift must be in [0,1]");

  std::mt19937_64 rng(cfg.seed);
  ToyTables ood;
  ood.subst.resize(cfg.vocab_size);
  ood.swap_next.resize(cfg.vocab_size);
  // random substitution table (a permutation keeps the task invertible)
  for (int i = 0; i < cfg.vocab_size; ++i) ood.subst[i] = i;
  std::shuffle(ood.subst.begin(), ood.subst.end(), rng);
  for (int i = 0; i < cfg.vocab_size; ++i) ood.swap_next[i] = rng() % 2 == 0;

  // in-domain table: re-draw the mapping of a fixed fraction of the symbols
  ToyTables id = ood;
  int n_shift = (int)(cfg.domain_shift * cfg.vocab_size + 0.5);
  std::vector<int> order(cfg.vocab_size);
  for (int i = 0; i < cfg.vocab_size; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_int_distribution<int> sym_d(0, cfg.vocab_size - 1);
  for (int k = 0; k < n_shift; ++k) {
    int s = order[k];
    int fresh = sym_d(rng);
    while (fresh == id.subst[s] && cfg.vocab_size > 1) fresh = sym_d(rng);
    id.subst[s] = fresh;
  }

  ToyTask task;
  task.subst_ood = ood.subst;
  task.subst_id = id.subst;
  gen_corpus(task.train, cfg.n_train, cfg, ood, rng);
  gen_corpus(task.dev, cfg.n_dev, cfg, ood, rng);
  if (cfg.n_indomain_train > 0) gen_corpus(task.indomain_train, cfg.n_indomain_train, cfg, id, rng);
  gen_corpus(task.indomain_dev, cfg.n_dev, cfg, id, rng);
  gen_corpus(task.test, cfg.n_test, cfg, id, rng);
  return task;
}

}  // namespace olnmt
