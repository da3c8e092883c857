#include "olnmt/bpe.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

namespace olnmt {

std::vector<std::string> utf8_chars(const std::string& word) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < word.size()) {
    unsigned char b = (unsigned char)word[i];
    size_t len = 1;
    if (b >= 0xF0)
      len = 4;
    else if (b >= 0xE0)
      len = 3;
    else if (b >= 0xC0)
      len = 2;
    if (i + len > word.size()) len = 1;
    out.push_back(word.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  size_t i = 0;
  auto is_punct = [](char c) {
    return std::ispunct((unsigned char)c) != 0;
  };
  while (i < line.size()) {
    while (i < line.size() && std::isspace((unsigned char)line[i])) ++i;
    if (i >= line.size()) break;
    size_t j = i;
    while (j < line.size() && !std::isspace((unsigned char)line[j])) ++j;
    std::string chunk = line.substr(i, j - i);
    i = j;

    size_t lo = 0, hi = chunk.size();
    while (lo < hi && is_punct(chunk[lo])) ++lo;
    while (hi > lo && is_punct(chunk[hi - 1])) --hi;
    for (size_t k = 0; k < lo; ++k) out.push_back(std::string(1, chunk[k]));
    if (hi > lo) out.push_back(chunk.substr(lo, hi - lo));
    for (size_t k = hi; k < chunk.size(); ++k) out.push_back(std::string(1, chunk[k]));
  }
  return out;
}

namespace {

using Symbols = std::vector<std::string>;

Symbols word_start_symbols(const std::string& word) {
  Symbols s = utf8_chars(word);
  s.push_back(kEndOfWord);
  return s;
}

void apply_merge(Symbols& s, const std::string& a, const std::string& b) {
  Symbols out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    if (i + 1 < s.size() && s[i] == a && s[i + 1] == b) {
      out.push_back(a + b);
      i += 2;
    } else {
      out.push_back(s[i]);
      i += 1;
    }
  }
  s = std::move(out);
}

}  // namespace

MergeTable learn_bpe(const std::vector<std::string>& corpus_tokens, int num_merges) {
  if (corpus_tokens.empty()) throw std::invalid_argument("learn_bpe: empty corpus");
  if (num_merges < 0) throw std::invalid_argument("learn_bpe: negative merge count");

  std::unordered_map<std::string, long> word_freq;
  for (const auto& w : corpus_tokens) word_freq[w]++;

  std::vector<std::pair<Symbols, long>> words;
  words.reserve(word_freq.size());
  {
    // deterministic iteration order
    std::map<std::string, long> sorted(word_freq.begin(), word_freq.end());
    for (const auto& [w, c] : sorted) words.push_back({word_start_symbols(w), c});
  }

  MergeTable table;
  for (int m = 0; m < num_merges; ++m) {
    std::map<std::pair<std::string, std::string>, long> pair_counts;
    for (const auto& [syms, freq] : words)
      for (size_t i = 0; i + 1 < syms.size(); ++i)
        pair_counts[{syms[i], syms[i + 1]}] += freq;
    if (pair_counts.empty()) break;

    // highest count wins; ties break lexicographically on the pair, which the
    // ordered map gives us by taking the first maximal element
    auto best = pair_counts.begin();
    for (auto it = pair_counts.begin(); it != pair_counts.end(); ++it)
      if (it->second > best->second) best = it;

    const auto& [a, b] = best->first;
    table.merges.push_back({a, b});
    for (auto& [syms, freq] : words) apply_merge(syms, a, b);
  }
  return table;
}

std::vector<std::string> apply_bpe_word(const std::string& word, const MergeTable& table) {
  Symbols s = word_start_symbols(word);
  for (const auto& [a, b] : table.merges) {
    if (s.size() < 2) break;
    apply_merge(s, a, b);
  }
  return s;
}

std::vector<std::string> apply_bpe(const std::vector<std::string>& tokens,
                                   const MergeTable& table) {
  std::vector<std::string> out;
  for (const auto& tok : tokens) {
    auto segs = apply_bpe_word(tok, table);
    out.insert(out.end(), segs.begin(), segs.end());
  }
  return out;
}

std::vector<std::string> bpe_detokenize(const std::vector<std::string>& subwords) {
  std::vector<std::string> words;
  std::string cur;
  for (const auto& s : subwords) {
    if (s.size() >= kEndOfWord.size() &&
        s.compare(s.size() - kEndOfWord.size(), kEndOfWord.size(), kEndOfWord) == 0) {
      cur += s.substr(0, s.size() - kEndOfWord.size());
      words.push_back(cur);
      cur.clear();
    } else {
      cur += s;
    }
  }
  if (!cur.empty()) words.push_back(cur);  // tolerate a missing final marker
  return words;
}

double coverage(const std::vector<std::string>& subword_tokens,
                const std::unordered_set<std::string>& vocab) {
  if (subword_tokens.empty()) return 0.0;
  long in = 0;
  for (const auto& t : subword_tokens)
    if (vocab.count(t)) ++in;
  return (double)in / (double)subword_tokens.size();
}

void save_merge_table(const MergeTable& table, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write merge table: " + path);
  f << "# olnmt bpe merges v1\n";
  for (const auto& [a, b] : table.merges) f << a << ' ' << b << '\n';
}

MergeTable load_merge_table(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read merge table: " + path);
  MergeTable table;
  std::string line;
  bool first = true;
  std::set<std::pair<std::string, std::string>> seen;
  while (std::getline(f, line)) {
    if (first) {
      first = false;
      if (line.rfind("#", 0) == 0) continue;  // version comment
    }
    if (line.empty()) continue;
    size_t sp = line.find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size())
      throw std::runtime_error("malformed merge line in " + path + ": '" + line + "'");
    std::pair<std::string, std::string> p{line.substr(0, sp), line.substr(sp + 1)};
    if (!seen.insert(p).second)
      throw std::runtime_error("duplicate merge pair in " + path + ": '" + line + "'");
    table.merges.push_back(std::move(p));
  }
  return table;
}

std::vector<std::string> BpeSegmenter::segment(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  for (const auto& tok : tokens) {
    auto it = cache_.find(tok);
    if (it == cache_.end()) it = cache_.emplace(tok, apply_bpe_word(tok, table_)).first;
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  return out;
}

}  // namespace olnmt
