#include "olnmt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace olnmt {

BleuStats& BleuStats::operator+=(const BleuStats& o) {
  for (int n = 0; n < 4; ++n) {
    match[n] += o.match[n];
    total[n] += o.total[n];
  }
  hyp_len += o.hyp_len;
  ref_len += o.ref_len;
  return *this;
}

TerStats& TerStats::operator+=(const TerStats& o) {
  edits += o.edits;
  shifts += o.shifts;
  ref_len += o.ref_len;
  return *this;
}

namespace {

std::string ngram_key(const Sentence& s, size_t begin, int n) {
  std::string key;
  for (int i = 0; i < n; ++i) {
    if (i) key += '\x1f';
    key += s[begin + i];
  }
  return key;
}

}  // namespace

BleuStats bleu_stats(const Sentence& hyp, const Sentence& ref) {
  BleuStats st;
  st.hyp_len = (long)hyp.size();
  st.ref_len = (long)ref.size();
  for (int n = 1; n <= 4; ++n) {
    long hyp_total = (long)hyp.size() - n + 1;
    if (hyp_total < 0) hyp_total = 0;
    st.total[n - 1] = hyp_total;
    if (hyp_total == 0) continue;
    std::unordered_map<std::string, long> ref_counts;
    for (size_t i = 0; i + n <= ref.size(); ++i) ref_counts[ngram_key(ref, i, n)]++;
    std::unordered_map<std::string, long> hyp_counts;
    for (size_t i = 0; i + n <= hyp.size(); ++i) hyp_counts[ngram_key(hyp, i, n)]++;
    long m = 0;
    for (const auto& [k, c] : hyp_counts) {
      auto it = ref_counts.find(k);
      if (it != ref_counts.end()) m += std::min(c, it->second);
    }
    st.match[n - 1] = m;
  }
  return st;
}

double bleu_from_stats(const BleuStats& s) {
  if (s.hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < 4; ++n) {
    double p;
    if (n == 0) {
      if (s.match[0] == 0) return 0.0;
      p = (double)s.match[0] / (double)s.total[0];
    } else if (s.match[n] > 0) {
      p = (double)s.match[n] / (double)s.total[n];
    } else {
      p = (double)(s.match[n] + 1) / (double)(s.total[n] + 1);
    }
    log_sum += std::log(p);
  }
  double bp = s.hyp_len < s.ref_len ? std::exp(1.0 - (double)s.ref_len / (double)s.hyp_len) : 1.0;
  return 100.0 * bp * std::exp(log_sum / 4.0);
}

double bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
  if (hyps.size() != refs.size())
    throw std::invalid_argument("bleu: " + std::to_string(hyps.size()) + " hypotheses vs " +
                                std::to_string(refs.size()) + " references");
  if (hyps.empty()) throw std::invalid_argument("bleu: empty corpus");
  BleuStats acc;
  for (size_t i = 0; i < hyps.size(); ++i) acc += bleu_stats(hyps[i], refs[i]);
  return bleu_from_stats(acc);
}

long levenshtein(const Sentence& a, const Sentence& b) {
  size_t n = a.size(), m = b.size();
  std::vector<long> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = (long)j;
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = (long)i;
    for (size_t j = 1; j <= m; ++j) {
      long sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

namespace {

bool block_occurs_in(const Sentence& ref, const Sentence& seq, size_t begin, int len) {
  if ((size_t)len > ref.size()) return false;
  for (size_t i = 0; i + len <= ref.size(); ++i) {
    bool ok = true;
    for (int k = 0; k < len; ++k)
      if (ref[i + k] != seq[begin + k]) {
        ok = false;
        break;
      }
    if (ok) return true;
  }
  return false;
}

Sentence move_block(const Sentence& seq, size_t begin, int len, size_t dest) {
  Sentence out;
  out.reserve(seq.size());
  for (size_t i = 0; i < seq.size(); ++i)
    if (i < begin || i >= begin + len) out.push_back(seq[i]);
  out.insert(out.begin() + dest, seq.begin() + begin, seq.begin() + begin + len);
  return out;
}

}  // namespace

TerStats ter_stats(const Sentence& hyp, const Sentence& ref, const TerOptions& opt) {
  if (ref.empty()) throw std::invalid_argument("ter: empty reference sentence");
  TerStats st;
  st.ref_len = (long)ref.size();

  Sentence cur = hyp;
  long dist = levenshtein(cur, ref);
  if (opt.allow_shifts) {
    while (dist > 0) {
      long best_gain = 0;
      Sentence best_seq;
      long best_dist = 0;
      size_t n = cur.size();
      for (size_t begin = 0; begin < n; ++begin) {
        int max_len = std::min<long>(opt.max_block_len, (long)(n - begin));
        for (int len = 1; len <= max_len; ++len) {
          // only blocks occurring verbatim in the reference can pay off
          if (!block_occurs_in(ref, cur, begin, len)) break;
          for (size_t dest = 0; dest + len <= n; ++dest) {
            if (dest == begin) continue;
            if (std::abs((long)dest - (long)begin) > opt.max_shift_dist) continue;
            Sentence moved = move_block(cur, begin, len, dest);
            long d = levenshtein(moved, ref);
            long gain = dist - d;
            if (gain > best_gain) {
              best_gain = gain;
              best_seq = std::move(moved);
              best_dist = d;
            }
          }
        }
      }
      if (best_gain < 1) break;
      cur = std::move(best_seq);
      dist = best_dist;
      st.shifts++;
    }
  }
  st.edits = dist + st.shifts;
  return st;
}

double ter_from_stats(const TerStats& s) {
  return 100.0 * (double)s.edits / (double)s.ref_len;
}

double ter(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs,
           const TerOptions& opt) {
  if (hyps.size() != refs.size())
    throw std::invalid_argument("ter: " + std::to_string(hyps.size()) + " hypotheses vs " +
                                std::to_string(refs.size()) + " references");
  if (hyps.empty()) throw std::invalid_argument("ter: empty corpus");
  TerStats acc;
  for (size_t i = 0; i < hyps.size(); ++i) acc += ter_stats(hyps[i], refs[i], opt);
  return ter_from_stats(acc);
}

std::vector<SentenceStats> corpus_stats(const std::vector<Sentence>& hyps,
                                        const std::vector<Sentence>& refs,
                                        const TerOptions& opt) {
  if (hyps.size() != refs.size())
    throw std::invalid_argument("corpus_stats: " + std::to_string(hyps.size()) +
                                " hypotheses vs " + std::to_string(refs.size()) + " references");
  std::vector<SentenceStats> out(hyps.size());
  for (size_t i = 0; i < hyps.size(); ++i) {
    out[i].bleu = bleu_stats(hyps[i], refs[i]);
    out[i].ter = ter_stats(hyps[i], refs[i], opt);
  }
  return out;
}

double metric_from_stats(const std::vector<SentenceStats>& stats, Metric m) {
  if (m == Metric::Bleu) {
    BleuStats acc;
    for (const auto& s : stats) acc += s.bleu;
    return bleu_from_stats(acc);
  }
  TerStats acc;
  for (const auto& s : stats) acc += s.ter;
  return ter_from_stats(acc);
}

ConfidenceInterval bootstrap_ci(const std::vector<SentenceStats>& stats, Metric m,
                                int n_resamples, std::uint64_t seed) {
  if (n_resamples < 1) throw std::invalid_argument("bootstrap_ci: need at least one resample");
  ConfidenceInterval ci;
  ci.point = metric_from_stats(stats, m);
  size_t n = stats.size();
  std::mt19937_64 rng(seed);
  std::vector<double> vals(n_resamples);
  for (int b = 0; b < n_resamples; ++b) {
    BleuStats bacc;
    TerStats tacc;
    for (size_t i = 0; i < n; ++i) {
      const SentenceStats& s = stats[rng() % n];
      if (m == Metric::Bleu)
        bacc += s.bleu;
      else
        tacc += s.ter;
    }
    vals[b] = m == Metric::Bleu ? bleu_from_stats(bacc) : ter_from_stats(tacc);
  }
  std::sort(vals.begin(), vals.end());
  size_t lo_idx = (size_t)std::floor(0.025 * (n_resamples - 1));
  size_t hi_idx = (size_t)std::ceil(0.975 * (n_resamples - 1));
  ci.lo = vals[lo_idx];
  ci.hi = vals[hi_idx];
  return ci;
}

std::vector<double> cumulative_curve(const std::vector<SentenceStats>& stats, Metric m) {
  if (stats.empty()) throw std::invalid_argument("cumulative_curve: empty stats");
  std::vector<double> out;
  out.reserve(stats.size());
  BleuStats bacc;
  TerStats tacc;
  for (const auto& s : stats) {
    if (m == Metric::Bleu) {
      bacc += s.bleu;
      out.push_back(bleu_from_stats(bacc));
    } else {
      tacc += s.ter;
      out.push_back(ter_from_stats(tacc));
    }
  }
  return out;
}

EvalReport evaluate_corpus(const std::vector<Sentence>& hyps,
                           const std::vector<Sentence>& refs, int n_resamples,
                           std::uint64_t seed) {
  EvalReport r;
  auto stats = corpus_stats(hyps, refs);
  r.n_sentences = (int)stats.size();
  r.bleu_ci = bootstrap_ci(stats, Metric::Bleu, n_resamples, seed);
  r.ter_ci = bootstrap_ci(stats, Metric::Ter, n_resamples, seed + 1);
  r.bleu = r.bleu_ci.point;
  r.ter = r.ter_ci.point;
  return r;
}

}  // namespace olnmt
