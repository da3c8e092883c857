#ifndef OLNMT_METRICS_HPP
#define OLNMT_METRICS_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

// Corpus-level BLEU and TER over tokenized sentences, with per-sentence
// sufficient statistics so bootstrap resampling and cumulative-prefix curves
// recompute the corpus metric instead of averaging sentence scores.

namespace olnmt {

using Sentence = std::vector<std::string>;

struct BleuStats {
  std::array<long, 4> match{0, 0, 0, 0};
  std::array<long, 4> total{0, 0, 0, 0};
  long hyp_len = 0;
  long ref_len = 0;

  BleuStats& operator+=(const BleuStats& o);
};

struct TerStats {
  long edits = 0;  // substitutions + insertions + deletions + shifts
  long shifts = 0;
  long ref_len = 0;

  TerStats& operator+=(const TerStats& o);
};

struct SentenceStats {
  BleuStats bleu;
  TerStats ter;
};

BleuStats bleu_stats(const Sentence& hyp, const Sentence& ref);

// BLEU in [0,100]: geometric mean of clipped 1..4-gram precisions times the
// brevity penalty. Precisions of order n>1 with zero matches fall back to
// add-one smoothing so short or early-prefix segments stay defined; a zero
// unigram precision still yields 0.
double bleu_from_stats(const BleuStats& s);

double bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs);

// TER as a percentage of reference tokens, unclamped (may exceed 100).
// Shift search: greedy best-gain block moves, block length <= 10, move
// distance <= 50, each shift costing one edit.
struct TerOptions {
  bool allow_shifts = true;
  int max_block_len = 10;
  int max_shift_dist = 50;
};

TerStats ter_stats(const Sentence& hyp, const Sentence& ref, const TerOptions& opt = {});
double ter_from_stats(const TerStats& s);
double ter(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs,
           const TerOptions& opt = {});

long levenshtein(const Sentence& a, const Sentence& b);

std::vector<SentenceStats> corpus_stats(const std::vector<Sentence>& hyps,
                                        const std::vector<Sentence>& refs,
                                        const TerOptions& opt = {});

enum class Metric { Bleu, Ter };

double metric_from_stats(const std::vector<SentenceStats>& stats, Metric m);

struct ConfidenceInterval {
  double point = 0;
  double lo = 0;
  double hi = 0;
  double half_width() const { return (hi - lo) / 2; }
};

// Percentile bootstrap over sentence resamples (with replacement), metric
// recomputed from aggregated statistics per resample.
ConfidenceInterval bootstrap_ci(const std::vector<SentenceStats>& stats, Metric m,
                                int n_resamples, std::uint64_t seed);

// Entry n-1 is the corpus metric over sentences 1..n.
std::vector<double> cumulative_curve(const std::vector<SentenceStats>& stats, Metric m);

struct EvalReport {
  double bleu = 0;
  ConfidenceInterval bleu_ci;
  double ter = 0;
  ConfidenceInterval ter_ci;
  int n_sentences = 0;
};

EvalReport evaluate_corpus(const std::vector<Sentence>& hyps,
                           const std::vector<Sentence>& refs, int n_resamples,
                           std::uint64_t seed);

}  // namespace olnmt

#endif  // OLNMT_METRICS_HPP
