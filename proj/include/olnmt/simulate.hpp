#ifndef OLNMT_SIMULATE_HPP
#define OLNMT_SIMULATE_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "olnmt/corpus.hpp"
#include "olnmt/metrics.hpp"
#include "olnmt/model.hpp"
#include "olnmt/optimizers.hpp"

// Post-editing simulation: translate a sentence with the current parameters,
// store the hypothesis, treat the reference as the post-edit, update, advance.
// Also the offline training loop with dev-BLEU early stopping and the
// scenario orchestration around both.

namespace olnmt {

using Real = float;

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// --- offline training --------------------------------------------------

struct TrainConfig {
  Algorithm optimizer = Algorithm::Adadelta;
  double lr = 1.0;  // Adadelta's own default; online runs lower it
  double clip_norm = 1.0;
  long eval_every = 1000;
  long patience = 10000;  // updates without dev improvement before stopping
  long max_updates = 100000;
  std::uint64_t seed = 1;
  int eval_beam = 0;  // 0 = model config beam
};

struct TrainResult {
  ParameterSet<Real> params;  // best-dev parameters
  double best_dev_bleu = 0;
  long best_update = 0;
  long total_updates = 0;
  bool diverged = false;
  std::vector<std::pair<long, double>> dev_history;  // (update, dev BLEU)
};

TrainResult train_offline(const NmtModel<Real>& model, const ParameterSet<Real>& init,
                          const std::vector<SentencePair>& train,
                          const std::vector<SentencePair>& dev, const TrainConfig& cfg);

// Single-update training loss -log p(tgt | src), exposed for smoke tests.
double training_step(const NmtModel<Real>& model, ParameterSet<Real>& params,
                     GradientOptimizer<Real>& opt, const SentencePair& pair, double clip_norm,
                     std::uint64_t noise_seed);

// --- online sessions -----------------------------------------------------

struct OnlineSpec {
  Algorithm algorithm = Algorithm::None;
  double lr = 0;  // 0 = algorithm default
  double C = 0;
  int k_max = 10;
  double clip_norm = 1.0;
  bool ppas_true_projection = false;
  int beam_size = 0;             // 0 = model config
  int max_output_length = 0;     // 0 = model config
  std::uint64_t seed = 1;

  HyperParams resolved() const {
    HyperParams hp = default_hyperparams(algorithm);
    if (lr > 0) hp.lr = lr;
    if (C > 0) hp.C = C;
    return hp;
  }
};

struct TraceRecord {
  int t = 0;  // 1-based position in the stream
  std::string src_text;
  std::string ref_text;
  std::string hyp_text;
  std::vector<int> hyp_tokens;
  double hyp_log_prob = 0;
  bool hyp_truncated = false;
  double cum_bleu = 0;  // corpus metric over sentences 1..t
  double cum_ter = 0;
  bool updated = false;
  bool update_skipped = false;  // non-finite update dropped, parameters kept
  // PA methods only
  std::optional<double> pa_loss;
  std::optional<int> pa_iters;
  std::optional<bool> pa_passive;
  double update_ms = 0;
};

struct SimulationTrace {
  Algorithm algorithm = Algorithm::None;
  std::vector<TraceRecord> records;
  ParameterSet<Real> final_params;
};

// Streams records to disk as the session runs: one JSON object per line in
// the trace file; wall-times go to a separate timing file so trace bytes are
// reproducible run to run.
class TraceWriter {
 public:
  TraceWriter(const std::string& trace_path, const std::string& timing_path);
  ~TraceWriter();
  void write(const TraceRecord& rec);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

TraceRecord trace_record_from_json_line(const std::string& line);

// The strictly sequential post-editing loop. The hypothesis stored at step t
// is produced by the pre-update parameters; each pair triggers at most one
// update; algorithm "none" is the frozen baseline. on_pre_update, when set,
// observes the parameters entering step t (before translation and update).
using ParamObserver = std::function<void(int t, const ParameterSet<Real>&)>;

SimulationTrace run_online_session(const NmtModel<Real>& model, const ParameterSet<Real>& start,
                                   const std::vector<SentencePair>& test, const OnlineSpec& spec,
                                   const VocabularyMap* tgt_vocab = nullptr,
                                   TraceWriter* sink = nullptr,
                                   const ParamObserver& on_pre_update = {});

// Plain batch translation with frozen parameters (the baseline definition).
std::vector<Hypothesis> translate_corpus(const NmtModel<Real>& model,
                                         const ParameterSet<Real>& params,
                                         const std::vector<SentencePair>& test, int beam_size = 0,
                                         int max_output_length = 0);

// hypothesis/reference token sentences as used for the trace metrics
Sentence hyp_sentence(const std::vector<int>& hyp_tokens, const VocabularyMap* tgt_vocab);
Sentence ref_sentence(const SentencePair& pair);

// --- update-time summary ---------------------------------------------------

struct UpdateTimeSummary {
  double mean_ms = 0;
  double p95_ms = 0;
  double min_ms = 0;
  double max_ms = 0;
  long n_updates = 0;
};

UpdateTimeSummary measure_update_time(const SimulationTrace& trace);

// --- trajectories ------------------------------------------------------

struct TrajectoryData {
  std::vector<std::string> systems;
  // delta[s][t] = cumulative BLEU of system s at t+1 minus the baseline's
  std::vector<std::vector<double>> delta_bleu;
};

TrajectoryData trajectory_plot_data(const SimulationTrace& baseline,
                                    const std::vector<const SimulationTrace*>& online);

// --- scenarios ---------------------------------------------------------

struct ScenarioSpec {
  int id = 1;  // 1: out-of-domain only; 2: + in-domain fine-tuning; 3: in-domain only
  const std::vector<SentencePair>* ood_train = nullptr;
  const std::vector<SentencePair>* ood_dev = nullptr;
  const std::vector<SentencePair>* indomain_train = nullptr;
  const std::vector<SentencePair>* indomain_dev = nullptr;
  const std::vector<SentencePair>* test = nullptr;
  ModelConfig model;
  TrainConfig train;
  std::vector<OnlineSpec> online_systems;
  std::uint64_t init_seed = 1;
  int bootstrap_samples = 1000;
  std::uint64_t bootstrap_seed = 1;
  const VocabularyMap* tgt_vocab = nullptr;
};

struct ScenarioResult {
  ParameterSet<Real> base_params;  // checkpoint entering the online phase
  TrainResult pretrain;
  std::optional<TrainResult> finetune;
  SimulationTrace baseline;
  std::vector<SimulationTrace> online;
  EvalReport baseline_report;
  std::vector<EvalReport> online_reports;
  std::vector<std::string> notes;
};

ScenarioResult run_scenario(const ScenarioSpec& spec);

EvalReport report_from_trace(const SimulationTrace& trace, int bootstrap_samples,
                             std::uint64_t seed);

}  // namespace olnmt

#endif  // OLNMT_SIMULATE_HPP
