#include "olnmt/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

namespace olnmt {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Sentence ids_sentence(const std::vector<int>& ids) {
  Sentence s;
  for (int id : ids) {
    if (id == tok::kPad || id == tok::kSos || id == tok::kEos) continue;
    s.push_back(std::to_string(id));
  }
  return s;
}

std::vector<int> with_eos(const std::vector<int>& tgt) {
  std::vector<int> out = tgt;
  out.push_back(tok::kEos);
  return out;
}

std::string join(const Sentence& s) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ' ';
    out += s[i];
  }
  return out;
}

double dev_bleu(const NmtModel<Real>& model, const ParameterSet<Real>& params,
                const std::vector<SentencePair>& dev, int beam) {
  std::vector<Sentence> hyps, refs;
  for (const auto& pair : dev) {
    Hypothesis h = model.beam_search(params, pair.src, beam, 0);
    hyps.push_back(ids_sentence(h.tokens));
    refs.push_back(ids_sentence(pair.tgt));
  }
  return bleu(hyps, refs);
}

}  // namespace

Sentence hyp_sentence(const std::vector<int>& hyp_tokens, const VocabularyMap* tgt_vocab) {
  if (!tgt_vocab) return ids_sentence(hyp_tokens);
  return tgt_vocab->to_symbols(hyp_tokens);
}

Sentence ref_sentence(const SentencePair& pair) {
  if (!pair.tgt_text.empty()) return split_ws(pair.tgt_text);
  return ids_sentence(pair.tgt);
}

double training_step(const NmtModel<Real>& model, ParameterSet<Real>& params,
                     GradientOptimizer<Real>& opt, const SentencePair& pair, double clip_norm,
                     std::uint64_t noise_seed) {
  float sigma = model.config().weight_noise_sigma;
  const ParameterSet<Real>* at = &params;
  ParameterSet<Real> noisy;
  if (sigma > 0) {
    noisy = model.with_weight_noise(params, sigma, noise_seed);
    at = &noisy;
  }
  auto [lp, grads] = model.sentence_log_prob_with_grad(*at, pair.src, with_eos(pair.tgt));
  double loss = -(double)lp;
  if (!std::isfinite(loss) || !all_finite(grads)) return std::nan("");
  scale_grads(grads, Real(-1));  // gradients of the negative log-likelihood
  clip_global_norm(grads, clip_norm);
  opt.update(params, grads);
  return loss;
}

TrainResult train_offline(const NmtModel<Real>& model, const ParameterSet<Real>& init,
                          const std::vector<SentencePair>& train,
                          const std::vector<SentencePair>& dev, const TrainConfig& cfg) {
  if (train.empty() || dev.empty())
    throw ConfigError("train_offline: empty training or development corpus");

  TrainResult res;
  res.params = init;
  ParameterSet<Real> params = init;
  GradientOptimizer<Real> opt(cfg.optimizer, cfg.lr);
  std::mt19937_64 shuffle_rng(cfg.seed);

  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  size_t cursor = order.size();  // forces a shuffle on first use

  double best = -1;
  long best_update = 0;
  long t = 0;
  bool stop = false;
  while (!stop && t < cfg.max_updates) {
    if (cursor >= order.size()) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      cursor = 0;
    }
    const SentencePair& pair = train[order[cursor++]];
    ++t;
    ParameterSet<Real> before = params;
    double loss = training_step(model, params, opt, pair, cfg.clip_norm,
                                cfg.seed * 0x9e3779b97f4a7c15ULL + (std::uint64_t)t);
    if (!std::isfinite(loss) || !params.all_finite()) {
      res.diverged = true;
      params = std::move(before);  // last finite parameters
      break;
    }
    if (t % cfg.eval_every == 0) {
      double b = dev_bleu(model, params, dev, cfg.eval_beam);
      res.dev_history.push_back({t, b});
      if (b > best) {
        best = b;
        best_update = t;
        res.params = params;
      }
      if (t - best_update >= cfg.patience) stop = true;
    }
  }
  if (best < 0) res.params = params;  // never evaluated; hand back what we have
  res.best_dev_bleu = best < 0 ? 0 : best;
  res.best_update = best_update;
  res.total_updates = t;
  return res;
}

std::vector<Hypothesis> translate_corpus(const NmtModel<Real>& model,
                                         const ParameterSet<Real>& params,
                                         const std::vector<SentencePair>& test, int beam_size,
                                         int max_output_length) {
  std::vector<Hypothesis> out;
  out.reserve(test.size());
  for (const auto& pair : test)
    out.push_back(model.beam_search(params, pair.src, beam_size, max_output_length));
  return out;
}

// --- trace I/O ---------------------------------------------------------

struct TraceWriter::Impl {
  std::ofstream trace;
  std::ofstream timing;
};

TraceWriter::TraceWriter(const std::string& trace_path, const std::string& timing_path)
    : impl_(new Impl) {
  impl_->trace.open(trace_path, std::ios::binary);
  impl_->timing.open(timing_path, std::ios::binary);
  if (!impl_->trace || !impl_->timing)
    throw std::runtime_error("cannot open trace output: " + trace_path + " / " + timing_path);
}

TraceWriter::~TraceWriter() = default;

void TraceWriter::write(const TraceRecord& rec) {
  nlohmann::json j{
      {"t", rec.t},
      {"src", rec.src_text},
      {"ref", rec.ref_text},
      {"hyp", rec.hyp_text},
      {"hyp_log_prob", rec.hyp_log_prob},
      {"truncated", rec.hyp_truncated},
      {"cum_bleu", rec.cum_bleu},
      {"cum_ter", rec.cum_ter},
      {"updated", rec.updated},
      {"skipped", rec.update_skipped},
  };
  if (rec.pa_loss) j["pa_loss"] = *rec.pa_loss;
  if (rec.pa_iters) j["pa_iters"] = *rec.pa_iters;
  if (rec.pa_passive) j["pa_passive"] = *rec.pa_passive;
  impl_->trace << j.dump() << '\n';
  impl_->trace.flush();  // keep interrupted sessions inspectable
  impl_->timing << nlohmann::json{{"t", rec.t}, {"update_ms", rec.update_ms}}.dump() << '\n';
  impl_->timing.flush();
}

TraceRecord trace_record_from_json_line(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  TraceRecord rec;
  rec.t = j.at("t").get<int>();
  rec.src_text = j.at("src").get<std::string>();
  rec.ref_text = j.at("ref").get<std::string>();
  rec.hyp_text = j.at("hyp").get<std::string>();
  rec.hyp_log_prob = j.at("hyp_log_prob").get<double>();
  rec.hyp_truncated = j.at("truncated").get<bool>();
  rec.cum_bleu = j.at("cum_bleu").get<double>();
  rec.cum_ter = j.at("cum_ter").get<double>();
  rec.updated = j.at("updated").get<bool>();
  rec.update_skipped = j.at("skipped").get<bool>();
  if (j.contains("pa_loss")) rec.pa_loss = j["pa_loss"].get<double>();
  if (j.contains("pa_iters")) rec.pa_iters = j["pa_iters"].get<int>();
  if (j.contains("pa_passive")) rec.pa_passive = j["pa_passive"].get<bool>();
  return rec;
}

// --- online loop -------------------------------------------------------

SimulationTrace run_online_session(const NmtModel<Real>& model, const ParameterSet<Real>& start,
                                   const std::vector<SentencePair>& test, const OnlineSpec& spec,
                                   const VocabularyMap* tgt_vocab, TraceWriter* sink,
                                   const ParamObserver& on_pre_update) {
  SimulationTrace trace;
  trace.algorithm = spec.algorithm;
  ParameterSet<Real> params = start;

  HyperParams hp = spec.resolved();
  std::unique_ptr<GradientOptimizer<Real>> opt;
  if (spec.algorithm != Algorithm::None && !is_pa(spec.algorithm))
    opt = std::make_unique<GradientOptimizer<Real>>(spec.algorithm, hp.lr);
  PAConfig pa_cfg;
  pa_cfg.lr = hp.lr;
  pa_cfg.C = hp.C;
  pa_cfg.k_max = spec.k_max;
  pa_cfg.clip_norm = spec.clip_norm;
  pa_cfg.ppas_true_projection = spec.ppas_true_projection;

  BleuStats bleu_acc;
  TerStats ter_acc;
  int t = 0;
  for (const auto& pair : test) {
    ++t;
    if (on_pre_update) on_pre_update(t, params);
    TraceRecord rec;
    rec.t = t;
    rec.src_text = pair.src_text;
    rec.ref_text = pair.tgt_text.empty() ? join(ids_sentence(pair.tgt)) : pair.tgt_text;

    // translate with the pre-update parameters and store the hypothesis
    Hypothesis hyp = model.beam_search(params, pair.src, spec.beam_size, spec.max_output_length);
    rec.hyp_tokens = hyp.tokens;
    rec.hyp_log_prob = hyp.log_prob;
    rec.hyp_truncated = hyp.truncated;
    Sentence hyp_sent = hyp_sentence(hyp.tokens, tgt_vocab);
    Sentence ref_sent = ref_sentence(pair);
    rec.hyp_text = join(hyp_sent);
    bleu_acc += bleu_stats(hyp_sent, ref_sent);
    ter_acc += ter_stats(hyp_sent, ref_sent);
    rec.cum_bleu = bleu_from_stats(bleu_acc);
    rec.cum_ter = ter_from_stats(ter_acc);

    // the post-edited sample (x_t, y_t) updates the parameters once
    if (spec.algorithm != Algorithm::None) {
      auto t0 = Clock::now();
      if (opt) {
        auto [lp, grads] =
            model.sentence_log_prob_with_grad(params, pair.src, with_eos(pair.tgt));
        if (std::isfinite((double)lp) && all_finite(grads)) {
          scale_grads(grads, Real(-1));
          clip_global_norm(grads, spec.clip_norm);
          opt->update(params, grads);
          rec.updated = true;
        } else {
          rec.update_skipped = true;
        }
      } else {
        SentenceGapObjective<Real> obj(model, pair.src, with_eos(pair.tgt), hyp.tokens);
        PAResult<Real> res = spec.algorithm == Algorithm::Pas ? pas_update(params, obj, pa_cfg)
                                                              : ppas_update(params, obj, pa_cfg);
        rec.pa_loss = (double)res.initial_loss;
        rec.pa_iters = res.iterations;
        rec.pa_passive = res.passive;
        if (res.aborted) {
          rec.update_skipped = true;
        } else {
          rec.updated = !res.passive;
          params = std::move(res.params);
        }
      }
      rec.update_ms = ms_since(t0);
    }

    if (sink) sink->write(rec);
    trace.records.push_back(std::move(rec));
  }
  trace.final_params = std::move(params);
  return trace;
}

UpdateTimeSummary measure_update_time(const SimulationTrace& trace) {
  UpdateTimeSummary s;
  if (trace.algorithm == Algorithm::None || trace.records.empty()) return s;
  std::vector<double> ms;
  ms.reserve(trace.records.size());
  for (const auto& r : trace.records) ms.push_back(r.update_ms);
  std::sort(ms.begin(), ms.end());
  s.n_updates = (long)ms.size();
  s.min_ms = ms.front();
  s.max_ms = ms.back();
  s.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / (double)ms.size();
  size_t idx = (size_t)std::ceil(0.95 * (double)ms.size());
  s.p95_ms = ms[std::min(ms.size() - 1, idx == 0 ? 0 : idx - 1)];
  return s;
}

TrajectoryData trajectory_plot_data(const SimulationTrace& baseline,
                                    const std::vector<const SimulationTrace*>& online) {
  auto curve = [](const SimulationTrace& tr) {
    std::vector<SentenceStats> stats;
    for (const auto& r : tr.records) {
      SentenceStats s;
      s.bleu = bleu_stats(split_ws(r.hyp_text), split_ws(r.ref_text));
      stats.push_back(s);
    }
    return cumulative_curve(stats, Metric::Bleu);
  };
  auto base_curve = curve(baseline);

  TrajectoryData out;
  for (const SimulationTrace* tr : online) {
    if (tr->records.size() != baseline.records.size())
      throw ConfigError("trajectory: traces cover different test sets (" +
                        std::to_string(tr->records.size()) + " vs " +
                        std::to_string(baseline.records.size()) + " sentences)");
    for (size_t i = 0; i < tr->records.size(); ++i)
      if (tr->records[i].src_text != baseline.records[i].src_text ||
          tr->records[i].ref_text != baseline.records[i].ref_text)
        throw ConfigError("trajectory: traces cover different test sets (sentence " +
                          std::to_string(i + 1) + " differs)");
    auto c = curve(*tr);
    std::vector<double> delta(c.size());
    for (size_t i = 0; i < c.size(); ++i) delta[i] = c[i] - base_curve[i];
    out.systems.push_back(to_string(tr->algorithm));
    out.delta_bleu.push_back(std::move(delta));
  }
  return out;
}

EvalReport report_from_trace(const SimulationTrace& trace, int bootstrap_samples,
                             std::uint64_t seed) {
  std::vector<Sentence> hyps, refs;
  for (const auto& r : trace.records) {
    hyps.push_back(split_ws(r.hyp_text));
    refs.push_back(split_ws(r.ref_text));
  }
  return evaluate_corpus(hyps, refs, bootstrap_samples, seed);
}

ScenarioResult run_scenario(const ScenarioSpec& spec) {
  auto nonempty = [](const std::vector<SentencePair>* c) { return c && !c->empty(); };

  if (spec.id < 1 || spec.id > 3)
    throw ConfigError("scenario id must be 1, 2 or 3, got " + std::to_string(spec.id));
  if (!nonempty(spec.test)) throw ConfigError("scenario: missing test corpus");

  ScenarioResult res;
  bool fine_tune = false;
  switch (spec.id) {
    case 1:
      if (!nonempty(spec.ood_train) || !nonempty(spec.ood_dev))
        throw ConfigError("scenario 1: missing out-of-domain training or development corpus");
      if (nonempty(spec.indomain_train))
        throw ConfigError("scenario 1 takes no in-domain training data");
      break;
    case 2:
      if (!nonempty(spec.ood_train) || !nonempty(spec.ood_dev))
        throw ConfigError("scenario 2: missing out-of-domain training or development corpus");
      fine_tune = nonempty(spec.indomain_train);
      if (fine_tune && !nonempty(spec.indomain_dev))
        throw ConfigError("scenario 2: in-domain fine-tuning needs an in-domain development set");
      if (!fine_tune)
        res.notes.push_back("scenario 2 with no in-domain training data degenerates to scenario 1");
      break;
    case 3:
      if (!nonempty(spec.indomain_train) || !nonempty(spec.indomain_dev))
        throw ConfigError("scenario 3: missing in-domain training or development corpus");
      if (nonempty(spec.ood_train))
        throw ConfigError("scenario 3 takes no out-of-domain data");
      break;
  }

  NmtModel<Real> model(spec.model);
  ParameterSet<Real> init = model.init_params(spec.init_seed);

  const auto* pretrain_corpus = spec.id == 3 ? spec.indomain_train : spec.ood_train;
  const auto* pretrain_dev = spec.id == 3 ? spec.indomain_dev : spec.ood_dev;
  res.pretrain = train_offline(model, init, *pretrain_corpus, *pretrain_dev, spec.train);
  ParameterSet<Real> base = res.pretrain.params;

  if (fine_tune) {
    res.finetune =
        train_offline(model, base, *spec.indomain_train, *spec.indomain_dev, spec.train);
    base = res.finetune->params;
  }
  res.base_params = base;

  OnlineSpec none;
  none.algorithm = Algorithm::None;
  res.baseline = run_online_session(model, base, *spec.test, none, spec.tgt_vocab);
  res.baseline_report = report_from_trace(res.baseline, spec.bootstrap_samples,
                                          spec.bootstrap_seed);
  for (const auto& sys : spec.online_systems) {
    res.online.push_back(run_online_session(model, base, *spec.test, sys, spec.tgt_vocab));
    res.online_reports.push_back(
        report_from_trace(res.online.back(), spec.bootstrap_samples, spec.bootstrap_seed));
  }
  return res;
}

}  // namespace olnmt
