#ifndef OLNMT_OPTIMIZERS_HPP
#define OLNMT_OPTIMIZERS_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "olnmt/model.hpp"
#include "olnmt/params.hpp"

// Per-sentence update rules: vanilla SGD, Adagrad, Adadelta and Adam over
// explicit gradients, plus the passive-aggressive subgradient updates (PAS and
// its projected variant PPAS) driven by the hypothesis/reference loss gap.

namespace olnmt {

enum class Algorithm { None, Sgd, Adagrad, Adadelta, Adam, Pas, Ppas };

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "none") return Algorithm::None;
  if (s == "sgd") return Algorithm::Sgd;
  if (s == "adagrad") return Algorithm::Adagrad;
  if (s == "adadelta") return Algorithm::Adadelta;
  if (s == "adam") return Algorithm::Adam;
  if (s == "pas") return Algorithm::Pas;
  if (s == "ppas") return Algorithm::Ppas;
  throw std::invalid_argument("unknown optimizer: '" + s + "'");
}

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::None: return "none";
    case Algorithm::Sgd: return "sgd";
    case Algorithm::Adagrad: return "adagrad";
    case Algorithm::Adadelta: return "adadelta";
    case Algorithm::Adam: return "adam";
    case Algorithm::Pas: return "pas";
    case Algorithm::Ppas: return "ppas";
  }
  return "?";
}

inline bool is_pa(Algorithm a) { return a == Algorithm::Pas || a == Algorithm::Ppas; }

struct HyperParams {
  double lr = 0;
  double C = 0;  // aggressiveness, PA methods only
};

// Grid-search winners on the Europarl validation set.
inline HyperParams default_hyperparams(Algorithm a) {
  switch (a) {
    case Algorithm::Sgd: return {1e-3, 0};
    case Algorithm::Adagrad: return {1e-4, 0};
    case Algorithm::Adadelta: return {1e-1, 0};
    case Algorithm::Adam: return {1e-3, 0};
    case Algorithm::Pas: return {1.0, 1e-2};
    case Algorithm::Ppas: return {1e-2, 1e-2};
    case Algorithm::None: return {0, 0};
  }
  return {0, 0};
}

// Candidate values 10^0 .. 10^-6 for lr, crossed with C for PA methods.
inline std::vector<HyperParams> hyperparameter_grid(Algorithm a) {
  std::vector<double> powers;
  for (int e = 0; e >= -6; --e) powers.push_back(std::pow(10.0, e));
  std::vector<HyperParams> grid;
  if (is_pa(a)) {
    for (double lr : powers)
      for (double c : powers) grid.push_back({lr, c});
  } else {
    for (double lr : powers) grid.push_back({lr, 0});
  }
  return grid;
}

// --- gradient optimizers ----------------------------------------------------

template <class R>
class GradientOptimizer {
 public:
  GradientOptimizer(Algorithm alg, double lr) : alg_(alg), lr_(lr) {
    if (alg != Algorithm::Sgd && alg != Algorithm::Adagrad && alg != Algorithm::Adadelta &&
        alg != Algorithm::Adam)
      throw std::invalid_argument("GradientOptimizer: " + to_string(alg) +
                                  " is not a gradient algorithm");
    if (lr <= 0) throw std::invalid_argument("learning rate must be positive");
  }

  Algorithm algorithm() const { return alg_; }
  double learning_rate() const { return lr_; }
  long step_count() const { return t_; }

  double adagrad_eps = 1e-8;
  double adadelta_decay = 0.95;
  double adadelta_eps = 1e-6;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void update(ParameterSet<R>& params, const Gradients<R>& grads) {
    check_aligned("optimizer update", params, grads);
    if (slot_a_.empty() && needs_slots()) {
      slot_a_ = zero_like(params);
      if (alg_ == Algorithm::Adadelta || alg_ == Algorithm::Adam) slot_b_ = zero_like(params);
    }
    switch (alg_) {
      case Algorithm::Sgd:
        for (size_t i = 0; i < grads.size(); ++i)
          for (size_t j = 0; j < grads[i].size(); ++j) params[i].v[j] -= (R)(lr_ * grads[i][j]);
        break;
      case Algorithm::Adagrad:
        for (size_t i = 0; i < grads.size(); ++i)
          for (size_t j = 0; j < grads[i].size(); ++j) {
            R g = grads[i][j];
            slot_a_[i][j] += g * g;
            params[i].v[j] -= (R)(lr_ * g / std::sqrt((double)slot_a_[i][j] + adagrad_eps));
          }
        break;
      case Algorithm::Adadelta:
        for (size_t i = 0; i < grads.size(); ++i)
          for (size_t j = 0; j < grads[i].size(); ++j) {
            R g = grads[i][j];
            double d = adadelta_decay;
            slot_a_[i][j] = (R)(d * slot_a_[i][j] + (1 - d) * g * g);
            double dx = -lr_ * std::sqrt((double)slot_b_[i][j] + adadelta_eps) /
                        std::sqrt((double)slot_a_[i][j] + adadelta_eps) * g;
            slot_b_[i][j] = (R)(d * slot_b_[i][j] + (1 - d) * dx * dx);
            params[i].v[j] += (R)dx;
          }
        break;
      case Algorithm::Adam: {
        ++t_;
        double c1 = 1.0 - std::pow(adam_beta1, (double)t_);
        double c2 = 1.0 - std::pow(adam_beta2, (double)t_);
        for (size_t i = 0; i < grads.size(); ++i)
          for (size_t j = 0; j < grads[i].size(); ++j) {
            R g = grads[i][j];
            slot_a_[i][j] = (R)(adam_beta1 * slot_a_[i][j] + (1 - adam_beta1) * g);
            slot_b_[i][j] = (R)(adam_beta2 * slot_b_[i][j] + (1 - adam_beta2) * g * g);
            double mhat = (double)slot_a_[i][j] / c1;
            double vhat = (double)slot_b_[i][j] / c2;
            params[i].v[j] -= (R)(lr_ * mhat / (std::sqrt(vhat) + adam_eps));
          }
        break;
      }
      default:
        break;
    }
  }

  // Accumulator access for invariant checks.
  const Gradients<R>& slot_a() const { return slot_a_; }
  const Gradients<R>& slot_b() const { return slot_b_; }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write optimizer state: " + path);
    const char magic[8] = {'O', 'L', 'N', 'M', 'T', 'O', 'P', 'T'};
    f.write(magic, 8);
    write_u32(f, 1);
    write_u32(f, (std::uint32_t)alg_);
    write_u32(f, (std::uint32_t)sizeof(R));
    f.write((const char*)&lr_, sizeof lr_);
    for (double d : {adagrad_eps, adadelta_decay, adadelta_eps, adam_beta1, adam_beta2, adam_eps})
      f.write((const char*)&d, sizeof d);
    std::uint64_t t = (std::uint64_t)t_;
    f.write((const char*)&t, sizeof t);
    write_slot(f, slot_a_);
    write_slot(f, slot_b_);
    if (!f) throw std::runtime_error("write failed for optimizer state: " + path);
  }

  static GradientOptimizer load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read optimizer state: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::string(magic, 8) != "OLNMTOPT")
      throw std::runtime_error(path + ": not an optimizer state file");
    if (read_u32(f) != 1) throw std::runtime_error(path + ": unsupported optimizer state version");
    auto alg = (Algorithm)read_u32(f);
    if (read_u32(f) != sizeof(R))
      throw std::runtime_error(path + ": optimizer state has a different scalar width");
    double lr;
    f.read((char*)&lr, sizeof lr);
    GradientOptimizer opt(alg, lr);
    for (double* d : {&opt.adagrad_eps, &opt.adadelta_decay, &opt.adadelta_eps, &opt.adam_beta1,
                      &opt.adam_beta2, &opt.adam_eps})
      f.read((char*)d, sizeof(double));
    std::uint64_t t;
    f.read((char*)&t, sizeof t);
    opt.t_ = (long)t;
    opt.slot_a_ = read_slot(f, path);
    opt.slot_b_ = read_slot(f, path);
    if (!f) throw std::runtime_error(path + ": truncated optimizer state");
    return opt;
  }

 private:
  bool needs_slots() const { return alg_ != Algorithm::Sgd; }

  static void write_u32(std::ostream& os, std::uint32_t v) { os.write((const char*)&v, 4); }
  static std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read((char*)&v, 4);
    return v;
  }
  static void write_slot(std::ostream& os, const Gradients<R>& g) {
    write_u32(os, (std::uint32_t)g.size());
    for (const auto& blk : g) {
      write_u32(os, (std::uint32_t)blk.size());
      os.write((const char*)blk.data(), (std::streamsize)(blk.size() * sizeof(R)));
    }
  }
  static Gradients<R> read_slot(std::istream& is, const std::string& path) {
    Gradients<R> g(read_u32(is));
    for (auto& blk : g) {
      blk.resize(read_u32(is));
      is.read((char*)blk.data(), (std::streamsize)(blk.size() * sizeof(R)));
      if (!is) throw std::runtime_error(path + ": truncated optimizer state");
    }
    return g;
  }

  Algorithm alg_;
  double lr_;
  long t_ = 0;
  Gradients<R> slot_a_;  // Adagrad G / Adadelta E[g^2] / Adam m
  Gradients<R> slot_b_;  // Adadelta E[dx^2] / Adam v
};

// --- passive-aggressive subgradient updates ---------------------------------

struct PAConfig {
  double lr = 1.0;
  double C = 1e-2;
  int k_max = 10;
  double clip_norm = 1.0;  // global-norm clip on the loss subgradient
  bool ppas_true_projection = false;

  void validate() const {
    if (lr <= 0 || C <= 0 || k_max < 1)
      throw std::invalid_argument("pa config: need lr > 0, C > 0, k_max >= 1");
  }
};

// The correctness-gap loss: evaluates l at arbitrary parameters and its
// subgradient. Lets the inner loop be exercised on synthetic losses too.
template <class R>
class PAObjective {
 public:
  virtual ~PAObjective() = default;
  virtual R loss(const ParameterSet<R>& params) = 0;
  virtual std::pair<R, Gradients<R>> loss_and_grad(const ParameterSet<R>& params) = 0;
};

// l = log p(hyp | src) - log p(ref | src); positive when the model prefers its
// own hypothesis to the post-edited reference.
template <class R>
class SentenceGapObjective : public PAObjective<R> {
 public:
  SentenceGapObjective(const NmtModel<R>& model, std::vector<int> src, std::vector<int> ref,
                       std::vector<int> hyp)
      : model_(model), src_(std::move(src)), ref_(std::move(ref)), hyp_(std::move(hyp)) {}

  R loss(const ParameterSet<R>& params) override {
    return model_.sentence_log_prob(params, src_, hyp_) -
           model_.sentence_log_prob(params, src_, ref_);
  }

  std::pair<R, Gradients<R>> loss_and_grad(const ParameterSet<R>& params) override {
    auto [lp_hyp, g_hyp] = model_.sentence_log_prob_with_grad(params, src_, hyp_);
    auto [lp_ref, g_ref] = model_.sentence_log_prob_with_grad(params, src_, ref_);
    add_scaled(g_hyp, R(-1), g_ref);
    return {lp_hyp - lp_ref, std::move(g_hyp)};
  }

 private:
  const NmtModel<R>& model_;
  std::vector<int> src_, ref_, hyp_;
};

template <class R>
R pa_loss(const NmtModel<R>& model, const ParameterSet<R>& params, const std::vector<int>& src,
          const std::vector<int>& ref, const std::vector<int>& hyp) {
  SentenceGapObjective<R> obj(model, src, ref, hyp);
  return obj.loss(params);
}

template <class R>
struct PAResult {
  ParameterSet<R> params;
  R initial_loss = 0;
  R final_loss = 0;
  int iterations = 0;
  bool passive = false;
  bool aborted = false;  // non-finite value or gradient; anchor returned unchanged
  bool retried = false;  // safeguard re-ran the loop at half the step size
  double displacement_norm = 0;
};

namespace detail {

template <class R>
double pa_objective_value(const ParameterSet<R>& work, const ParameterSet<R>& anchor, double C,
                          R loss) {
  double d = param_dist(work, anchor);
  return 0.5 * d * d + C * std::max(0.0, (double)loss);
}

}  // namespace detail

// Proximal subgradient minimization of F(th) = 1/2 ||th - anchor||^2 +
// C max(0, l(th)), starting at the anchor and stopping once the correctness
// criterion holds (l <= 0) or k_max iterations ran. If the final iterate has
// a worse F than the anchor, the loop is retried once at half the step size
// and, failing that, the best iterate seen is returned.
template <class R>
PAResult<R> pas_update(const ParameterSet<R>& anchor, PAObjective<R>& obj, const PAConfig& cfg) {
  cfg.validate();
  PAResult<R> res;
  res.params = anchor;

  auto [l0, g0] = obj.loss_and_grad(anchor);
  if (!std::isfinite((double)l0) || !all_finite(g0)) {
    res.aborted = true;
    return res;
  }
  res.initial_loss = res.final_loss = l0;
  if (l0 <= 0) {
    res.passive = true;
    return res;
  }

  double anchor_f = cfg.C * (double)l0;
  double best_f = anchor_f;
  ParameterSet<R> best = anchor;
  R best_loss = l0;

  auto run = [&](double rho, PAResult<R>& out) -> bool {
    ParameterSet<R> work = anchor;
    R cur_l = l0;
    Gradients<R> cur_g = g0;
    for (int k = 1; k <= cfg.k_max; ++k) {
      Gradients<R> step = param_diff(work, anchor);  // d/dth of the proximal term
      clip_global_norm(cur_g, cfg.clip_norm);
      if (cur_l > 0) add_scaled(step, (R)cfg.C, cur_g);
      axpy(work, (R)-rho, step);

      auto [l, g] = obj.loss_and_grad(work);
      if (!std::isfinite((double)l) || !all_finite(g) || !work.all_finite()) return false;
      out.iterations = k;
      double f = detail::pa_objective_value(work, anchor, cfg.C, l);
      if (f < best_f) {
        best_f = f;
        best = work;
        best_loss = l;
      }
      cur_l = l;
      cur_g = std::move(g);
      if (l <= 0) break;
    }
    out.params = std::move(work);
    out.final_loss = cur_l;
    return true;
  };

  if (!run(cfg.lr, res)) {
    res = PAResult<R>{};
    res.params = anchor;
    res.aborted = true;
    res.initial_loss = l0;
    return res;
  }
  if (detail::pa_objective_value(res.params, anchor, cfg.C, res.final_loss) > anchor_f) {
    res.retried = true;
    if (!run(cfg.lr / 2, res)) {
      res.params = anchor;
      res.final_loss = l0;
      res.aborted = true;
      return res;
    }
    if (detail::pa_objective_value(res.params, anchor, cfg.C, res.final_loss) > anchor_f) {
      res.params = std::move(best);
      res.final_loss = best_loss;
    }
  }
  res.displacement_norm = param_dist(res.params, anchor);
  return res;
}

// Projected variant: iterate plain subgradient steps on max(0, l), then apply
// a displacement rescaled to L2 norm C. A criterion already satisfied at the
// anchor produces a zero update.
template <class R>
PAResult<R> ppas_update(const ParameterSet<R>& anchor, PAObjective<R>& obj, const PAConfig& cfg) {
  cfg.validate();
  PAResult<R> res;
  res.params = anchor;

  auto [l0, g0] = obj.loss_and_grad(anchor);
  if (!std::isfinite((double)l0) || !all_finite(g0)) {
    res.aborted = true;
    return res;
  }
  res.initial_loss = res.final_loss = l0;
  if (l0 <= 0) {
    res.passive = true;
    return res;
  }

  ParameterSet<R> work = anchor;
  Gradients<R> cur_g = std::move(g0);
  for (int k = 1; k <= cfg.k_max; ++k) {
    clip_global_norm(cur_g, cfg.clip_norm);
    axpy(work, (R)-cfg.lr, cur_g);
    auto [l, g] = obj.loss_and_grad(work);
    if (!std::isfinite((double)l) || !all_finite(g) || !work.all_finite()) {
      res.params = anchor;
      res.aborted = true;
      return res;
    }
    res.iterations = k;
    res.final_loss = l;
    cur_g = std::move(g);
    if (l <= 0) break;
  }

  Gradients<R> d = param_diff(work, anchor);
  double norm = global_norm(d);
  if (norm == 0) return res;  // flat violated point; leave parameters alone
  double factor = cfg.ppas_true_projection ? std::min(1.0, cfg.C / norm) : cfg.C / norm;
  res.params = anchor;
  axpy(res.params, (R)factor, d);
  res.displacement_norm = factor * norm;
  return res;
}

}  // namespace olnmt

#endif  // OLNMT_OPTIMIZERS_HPP
