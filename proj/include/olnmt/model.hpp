#ifndef OLNMT_MODEL_HPP
#define OLNMT_MODEL_HPP

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "olnmt/params.hpp"
#include "olnmt/tensor.hpp"

// Attentional encoder-decoder: source embeddings feed a bidirectional LSTM
// whose concatenated states are the annotations; each decoding step attends
// over them with additive scoring, runs one LSTM step on [prev embedding;
// context], and produces the target distribution through a deep output layer.

namespace olnmt {

class VocabError : public std::runtime_error {
 public:
  explicit VocabError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ModelConfig {
  int src_vocab_size = 0;
  int tgt_vocab_size = 0;
  int embedding_dim = 64;
  int hidden_dim = 64;
  int attention_dim = 64;
  int deep_output_dim = 64;
  float weight_noise_sigma = 0.01f;
  int beam_size = 6;
  int max_output_length = 50;

  void validate() const {
    auto positive = [](int v, const char* name) {
      if (v < 1) throw std::invalid_argument(std::string("model config: ") + name +
                                             " must be positive, got " + std::to_string(v));
    };
    positive(src_vocab_size, "src_vocab_size");
    positive(tgt_vocab_size, "tgt_vocab_size");
    positive(embedding_dim, "embedding_dim");
    positive(hidden_dim, "hidden_dim");
    positive(attention_dim, "attention_dim");
    positive(deep_output_dim, "deep_output_dim");
    positive(beam_size, "beam_size");
    positive(max_output_length, "max_output_length");
    if (weight_noise_sigma < 0)
      throw std::invalid_argument("model config: weight_noise_sigma must be nonnegative");
  }
};

// special token indices, fixed in both vocabularies
namespace tok {
inline constexpr int kPad = 0;
inline constexpr int kSos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;
}  // namespace tok

// parameter registration order; the flat vector view follows it
namespace par {
enum : size_t {
  kSrcEmbed = 0,
  kEncFwdWx,
  kEncFwdWh,
  kEncFwdB,
  kEncBwdWx,
  kEncBwdWh,
  kEncBwdB,
  kDecInitW,
  kDecInitB,
  kAttnEncW,
  kAttnDecW,
  kAttnV,
  kTgtEmbed,
  kDecWx,
  kDecWh,
  kDecB,
  kDeepW,
  kDeepB,
  kOutW,
  kOutB,
  kCount
};
}  // namespace par

inline std::vector<std::pair<std::string, Shape>> parameter_spec(const ModelConfig& c) {
  int e = c.embedding_dim, h = c.hidden_dim, a = c.attention_dim, d = c.deep_output_dim;
  int vs = c.src_vocab_size, vt = c.tgt_vocab_size;
  std::vector<std::pair<std::string, Shape>> spec(par::kCount);
  spec[par::kSrcEmbed] = {"src_embed", {vs, e}};
  spec[par::kEncFwdWx] = {"enc_fwd_wx", {e, 4 * h}};
  spec[par::kEncFwdWh] = {"enc_fwd_wh", {h, 4 * h}};
  spec[par::kEncFwdB] = {"enc_fwd_b", {4 * h}};
  spec[par::kEncBwdWx] = {"enc_bwd_wx", {e, 4 * h}};
  spec[par::kEncBwdWh] = {"enc_bwd_wh", {h, 4 * h}};
  spec[par::kEncBwdB] = {"enc_bwd_b", {4 * h}};
  spec[par::kDecInitW] = {"dec_init_w", {2 * h, h}};
  spec[par::kDecInitB] = {"dec_init_b", {h}};
  spec[par::kAttnEncW] = {"attn_enc_w", {2 * h, a}};
  spec[par::kAttnDecW] = {"attn_dec_w", {h, a}};
  spec[par::kAttnV] = {"attn_v", {a}};
  spec[par::kTgtEmbed] = {"tgt_embed", {vt, e}};
  spec[par::kDecWx] = {"dec_wx", {e + 2 * h, 4 * h}};
  spec[par::kDecWh] = {"dec_wh", {h, 4 * h}};
  spec[par::kDecB] = {"dec_b", {4 * h}};
  spec[par::kDeepW] = {"deep_w", {3 * h + e, d}};
  spec[par::kDeepB] = {"deep_b", {d}};
  spec[par::kOutW] = {"out_w", {d, vt}};
  spec[par::kOutB] = {"out_b", {vt}};
  return spec;
}

struct Hypothesis {
  std::vector<int> tokens;  // ends with </s> unless truncated
  double log_prob = 0.0;
  bool truncated = false;
};

template <class R>
class NmtModel {
 public:
  explicit NmtModel(ModelConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const ModelConfig& config() const { return cfg_; }

  // Uniform [-0.08, 0.08]; LSTM forget-gate biases start at 1.
  ParameterSet<R> init_params(std::uint64_t seed) const {
    ParameterSet<R> ps;
    for (const auto& [name, shape] : parameter_spec(cfg_)) ps.add(name, shape);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.08, 0.08);
    for (auto& item : ps.items)
      for (R& x : item.data.v) x = (R)u(rng);
    int h = cfg_.hidden_dim;
    for (size_t b : {(size_t)par::kEncFwdB, (size_t)par::kEncBwdB, (size_t)par::kDecB})
      for (int i = h; i < 2 * h; ++i) ps[b].v[i] = R(1);
    return ps;
  }

  struct DecState {
    Tensor<R> h;
    Tensor<R> c;
  };

  // One annotation of dimension 2*hidden per source token, as [n x 2H].
  Tensor<R> encode(Graph<R>& g, const BoundParams<R>& p, const std::vector<int>& src) const {
    if (src.empty()) throw VocabError("encode: empty source sentence");
    for (int id : src)
      if (id < 0 || id >= cfg_.src_vocab_size)
        throw VocabError("encode: source token " + std::to_string(id) +
                         " outside vocabulary of size " + std::to_string(cfg_.src_vocab_size));
    int n = (int)src.size();
    Tensor<R> emb = lookup_rows(p[par::kSrcEmbed], src);  // [n x E]

    std::vector<Tensor<R>> fwd(n), bwd(n);
    Tensor<R> h = zeros(g, cfg_.hidden_dim), c = zeros(g, cfg_.hidden_dim);
    for (int i = 0; i < n; ++i) {
      std::tie(h, c) = lstm_step(slice_row(emb, i, cfg_.embedding_dim), h, c, p[par::kEncFwdWx],
                                 p[par::kEncFwdWh], p[par::kEncFwdB]);
      fwd[i] = h;
    }
    h = zeros(g, cfg_.hidden_dim);
    c = zeros(g, cfg_.hidden_dim);
    for (int i = n - 1; i >= 0; --i) {
      std::tie(h, c) = lstm_step(slice_row(emb, i, cfg_.embedding_dim), h, c, p[par::kEncBwdWx],
                                 p[par::kEncBwdWh], p[par::kEncBwdB]);
      bwd[i] = h;
    }
    std::vector<Tensor<R>> ann(n);
    for (int i = 0; i < n; ++i) ann[i] = concat(fwd[i], bwd[i]);
    return stack_rows(ann);
  }

  DecState init_state(Graph<R>& g, const BoundParams<R>& p, const Tensor<R>& annotations) const {
    Tensor<R> mean = mean_rows(annotations);
    Tensor<R> h = tanh(add(matmul(mean, p[par::kDecInitW]), p[par::kDecInitB]));
    return {h, zeros(g, cfg_.hidden_dim)};
  }

  // Additive attention over the annotations given the previous decoder state.
  // Returns (context, weights); weights are a distribution over positions.
  std::pair<Tensor<R>, Tensor<R>> attend(const BoundParams<R>& p, const Tensor<R>& annotations,
                                         const Tensor<R>& state) const {
    Tensor<R> enc_proj = matmul(annotations, p[par::kAttnEncW]);  // [n x A]
    Tensor<R> dec_proj = matmul(state, p[par::kAttnDecW]);        // [A]
    Tensor<R> scores = matmul(tanh(add(enc_proj, dec_proj)), p[par::kAttnV]);  // [n]
    Tensor<R> weights = softmax(scores);
    Tensor<R> context = matmul(weights, annotations);  // [2H]
    return {context, weights};
  }

  // One decoder step -> (next state, distribution over the target vocabulary).
  std::pair<DecState, Tensor<R>> decode_step(const BoundParams<R>& p, int prev_token,
                                             const DecState& state,
                                             const Tensor<R>& context) const {
    auto [next, logits] = decode_step_logits(p, prev_token, state, context);
    return {next, softmax(logits)};
  }

  // Same step but with pre-softmax logits, for forced scoring and beam search.
  std::pair<DecState, Tensor<R>> decode_step_logits(const BoundParams<R>& p, int prev_token,
                                                    const DecState& state,
                                                    const Tensor<R>& context) const {
    if (prev_token < 0 || prev_token >= cfg_.tgt_vocab_size)
      throw VocabError("decode_step: target token " + std::to_string(prev_token) +
                       " outside vocabulary of size " + std::to_string(cfg_.tgt_vocab_size));
    Tensor<R> e = lookup(p[par::kTgtEmbed], prev_token);
    Tensor<R> x = concat(e, context);
    auto [h, c] = lstm_step(x, state.h, state.c, p[par::kDecWx], p[par::kDecWh], p[par::kDecB]);
    Tensor<R> deep_in = concat(concat(h, context), e);
    Tensor<R> readout = tanh(add(matmul(deep_in, p[par::kDeepW]), p[par::kDeepB]));
    Tensor<R> logits = add(matmul(readout, p[par::kOutW]), p[par::kOutB]);
    return {DecState{h, c}, logits};
  }

  // Graph-building forced scorer: sum_i log p(tgt_i | tgt_<i, src). The first
  // step conditions on <s>; tgt is scored exactly as given and normally ends
  // with </s>. Also exposes the per-token log-prob tensors.
  Tensor<R> sentence_log_prob_graph(Graph<R>& g, const BoundParams<R>& p,
                                    const std::vector<int>& src, const std::vector<int>& tgt,
                                    std::vector<Tensor<R>>* token_log_probs = nullptr) const {
    if (tgt.empty()) throw VocabError("sentence_log_prob: empty target sentence");
    for (int id : tgt)
      if (id < 0 || id >= cfg_.tgt_vocab_size)
        throw VocabError("sentence_log_prob: target token " + std::to_string(id) +
                         " outside vocabulary of size " + std::to_string(cfg_.tgt_vocab_size));
    Tensor<R> ann = encode(g, p, src);
    DecState st = init_state(g, p, ann);
    int prev = tok::kSos;
    Tensor<R> total;
    for (int y : tgt) {
      auto [context, weights] = attend(p, ann, st.h);
      (void)weights;
      auto [next, logits] = decode_step_logits(p, prev, st, context);
      Tensor<R> lp = neg(cross_entropy(logits, y));
      if (token_log_probs) token_log_probs->push_back(lp);
      total = total.valid() ? add(total, lp) : lp;
      st = next;
      prev = y;
    }
    return total;
  }

  R sentence_log_prob(const ParameterSet<R>& params, const std::vector<int>& src,
                      const std::vector<int>& tgt) const {
    Graph<R> g;
    BoundParams<R> p = bind(g, params);
    return sentence_log_prob_graph(g, p, src, tgt).scalar();
  }

  std::vector<R> sentence_token_log_probs(const ParameterSet<R>& params,
                                          const std::vector<int>& src,
                                          const std::vector<int>& tgt) const {
    Graph<R> g;
    BoundParams<R> p = bind(g, params);
    std::vector<Tensor<R>> lps;
    sentence_log_prob_graph(g, p, src, tgt, &lps);
    std::vector<R> out;
    for (const auto& t : lps) out.push_back(t.scalar());
    return out;
  }

  // Value and gradient of +log p(tgt | src) wrt every parameter.
  std::pair<R, Gradients<R>> sentence_log_prob_with_grad(const ParameterSet<R>& params,
                                                         const std::vector<int>& src,
                                                         const std::vector<int>& tgt) const {
    Graph<R> g;
    BoundParams<R> p = bind(g, params);
    Tensor<R> lp = sentence_log_prob_graph(g, p, src, tgt);
    g.backward(lp);
    return {lp.scalar(), p.grads()};
  }

  // Breadth-limited best-first decoding. Hypotheses that reach </s> inside the
  // per-step top-k leave the beam; the best completed one is returned. If none
  // completes within max_output_length, the best partial is returned flagged
  // truncated. beam_size 1 therefore reproduces greedy argmax decoding.
  Hypothesis beam_search(const ParameterSet<R>& params, const std::vector<int>& src,
                         int beam_size = 0, int max_output_length = 0) const {
    if (beam_size <= 0) beam_size = cfg_.beam_size;
    if (max_output_length <= 0) max_output_length = cfg_.max_output_length;

    Graph<R> g;
    BoundParams<R> p = bind(g, params);
    Tensor<R> ann = encode(g, p, src);

    struct Beam {
      std::vector<int> tokens;
      DecState st;
      R lp = R(0);
    };
    std::vector<Beam> live;
    live.push_back({{}, init_state(g, p, ann), R(0)});

    std::vector<Hypothesis> completed;
    for (int step = 0; step < max_output_length && !live.empty(); ++step) {
      struct Cand {
        int beam;
        int token;
        R lp;
      };
      std::vector<Cand> cands;
      std::vector<DecState> next_states(live.size());
      for (size_t b = 0; b < live.size(); ++b) {
        auto [context, weights] = attend(p, ann, live[b].st.h);
        (void)weights;
        int prev = live[b].tokens.empty() ? tok::kSos : live[b].tokens.back();
        auto [next, logits] = decode_step_logits(p, prev, live[b].st, context);
        next_states[b] = next;
        // log-softmax computed the same way cross_entropy does, so forced
        // re-scoring reproduces hypothesis scores bit for bit
        const auto& x = logits.value();
        R mx = x[0];
        for (size_t i = 1; i < x.size(); ++i) mx = std::max(mx, x[i]);
        R z = 0;
        for (size_t i = 0; i < x.size(); ++i) z += std::exp(x[i] - mx);
        R lse = mx + std::log(z);
        for (int t = 0; t < cfg_.tgt_vocab_size; ++t)
          cands.push_back({(int)b, t, live[b].lp + (x[t] - lse)});
      }
      std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.lp != b.lp) return a.lp > b.lp;
        if (a.token != b.token) return a.token < b.token;
        return a.beam < b.beam;
      });
      std::vector<Beam> next_live;
      int taken = 0;
      for (const Cand& c : cands) {
        if (taken >= beam_size) break;
        ++taken;
        std::vector<int> toks = live[c.beam].tokens;
        toks.push_back(c.token);
        if (c.token == tok::kEos) {
          completed.push_back({std::move(toks), (double)c.lp, false});
        } else {
          next_live.push_back({std::move(toks), next_states[c.beam], c.lp});
        }
      }
      live = std::move(next_live);
    }

    if (!completed.empty()) {
      const Hypothesis* best = &completed[0];
      for (const auto& h : completed)
        if (h.log_prob > best->log_prob ||
            (h.log_prob == best->log_prob && h.tokens < best->tokens))
          best = &h;
      return *best;
    }
    // nothing completed: best partial, flagged
    const Beam* best = &live[0];
    for (const auto& b : live)
      if (b.lp > best->lp) best = &b;
    return {best->tokens, (double)best->lp, true};
  }

  // Training-time regularizer: independent zero-mean Gaussian noise on every
  // weight of a transient copy; sigma 0 returns the parameters untouched.
  ParameterSet<R> with_weight_noise(const ParameterSet<R>& params, R sigma,
                                    std::uint64_t seed) const {
    ParameterSet<R> out = params;
    if (sigma < 0) throw std::invalid_argument("weight noise sigma must be nonnegative");
    if (sigma == 0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, (double)sigma);
    for (auto& item : out.items)
      for (R& x : item.data.v) x += (R)n(rng);
    return out;
  }

 private:
  static Tensor<R> zeros(Graph<R>& g, int dim) {
    return g.input(TensorData<R>::zeros({dim}));
  }

  // rank-1 view of one matrix row
  static Tensor<R> slice_row(const Tensor<R>& matrix, int r, int cols) {
    Graph<R>* g = matrix.graph();
    const auto& v = matrix.value();
    std::vector<R> out(v.begin() + (size_t)r * cols, v.begin() + (size_t)(r + 1) * cols);
    int mi = matrix.index();
    return g->make(Shape{cols}, std::move(out), {mi},
                   [mi, r, cols](Graph<R>& gr, const Node<R>& nd) {
                     auto& mg = gr.node(mi).grad;
                     for (int c = 0; c < cols; ++c) mg[(size_t)r * cols + c] += nd.grad[c];
                   });
  }

  static std::pair<Tensor<R>, Tensor<R>> lstm_step(const Tensor<R>& x, const Tensor<R>& h,
                                                   const Tensor<R>& c, const Tensor<R>& wx,
                                                   const Tensor<R>& wh, const Tensor<R>& b) {
    int hidden = h.shape()[0];
    Tensor<R> z = add(add(matmul(x, wx), matmul(h, wh)), b);
    Tensor<R> i = sigmoid(slice(z, 0, hidden));
    Tensor<R> f = sigmoid(slice(z, hidden, hidden));
    Tensor<R> o = sigmoid(slice(z, 2 * hidden, hidden));
    Tensor<R> gate = tanh(slice(z, 3 * hidden, hidden));
    Tensor<R> c_next = add(mul(f, c), mul(i, gate));
    Tensor<R> h_next = mul(o, tanh(c_next));
    return {h_next, c_next};
  }

  ModelConfig cfg_;
};

}  // namespace olnmt

#endif  // OLNMT_MODEL_HPP
