#ifndef OLNMT_TENSOR_HPP
#define OLNMT_TENSOR_HPP

#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

// Reverse-mode autodiff over dense row-major tensors. A Graph owns the nodes
// of one forward computation in creation order (which is a topological order);
// backward() walks them once in reverse. Tensors are cheap handles into a
// graph and must not outlive it.

namespace olnmt {

class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

using Shape = std::vector<int>;

inline long numel(const Shape& s) {
  long n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

[[noreturn]] inline void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) +
                   " and " + shape_str(b));
}

template <class R>
struct TensorData {
  Shape shape;
  std::vector<R> v;

  TensorData() = default;
  TensorData(Shape s, std::vector<R> vals) : shape(std::move(s)), v(std::move(vals)) {
    if ((long)v.size() != numel(shape))
      throw ShapeError("tensor: " + std::to_string(v.size()) + " values for shape " +
                       shape_str(shape));
  }
  static TensorData zeros(Shape s) {
    TensorData t;
    t.v.assign(numel(s), R(0));
    t.shape = std::move(s);
    return t;
  }
  long size() const { return (long)v.size(); }
};

template <class R>
class Graph;

template <class R>
struct Node {
  Shape shape;
  std::vector<R> value;
  std::vector<R> grad;
  std::vector<int> parents;
  // Accumulates into the parents' grads given this node's grad.
  std::function<void(Graph<R>&, const Node&)> backprop;
};

template <class R>
class Tensor {
 public:
  Tensor() : g_(nullptr), idx_(-1) {}
  Tensor(Graph<R>* g, int idx) : g_(g), idx_(idx) {}

  bool valid() const { return g_ != nullptr; }
  Graph<R>* graph() const { return g_; }
  int index() const { return idx_; }

  const Shape& shape() const { return node().shape; }
  const std::vector<R>& value() const { return node().value; }
  const std::vector<R>& grad() const { return node().grad; }
  long size() const { return (long)node().value.size(); }

  R scalar() const {
    if (size() != 1) throw ShapeError("scalar(): tensor has shape " + shape_str(shape()));
    return node().value[0];
  }

 private:
  const Node<R>& node() const;
  Graph<R>* g_;
  int idx_;
  friend class Graph<R>;
};

template <class R>
class Graph {
 public:
  // Leaf holding a copy of the data; gradients accumulate on it like any node.
  Tensor<R> input(const TensorData<R>& t) {
    Node<R> n;
    n.shape = t.shape;
    n.value = t.v;
    n.grad.assign(t.v.size(), R(0));
    nodes_.push_back(std::move(n));
    return Tensor<R>(this, (int)nodes_.size() - 1);
  }

  Tensor<R> input(Shape s, std::vector<R> v) { return input(TensorData<R>(std::move(s), std::move(v))); }

  Tensor<R> scalar_input(R v) { return input(Shape{}, std::vector<R>{v}); }

  // Runs reverse accumulation from a scalar loss. Grads are reset first unless
  // accumulate is set, in which case leaf grads are kept and repeated calls sum
  // their contributions (interior node grads are scratch and always reset).
  void backward(const Tensor<R>& loss, bool accumulate = false) {
    if (loss.graph() != this || !loss.valid())
      throw ShapeError("backward: loss tensor is detached from this graph");
    if (loss.size() != 1)
      throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    for (auto& n : nodes_)
      if (!accumulate || n.backprop) std::fill(n.grad.begin(), n.grad.end(), R(0));
    nodes_[loss.index()].grad[0] += R(1);
    for (int i = loss.index(); i >= 0; --i) {
      const Node<R>& n = nodes_[i];
      if (n.backprop) n.backprop(*this, n);
    }
  }

  Node<R>& node(int i) { return nodes_[i]; }
  const Node<R>& node(int i) const { return nodes_[i]; }
  size_t size() const { return nodes_.size(); }

  // --- op helpers -------------------------------------------------------

  Tensor<R> make(Shape shape, std::vector<R> value, std::vector<int> parents,
                 std::function<void(Graph<R>&, const Node<R>&)> backprop) {
    Node<R> n;
    n.shape = std::move(shape);
    n.value = std::move(value);
    n.grad.assign(n.value.size(), R(0));
    n.parents = std::move(parents);
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Tensor<R>(this, (int)nodes_.size() - 1);
  }

 private:
  std::vector<Node<R>> nodes_;
};

template <class R>
const Node<R>& Tensor<R>::node() const {
  if (!g_) throw ShapeError("tensor handle is detached");
  return g_->node(idx_);
}

namespace detail {

template <class R>
Graph<R>* same_graph(const char* op, const Tensor<R>& a, const Tensor<R>& b) {
  if (!a.valid() || !b.valid() || a.graph() != b.graph())
    throw ShapeError(std::string(op) + ": operands belong to different graphs");
  return a.graph();
}

}  // namespace detail

// --- elementwise --------------------------------------------------------

// add supports equal shapes, plus the one sanctioned broadcast: a is [m x n],
// b is [n] (bias applied to every row).
template <class R>
Tensor<R> add(const Tensor<R>& a, const Tensor<R>& b) {
  Graph<R>* g = detail::same_graph("add", a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (a.shape() == b.shape()) {
    std::vector<R> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
    int ai = a.index(), bi = b.index();
    return g->make(a.shape(), std::move(out), {ai, bi},
                   [ai, bi](Graph<R>& gr, const Node<R>& n) {
                     auto& ag = gr.node(ai).grad;
                     auto& bg = gr.node(bi).grad;
                     for (size_t i = 0; i < n.grad.size(); ++i) {
                       ag[i] += n.grad[i];
                       bg[i] += n.grad[i];
                     }
                   });
  }
  if (a.shape().size() == 2 && b.shape().size() == 1 && a.shape()[1] == b.shape()[0]) {
    int rows = a.shape()[0], cols = a.shape()[1];
    std::vector<R> out(av.size());
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) out[r * cols + c] = av[r * cols + c] + bv[c];
    int ai = a.index(), bi = b.index();
    return g->make(a.shape(), std::move(out), {ai, bi},
                   [ai, bi, rows, cols](Graph<R>& gr, const Node<R>& n) {
                     auto& ag = gr.node(ai).grad;
                     auto& bg = gr.node(bi).grad;
                     for (int r = 0; r < rows; ++r)
                       for (int c = 0; c < cols; ++c) {
                         ag[r * cols + c] += n.grad[r * cols + c];
                         bg[c] += n.grad[r * cols + c];
                       }
                   });
  }
  shape_fail("add", a.shape(), b.shape());
}

template <class R>
Tensor<R> sub(const Tensor<R>& a, const Tensor<R>& b) {
  Graph<R>* g = detail::same_graph("sub", a, b);
  if (a.shape() != b.shape()) shape_fail("sub", a.shape(), b.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<R> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  int ai = a.index(), bi = b.index();
  return g->make(a.shape(), std::move(out), {ai, bi},
                 [ai, bi](Graph<R>& gr, const Node<R>& n) {
                   auto& ag = gr.node(ai).grad;
                   auto& bg = gr.node(bi).grad;
                   for (size_t i = 0; i < n.grad.size(); ++i) {
                     ag[i] += n.grad[i];
                     bg[i] -= n.grad[i];
                   }
                 });
}

template <class R>
Tensor<R> mul(const Tensor<R>& a, const Tensor<R>& b) {
  Graph<R>* g = detail::same_graph("mul", a, b);
  if (a.shape() != b.shape()) shape_fail("mul", a.shape(), b.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<R> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  int ai = a.index(), bi = b.index();
  return g->make(a.shape(), std::move(out), {ai, bi},
                 [ai, bi](Graph<R>& gr, const Node<R>& n) {
                   const auto& av2 = gr.node(ai).value;
                   const auto& bv2 = gr.node(bi).value;
                   auto& ag = gr.node(ai).grad;
                   auto& bg = gr.node(bi).grad;
                   for (size_t i = 0; i < n.grad.size(); ++i) {
                     ag[i] += n.grad[i] * bv2[i];
                     bg[i] += n.grad[i] * av2[i];
                   }
                 });
}

template <class R>
Tensor<R> scale(const Tensor<R>& a, R c) {
  Graph<R>* g = a.graph();
  const auto& av = a.value();
  std::vector<R> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * c;
  int ai = a.index();
  return g->make(a.shape(), std::move(out), {ai},
                 [ai, c](Graph<R>& gr, const Node<R>& n) {
                   auto& ag = gr.node(ai).grad;
                   for (size_t i = 0; i < n.grad.size(); ++i) ag[i] += n.grad[i] * c;
                 });
}

template <class R>
Tensor<R> neg(const Tensor<R>& a) {
  return scale(a, R(-1));
}

#define OLNMT_UNARY(name, fwd, bwd)                                              \
  template <class R>                                                             \
  Tensor<R> name(const Tensor<R>& a) {                                           \
    Graph<R>* g = a.graph();                                                     \
    const auto& av = a.value();                                                  \
    std::vector<R> out(av.size());                                               \
    for (size_t i = 0; i < av.size(); ++i) {                                     \
      R x = av[i];                                                               \
      (void)x;                                                                   \
      out[i] = (fwd);                                                            \
    }                                                                            \
    int ai = a.index();                                                          \
    return g->make(a.shape(), std::move(out), {ai},                              \
                   [ai](Graph<R>& gr, const Node<R>& n) {                        \
                     const auto& x_ = gr.node(ai).value;                         \
                     auto& ag = gr.node(ai).grad;                                \
                     for (size_t i = 0; i < n.grad.size(); ++i) {                \
                       R x = x_[i];                                              \
                       R y = n.value[i];                                         \
                       (void)x;                                                  \
                       (void)y;                                                  \
                       ag[i] += n.grad[i] * (bwd);                               \
                     }                                                           \
                   });                                                           \
  }

OLNMT_UNARY(tanh, std::tanh(x), (R(1) - y * y))
OLNMT_UNARY(sigmoid, R(1) / (R(1) + std::exp(-x)), y*(R(1) - y))
OLNMT_UNARY(exp, std::exp(x), y)
OLNMT_UNARY(log, std::log(x), R(1) / x)

#undef OLNMT_UNARY

// --- reductions and structure -------------------------------------------

template <class R>
Tensor<R> sum(const Tensor<R>& a) {
  Graph<R>* g = a.graph();
  R s = std::accumulate(a.value().begin(), a.value().end(), R(0));
  int ai = a.index();
  return g->make(Shape{}, {s}, {ai}, [ai](Graph<R>& gr, const Node<R>& n) {
    auto& ag = gr.node(ai).grad;
    for (size_t i = 0; i < ag.size(); ++i) ag[i] += n.grad[0];
  });
}

template <class R>
Tensor<R> concat(const Tensor<R>& a, const Tensor<R>& b) {
  Graph<R>* g = detail::same_graph("concat", a, b);
  if (a.shape().size() != 1 || b.shape().size() != 1)
    shape_fail("concat", a.shape(), b.shape());
  std::vector<R> out(a.value());
  out.insert(out.end(), b.value().begin(), b.value().end());
  int ai = a.index(), bi = b.index();
  long na = a.size();
  return g->make(Shape{(int)(a.size() + b.size())}, std::move(out), {ai, bi},
                 [ai, bi, na](Graph<R>& gr, const Node<R>& n) {
                   auto& ag = gr.node(ai).grad;
                   auto& bg = gr.node(bi).grad;
                   for (long i = 0; i < na; ++i) ag[i] += n.grad[i];
                   for (size_t i = na; i < n.grad.size(); ++i) bg[i - na] += n.grad[i];
                 });
}

// Contiguous slice of a rank-1 tensor.
template <class R>
Tensor<R> slice(const Tensor<R>& a, int begin, int len) {
  Graph<R>* g = a.graph();
  if (a.shape().size() != 1 || begin < 0 || len < 0 || begin + len > a.shape()[0])
    throw ShapeError("slice: range [" + std::to_string(begin) + "," +
                     std::to_string(begin + len) + ") out of " + shape_str(a.shape()));
  std::vector<R> out(a.value().begin() + begin, a.value().begin() + begin + len);
  int ai = a.index();
  return g->make(Shape{len}, std::move(out), {ai},
                 [ai, begin](Graph<R>& gr, const Node<R>& n) {
                   auto& ag = gr.node(ai).grad;
                   for (size_t i = 0; i < n.grad.size(); ++i) ag[begin + i] += n.grad[i];
                 });
}

// Stacks equal-length rank-1 tensors into a [n x d] matrix.
template <class R>
Tensor<R> stack_rows(const std::vector<Tensor<R>>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  Graph<R>* g = rows[0].graph();
  int d = rows[0].shape().size() == 1 ? rows[0].shape()[0] : -1;
  std::vector<R> out;
  std::vector<int> parents;
  for (const auto& r : rows) {
    detail::same_graph("stack_rows", rows[0], r);
    if (r.shape().size() != 1 || r.shape()[0] != d)
      shape_fail("stack_rows", rows[0].shape(), r.shape());
    out.insert(out.end(), r.value().begin(), r.value().end());
    parents.push_back(r.index());
  }
  std::vector<int> ps = parents;
  return g->make(Shape{(int)rows.size(), d}, std::move(out), std::move(parents),
                 [ps, d](Graph<R>& gr, const Node<R>& n) {
                   for (size_t r = 0; r < ps.size(); ++r) {
                     auto& pg = gr.node(ps[r]).grad;
                     for (int c = 0; c < d; ++c) pg[c] += n.grad[r * d + c];
                   }
                 });
}

// Mean over the rows of a [n x d] matrix.
template <class R>
Tensor<R> mean_rows(const Tensor<R>& a) {
  Graph<R>* g = a.graph();
  if (a.shape().size() != 2) throw ShapeError("mean_rows: need rank 2, got " + shape_str(a.shape()));
  int rows = a.shape()[0], cols = a.shape()[1];
  std::vector<R> out(cols, R(0));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out[c] += a.value()[r * cols + c];
  for (int c = 0; c < cols; ++c) out[c] /= R(rows);
  int ai = a.index();
  return g->make(Shape{cols}, std::move(out), {ai},
                 [ai, rows, cols](Graph<R>& gr, const Node<R>& n) {
                   auto& ag = gr.node(ai).grad;
                   for (int r = 0; r < rows; ++r)
                     for (int c = 0; c < cols; ++c) ag[r * cols + c] += n.grad[c] / R(rows);
                 });
}

// --- matmul ---------------------------------------------------------------
// Supported: [m x k][k x n] -> [m x n], [m x k][k] -> [m], [k][k x n] -> [n].

template <class R>
Tensor<R> matmul(const Tensor<R>& a, const Tensor<R>& b) {
  Graph<R>* g = detail::same_graph("matmul", a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  int ai = a.index(), bi = b.index();

  if (sa.size() == 2 && sb.size() == 2) {
    if (sa[1] != sb[0]) shape_fail("matmul", sa, sb);
    int m = sa[0], k = sa[1], n = sb[1];
    std::vector<R> out((size_t)m * n, R(0));
    const auto& av = a.value();
    const auto& bv = b.value();
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < k; ++p) {
        R x = av[i * k + p];
        for (int j = 0; j < n; ++j) out[i * n + j] += x * bv[p * n + j];
      }
    return g->make(Shape{m, n}, std::move(out), {ai, bi},
                   [ai, bi, m, k, n](Graph<R>& gr, const Node<R>& nd) {
                     const auto& av2 = gr.node(ai).value;
                     const auto& bv2 = gr.node(bi).value;
                     auto& ag = gr.node(ai).grad;
                     auto& bg = gr.node(bi).grad;
                     // dA = dY B^T ; dB = A^T dY
                     for (int i = 0; i < m; ++i)
                       for (int p = 0; p < k; ++p) {
                         R s = 0;
                         for (int j = 0; j < n; ++j) s += nd.grad[i * n + j] * bv2[p * n + j];
                         ag[i * k + p] += s;
                       }
                     for (int p = 0; p < k; ++p)
                       for (int j = 0; j < n; ++j) {
                         R s = 0;
                         for (int i = 0; i < m; ++i) s += av2[i * k + p] * nd.grad[i * n + j];
                         bg[p * n + j] += s;
                       }
                   });
  }
  if (sa.size() == 2 && sb.size() == 1) {
    if (sa[1] != sb[0]) shape_fail("matmul", sa, sb);
    int m = sa[0], k = sa[1];
    std::vector<R> out(m, R(0));
    for (int i = 0; i < m; ++i) {
      R s = 0;
      for (int p = 0; p < k; ++p) s += a.value()[i * k + p] * b.value()[p];
      out[i] = s;
    }
    return g->make(Shape{m}, std::move(out), {ai, bi},
                   [ai, bi, m, k](Graph<R>& gr, const Node<R>& nd) {
                     const auto& av2 = gr.node(ai).value;
                     const auto& bv2 = gr.node(bi).value;
                     auto& ag = gr.node(ai).grad;
                     auto& bg = gr.node(bi).grad;
                     for (int i = 0; i < m; ++i)
                       for (int p = 0; p < k; ++p) {
                         ag[i * k + p] += nd.grad[i] * bv2[p];
                         bg[p] += av2[i * k + p] * nd.grad[i];
                       }
                   });
  }
  if (sa.size() == 1 && sb.size() == 2) {
    if (sa[0] != sb[0]) shape_fail("matmul", sa, sb);
    int k = sa[0], n = sb[1];
    std::vector<R> out(n, R(0));
    for (int p = 0; p < k; ++p) {
      R x = a.value()[p];
      for (int j = 0; j < n; ++j) out[j] += x * b.value()[p * n + j];
    }
    return g->make(Shape{n}, std::move(out), {ai, bi},
                   [ai, bi, k, n](Graph<R>& gr, const Node<R>& nd) {
                     const auto& av2 = gr.node(ai).value;
                     const auto& bv2 = gr.node(bi).value;
                     auto& ag = gr.node(ai).grad;
                     auto& bg = gr.node(bi).grad;
                     for (int p = 0; p < k; ++p) {
                       R s = 0;
                       for (int j = 0; j < n; ++j) {
                         s += nd.grad[j] * bv2[p * n + j];
                         bg[p * n + j] += av2[p] * nd.grad[j];
                       }
                       ag[p] += s;
                     }
                   });
  }
  shape_fail("matmul", sa, sb);
}

// --- softmax / cross entropy ----------------------------------------------

// Softmax over the last axis of a rank-1 or rank-2 tensor, with the row max
// subtracted before exponentiation.
template <class R>
Tensor<R> softmax(const Tensor<R>& a) {
  Graph<R>* g = a.graph();
  const Shape& s = a.shape();
  int rows, cols;
  if (s.size() == 1) {
    rows = 1;
    cols = s[0];
  } else if (s.size() == 2) {
    rows = s[0];
    cols = s[1];
  } else {
    throw ShapeError("softmax: need rank 1 or 2, got " + shape_str(s));
  }
  if (cols == 0) throw ShapeError("softmax: empty axis in " + shape_str(s));
  std::vector<R> out(a.value().size());
  for (int r = 0; r < rows; ++r) {
    const R* x = a.value().data() + (size_t)r * cols;
    R* y = out.data() + (size_t)r * cols;
    R mx = x[0];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, x[c]);
    R z = 0;
    for (int c = 0; c < cols; ++c) {
      y[c] = std::exp(x[c] - mx);
      z += y[c];
    }
    for (int c = 0; c < cols; ++c) y[c] /= z;
  }
  int ai = a.index();
  return g->make(s, std::move(out), {ai},
                 [ai, rows, cols](Graph<R>& gr, const Node<R>& nd) {
                   auto& ag = gr.node(ai).grad;
                   for (int r = 0; r < rows; ++r) {
                     const R* y = nd.value.data() + (size_t)r * cols;
                     const R* dy = nd.grad.data() + (size_t)r * cols;
                     R dot = 0;
                     for (int c = 0; c < cols; ++c) dot += y[c] * dy[c];
                     for (int c = 0; c < cols; ++c)
                       ag[(size_t)r * cols + c] += y[c] * (dy[c] - dot);
                   }
                 });
}

// -log softmax(logits)[target], fused for stability. Scalar output.
template <class R>
Tensor<R> cross_entropy(const Tensor<R>& logits, int target) {
  Graph<R>* g = logits.graph();
  if (logits.shape().size() != 1)
    throw ShapeError("cross_entropy: logits must be rank 1, got " + shape_str(logits.shape()));
  int n = logits.shape()[0];
  if (target < 0 || target >= n)
    throw ShapeError("cross_entropy: target " + std::to_string(target) + " out of " +
                     shape_str(logits.shape()));
  const auto& x = logits.value();
  R mx = x[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  R z = 0;
  for (int i = 0; i < n; ++i) z += std::exp(x[i] - mx);
  R lse = mx + std::log(z);
  R loss = lse - x[target];
  int ai = logits.index();
  return g->make(Shape{}, {loss}, {ai},
                 [ai, n, target, mx, lse](Graph<R>& gr, const Node<R>& nd) {
                   const auto& x2 = gr.node(ai).value;
                   auto& ag = gr.node(ai).grad;
                   (void)mx;
                   for (int i = 0; i < n; ++i) {
                     R p = std::exp(x2[i] - lse);
                     ag[i] += nd.grad[0] * (p - (i == target ? R(1) : R(0)));
                   }
                 });
}

// Single-row embedding lookup: table is [V x d], result is [d].
template <class R>
Tensor<R> lookup(const Tensor<R>& table, int id) {
  Graph<R>* g = table.graph();
  if (table.shape().size() != 2)
    throw ShapeError("lookup: table must be rank 2, got " + shape_str(table.shape()));
  int v = table.shape()[0], d = table.shape()[1];
  if (id < 0 || id >= v)
    throw ShapeError("lookup: index " + std::to_string(id) + " out of " + shape_str(table.shape()));
  std::vector<R> out(table.value().begin() + (size_t)id * d,
                     table.value().begin() + (size_t)(id + 1) * d);
  int ai = table.index();
  return g->make(Shape{d}, std::move(out), {ai},
                 [ai, id, d](Graph<R>& gr, const Node<R>& nd) {
                   auto& ag = gr.node(ai).grad;
                   for (int c = 0; c < d; ++c) ag[(size_t)id * d + c] += nd.grad[c];
                 });
}

// Multi-row lookup: result is [ids.size() x d].
template <class R>
Tensor<R> lookup_rows(const Tensor<R>& table, const std::vector<int>& ids) {
  Graph<R>* g = table.graph();
  if (table.shape().size() != 2)
    throw ShapeError("lookup_rows: table must be rank 2, got " + shape_str(table.shape()));
  if (ids.empty()) throw ShapeError("lookup_rows: empty id list");
  int v = table.shape()[0], d = table.shape()[1];
  std::vector<R> out;
  out.reserve(ids.size() * d);
  for (int id : ids) {
    if (id < 0 || id >= v)
      throw ShapeError("lookup_rows: index " + std::to_string(id) + " out of " +
                       shape_str(table.shape()));
    out.insert(out.end(), table.value().begin() + (size_t)id * d,
               table.value().begin() + (size_t)(id + 1) * d);
  }
  int ai = table.index();
  std::vector<int> ids_copy = ids;
  return g->make(Shape{(int)ids.size(), d}, std::move(out), {ai},
                 [ai, ids_copy, d](Graph<R>& gr, const Node<R>& nd) {
                   auto& ag = gr.node(ai).grad;
                   for (size_t r = 0; r < ids_copy.size(); ++r)
                     for (int c = 0; c < d; ++c)
                       ag[(size_t)ids_copy[r] * d + c] += nd.grad[r * d + c];
                 });
}

}  // namespace olnmt

#endif  // OLNMT_TENSOR_HPP
