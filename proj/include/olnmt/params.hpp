#ifndef OLNMT_PARAMS_HPP
#define OLNMT_PARAMS_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "olnmt/tensor.hpp"

// Named model parameters plus flat-vector arithmetic over them. The flat view
// (all tensors concatenated in registration order) is what parameter-space
// norms and proximal updates operate on.

namespace olnmt {

template <class R>
struct NamedTensor {
  std::string name;
  TensorData<R> data;
};

template <class R>
struct ParameterSet {
  std::vector<NamedTensor<R>> items;

  int add(std::string name, Shape shape) {
    items.push_back({std::move(name), TensorData<R>::zeros(std::move(shape))});
    return (int)items.size() - 1;
  }

  size_t count() const { return items.size(); }
  TensorData<R>& operator[](size_t i) { return items[i].data; }
  const TensorData<R>& operator[](size_t i) const { return items[i].data; }

  long total_size() const {
    long n = 0;
    for (const auto& it : items) n += it.data.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& it : items)
      for (R x : it.data.v)
        if (!std::isfinite((double)x)) return false;
    return true;
  }

  template <class R2>
  ParameterSet<R2> cast() const {
    ParameterSet<R2> out;
    for (const auto& it : items) {
      out.items.push_back({it.name, TensorData<R2>::zeros(it.data.shape)});
      for (size_t i = 0; i < it.data.v.size(); ++i)
        out.items.back().data.v[i] = (R2)it.data.v[i];
    }
    return out;
  }
};

// Per-parameter gradient (or displacement) arrays aligned with a ParameterSet.
template <class R>
using Gradients = std::vector<std::vector<R>>;

template <class R>
Gradients<R> zero_like(const ParameterSet<R>& ps) {
  Gradients<R> g(ps.count());
  for (size_t i = 0; i < ps.count(); ++i) g[i].assign(ps[i].v.size(), R(0));
  return g;
}

template <class R>
void check_aligned(const char* op, const ParameterSet<R>& ps, const Gradients<R>& g) {
  if (g.size() != ps.count())
    throw ShapeError(std::string(op) + ": " + std::to_string(g.size()) +
                     " gradient blocks for " + std::to_string(ps.count()) + " parameters");
  for (size_t i = 0; i < g.size(); ++i)
    if (g[i].size() != ps[i].v.size())
      throw ShapeError(std::string(op) + ": gradient block '" + ps.items[i].name + "' has " +
                       std::to_string(g[i].size()) + " entries, parameter has " +
                       std::to_string(ps[i].v.size()));
}

template <class R>
double global_norm(const Gradients<R>& g) {
  double s = 0;
  for (const auto& blk : g)
    for (R x : blk) s += (double)x * (double)x;
  return std::sqrt(s);
}

template <class R>
bool all_finite(const Gradients<R>& g) {
  for (const auto& blk : g)
    for (R x : blk)
      if (!std::isfinite((double)x)) return false;
  return true;
}

// Scales gradients to max_norm when their global L2 norm exceeds it.
// Returns the pre-clip norm.
template <class R>
double clip_global_norm(Gradients<R>& g, double max_norm) {
  double n = global_norm(g);
  if (n > max_norm && n > 0) {
    R f = (R)(max_norm / n);
    for (auto& blk : g)
      for (R& x : blk) x *= f;
  }
  return n;
}

template <class R>
void scale_grads(Gradients<R>& g, R f) {
  for (auto& blk : g)
    for (R& x : blk) x *= f;
}

// acc += a * b
template <class R>
void add_scaled(Gradients<R>& acc, R a, const Gradients<R>& b) {
  for (size_t i = 0; i < acc.size(); ++i)
    for (size_t j = 0; j < acc[i].size(); ++j) acc[i][j] += a * b[i][j];
}

// ps += a * g
template <class R>
void axpy(ParameterSet<R>& ps, R a, const Gradients<R>& g) {
  check_aligned("axpy", ps, g);
  for (size_t i = 0; i < g.size(); ++i)
    for (size_t j = 0; j < g[i].size(); ++j) ps[i].v[j] += a * g[i][j];
}

// a - b as a gradient-shaped displacement
template <class R>
Gradients<R> param_diff(const ParameterSet<R>& a, const ParameterSet<R>& b) {
  Gradients<R> d(a.count());
  for (size_t i = 0; i < a.count(); ++i) {
    d[i].resize(a[i].v.size());
    for (size_t j = 0; j < d[i].size(); ++j) d[i][j] = a[i].v[j] - b[i].v[j];
  }
  return d;
}

template <class R>
double param_dist(const ParameterSet<R>& a, const ParameterSet<R>& b) {
  double s = 0;
  for (size_t i = 0; i < a.count(); ++i)
    for (size_t j = 0; j < a[i].v.size(); ++j) {
      double d = (double)a[i].v[j] - (double)b[i].v[j];
      s += d * d;
    }
  return std::sqrt(s);
}

// One graph node per parameter, in registration order. After backward(),
// grads() harvests the accumulated parameter gradients.
template <class R>
struct BoundParams {
  Graph<R>* graph = nullptr;
  std::vector<Tensor<R>> nodes;

  const Tensor<R>& operator[](size_t i) const { return nodes[i]; }

  Gradients<R> grads() const {
    Gradients<R> g(nodes.size());
    for (size_t i = 0; i < nodes.size(); ++i) g[i] = nodes[i].grad();
    return g;
  }
};

template <class R>
BoundParams<R> bind(Graph<R>& g, const ParameterSet<R>& ps) {
  BoundParams<R> b;
  b.graph = &g;
  b.nodes.reserve(ps.count());
  for (size_t i = 0; i < ps.count(); ++i) b.nodes.push_back(g.input(ps[i]));
  return b;
}

}  // namespace olnmt

#endif  // OLNMT_PARAMS_HPP
