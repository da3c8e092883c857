#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "olnmt/params.hpp"
#include "olnmt/tensor.hpp"

using namespace olnmt;

namespace {

using D = double;
using TD = TensorData<D>;

// Central finite differences of loss(inputs) wrt every input entry, compared
// against the analytic gradients from one backward pass. The loss is a random
// linear functional of the op output so every output entry contributes.
struct GradCheck {
  // builds the op output from bound inputs
  std::function<Tensor<D>(Graph<D>&, std::vector<Tensor<D>>&)> build;
  std::vector<TD> inputs;
  std::vector<D> coeffs;  // one per output entry

  D eval(const std::vector<TD>& ins) const {
    Graph<D> g;
    std::vector<Tensor<D>> ts;
    for (const auto& t : ins) ts.push_back(g.input(t));
    Tensor<D> out = build(g, ts);
    D s = 0;
    for (size_t i = 0; i < out.value().size(); ++i) s += coeffs[i] * out.value()[i];
    return s;
  }

  double max_rel_err() const {
    Graph<D> g;
    std::vector<Tensor<D>> ts;
    for (const auto& t : inputs) ts.push_back(g.input(t));
    Tensor<D> out = build(g, ts);
    // loss = sum_i c_i out_i via graph ops so backward sees a scalar
    Tensor<D> c = g.input(out.shape(), coeffs);
    Tensor<D> loss = sum(mul(out, c));
    g.backward(loss);

    const double h = 1e-4;
    double worst = 0;
    for (size_t k = 0; k < inputs.size(); ++k) {
      for (size_t j = 0; j < inputs[k].v.size(); ++j) {
        std::vector<TD> plus = inputs, minus = inputs;
        plus[k].v[j] += h;
        minus[k].v[j] -= h;
        double num = (eval(plus) - eval(minus)) / (2 * h);
        double ana = ts[k].grad()[j];
        double denom = std::max({std::abs(num), std::abs(ana), 1e-6});
        worst = std::max(worst, std::abs(num - ana) / denom);
      }
    }
    return worst;
  }
};

std::mt19937_64 rng(12345);

TD rand_tensor(Shape s, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  TD t = TD::zeros(std::move(s));
  for (auto& x : t.v) x = u(rng);
  return t;
}

std::vector<D> rand_coeffs(long n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<D> c(n);
  for (auto& x : c) x = u(rng);
  return c;
}

void check_op_n(const char* name, int trials,
                std::function<std::vector<TD>(std::mt19937_64&)> gen,
                std::function<Tensor<D>(Graph<D>&, std::vector<Tensor<D>>&)> build) {
  INFO("op: " << name);
  for (int t = 0; t < trials; ++t) {
    GradCheck gc;
    gc.build = build;
    gc.inputs = gen(rng);
    {
      Graph<D> g;
      std::vector<Tensor<D>> ts;
      for (const auto& in : gc.inputs) ts.push_back(g.input(in));
      gc.coeffs = rand_coeffs(build(g, ts).size());
    }
    double err = gc.max_rel_err();
    INFO("trial " << t << " rel err " << err);
    REQUIRE(err < 1e-4);
  }
}

}  // namespace

TEST_CASE("softmax of equal logits is uniform") {
  Graph<float> g;
  auto x = g.input(Shape{3}, {0.f, 0.f, 0.f});
  auto y = softmax(x);
  for (float v : y.value()) CHECK(v == doctest::Approx(1.0f / 3).epsilon(1e-6));
}

TEST_CASE("softmax rows are a distribution") {
  std::uniform_real_distribution<double> u(-8.0, 8.0);
  for (int t = 0; t < 200; ++t) {
    Graph<double> g;
    TD x = rand_tensor(Shape{3, 5}, -8, 8);
    auto y = softmax(g.input(x));
    for (int r = 0; r < 3; ++r) {
      double s = 0;
      for (int c = 0; c < 5; ++c) {
        double v = y.value()[r * 5 + c];
        CHECK(v >= 0.0);
        s += v;
      }
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("cross entropy of two equal logits is ln 2") {
  Graph<float> g;
  auto x = g.input(Shape{2}, {1.f, 1.f});
  auto ce = cross_entropy(x, 0);
  CHECK(ce.scalar() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("matmul shape algebra") {
  Graph<float> g;
  auto a = g.input(TensorData<float>::zeros({2, 3}));
  auto b = g.input(TensorData<float>::zeros({3, 4}));
  auto c = matmul(a, b);
  CHECK(c.shape() == Shape{2, 4});

  auto bad = g.input(TensorData<float>::zeros({2, 4}));
  CHECK_THROWS_WITH_AS(matmul(a, bad), doctest::Contains("matmul"), ShapeError);
  CHECK_THROWS_WITH_AS(matmul(a, bad), doctest::Contains("[2x3]"), ShapeError);
  CHECK_THROWS_WITH_AS(matmul(a, bad), doctest::Contains("[2x4]"), ShapeError);
  CHECK_THROWS_AS(add(a, bad), ShapeError);
}

TEST_CASE("backward of x^2 at x=3") {
  Graph<float> g;
  auto x = g.input(Shape{1}, {3.f});
  auto y = sum(mul(x, x));
  g.backward(y);
  CHECK(x.grad()[0] == doctest::Approx(6.0f));
}

TEST_CASE("backward of sum(tanh(x)) at 0 gives unit gradients") {
  Graph<float> g;
  auto x = g.input(Shape{4}, {0.f, 0.f, 0.f, 0.f});
  auto y = sum(tanh(x));
  g.backward(y);
  for (float v : x.grad()) CHECK(v == doctest::Approx(1.0f));
}

TEST_CASE("fan-out sums contributions: x*x via two references") {
  Graph<float> g;
  auto x = g.input(Shape{3}, {1.f, -2.f, 0.5f});
  auto y = sum(mul(x, x));
  g.backward(y);
  for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == doctest::Approx(2 * x.value()[i]));
}

TEST_CASE("backward rejects non-scalar loss and detached tensors") {
  Graph<float> g;
  auto x = g.input(Shape{2}, {1.f, 2.f});
  CHECK_THROWS_AS(g.backward(x), ShapeError);
  Tensor<float> detached;
  CHECK_THROWS_AS(g.backward(detached), ShapeError);
  Graph<float> other;
  auto y = other.scalar_input(1.f);
  CHECK_THROWS_AS(g.backward(y), ShapeError);
}

TEST_CASE("repeated backward accumulates only when asked") {
  Graph<float> g;
  auto x = g.input(Shape{1}, {3.f});
  auto y = sum(mul(x, x));
  g.backward(y);
  g.backward(y);
  CHECK(x.grad()[0] == doctest::Approx(6.0f));
  g.backward(y, /*accumulate=*/true);
  CHECK(x.grad()[0] == doctest::Approx(12.0f));
}

TEST_CASE("gradient check: cross entropy of a linear layer") {
  // loss = cross_entropy(W x, target), gradient wrt W against central differences
  GradCheck gc;
  gc.inputs = {rand_tensor({4, 3}), rand_tensor({3})};
  gc.build = [](Graph<D>& g, std::vector<Tensor<D>>& ts) {
    (void)g;
    return cross_entropy(matmul(ts[0], ts[1]), 1);
  };
  gc.coeffs = {1.0};
  CHECK(gc.max_rel_err() < 1e-4);
}

TEST_CASE("gradient check property: every differentiable op, 100 random trials") {
  const int N = 100;
  check_op_n("add", N, [](auto& r) {
    (void)r;
    return std::vector<TD>{rand_tensor({5}), rand_tensor({5})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return add(ts[0], ts[1]); });

  check_op_n("add_bias_broadcast", N, [](auto&) {
    return std::vector<TD>{rand_tensor({3, 4}), rand_tensor({4})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return add(ts[0], ts[1]); });

  check_op_n("sub", N, [](auto&) {
    return std::vector<TD>{rand_tensor({5}), rand_tensor({5})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return sub(ts[0], ts[1]); });

  check_op_n("mul", N, [](auto&) {
    return std::vector<TD>{rand_tensor({6}), rand_tensor({6})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return mul(ts[0], ts[1]); });

  check_op_n("scale", N, [](auto&) {
    return std::vector<TD>{rand_tensor({6})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return scale(ts[0], 1.7); });

  check_op_n("tanh", N, [](auto&) {
    return std::vector<TD>{rand_tensor({7})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return tanh(ts[0]); });

  check_op_n("sigmoid", N, [](auto&) {
    return std::vector<TD>{rand_tensor({7})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return sigmoid(ts[0]); });

  check_op_n("exp", N, [](auto&) {
    return std::vector<TD>{rand_tensor({7}, -1.5, 1.5)};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return exp(ts[0]); });

  check_op_n("log", N, [](auto&) {
    return std::vector<TD>{rand_tensor({7}, 0.3, 3.0)};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return log(ts[0]); });

  check_op_n("softmax1d", N, [](auto&) {
    return std::vector<TD>{rand_tensor({6})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return softmax(ts[0]); });

  check_op_n("softmax2d", N, [](auto&) {
    return std::vector<TD>{rand_tensor({3, 4})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return softmax(ts[0]); });

  check_op_n("matmul22", N, [](auto&) {
    return std::vector<TD>{rand_tensor({3, 4}), rand_tensor({4, 2})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return matmul(ts[0], ts[1]); });

  check_op_n("matmul21", N, [](auto&) {
    return std::vector<TD>{rand_tensor({3, 4}), rand_tensor({4})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return matmul(ts[0], ts[1]); });

  check_op_n("matmul12", N, [](auto&) {
    return std::vector<TD>{rand_tensor({3}), rand_tensor({3, 5})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return matmul(ts[0], ts[1]); });

  check_op_n("concat", N, [](auto&) {
    return std::vector<TD>{rand_tensor({3}), rand_tensor({4})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return concat(ts[0], ts[1]); });

  check_op_n("slice", N, [](auto&) {
    return std::vector<TD>{rand_tensor({8})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return slice(ts[0], 2, 4); });

  check_op_n("stack_rows", N, [](auto&) {
    return std::vector<TD>{rand_tensor({4}), rand_tensor({4}), rand_tensor({4})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) {
    return stack_rows(std::vector<Tensor<D>>{ts[0], ts[1], ts[2]});
  });

  check_op_n("mean_rows", N, [](auto&) {
    return std::vector<TD>{rand_tensor({3, 5})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return mean_rows(ts[0]); });

  check_op_n("sum", N, [](auto&) {
    return std::vector<TD>{rand_tensor({6})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return sum(ts[0]); });

  check_op_n("cross_entropy", N, [](auto&) {
    return std::vector<TD>{rand_tensor({5})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return cross_entropy(ts[0], 2); });

  check_op_n("lookup", N, [](auto&) {
    return std::vector<TD>{rand_tensor({4, 3})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) { return lookup(ts[0], 1); });

  check_op_n("lookup_rows", N, [](auto&) {
    return std::vector<TD>{rand_tensor({4, 3})};
  }, [](Graph<D>&, std::vector<Tensor<D>>& ts) {
    return lookup_rows(ts[0], {2, 0, 2});
  });
}

TEST_CASE("clip_global_norm") {
  SUBCASE("norm 2 clipped to 1 halves every entry") {
    Gradients<float> g{{1.f, 1.f}, {1.f, 1.f}};
    double n = clip_global_norm(g, 1.0);
    CHECK(n == doctest::Approx(2.0));
    for (const auto& blk : g)
      for (float v : blk) CHECK(v == doctest::Approx(0.5f));
  }
  SUBCASE("norm below threshold unchanged") {
    Gradients<float> g{{0.3f, 0.4f}};
    double n = clip_global_norm(g, 1.0);
    CHECK(n == doctest::Approx(0.5));
    CHECK(g[0][0] == doctest::Approx(0.3f));
    CHECK(g[0][1] == doctest::Approx(0.4f));
  }
  SUBCASE("3-4-5 triangle") {
    Gradients<float> g{{3.f, 4.f}};
    clip_global_norm(g, 1.0);
    CHECK(g[0][0] == doctest::Approx(0.6f));
    CHECK(g[0][1] == doctest::Approx(0.8f));
  }
  SUBCASE("zero gradients pass through") {
    Gradients<float> g{{0.f, 0.f}};
    double n = clip_global_norm(g, 1.0);
    CHECK(n == doctest::Approx(0.0));
    CHECK(g[0][0] == 0.f);
  }
}

TEST_CASE("parameter set flat arithmetic") {
  ParameterSet<float> ps;
  ps.add("a", {2});
  ps.add("b", {3});
  ps[0].v = {1.f, 2.f};
  ps[1].v = {3.f, 4.f, 5.f};
  CHECK(ps.total_size() == 5);

  ParameterSet<float> q = ps;
  Gradients<float> g{{1.f, 1.f}, {1.f, 1.f, 1.f}};
  axpy(q, -0.5f, g);
  CHECK(q[0].v[0] == doctest::Approx(0.5f));
  CHECK(param_dist(ps, q) == doctest::Approx(std::sqrt(5.0) * 0.5));

  Gradients<float> d = param_diff(q, ps);
  CHECK(d[1][2] == doctest::Approx(-0.5f));

  Gradients<float> misaligned{{1.f}};
  CHECK_THROWS_AS(axpy(q, 1.f, misaligned), ShapeError);
}
