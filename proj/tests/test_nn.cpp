#include <cmath>

#include "doctest.h"
#include "support/gradcheck.hpp"
#include "xmusic/error.hpp"
#include "xmusic/nn/graph.hpp"
#include "xmusic/nn/kernels.hpp"
#include "xmusic/nn/transformer.hpp"

using namespace xmusic;
using namespace xmusic::nn;

namespace {

Matrix random_matrix(Rng& rng, int r, int c) {
  Matrix m(r, c);
  for (double& x : m.data) x = rng.normal();
  return m;
}

// Triple-loop oracle, summing in the same k order as the kernels.
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double s = 0;
      for (int p = 0; p < a.cols; ++p) s += a(i, p) * b(p, j);
      c(i, j) = s;
    }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

void check_close(const Matrix& a, const Matrix& b, double tol) {
  REQUIRE(a.same_shape(b));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(tol).scale(1.0));
}

}  // namespace

TEST_CASE("serial and OpenMP kernels agree bit for bit") {
  Rng rng(1);
  for (auto [m, k, n] : {std::array<int, 3>{1, 1, 1}, {3, 5, 7}, {64, 48, 80}, {130, 70, 90}}) {
    Matrix a = random_matrix(rng, m, k), b = random_matrix(rng, k, n), g = random_matrix(rng, m, n);
    Matrix c1(m, n), c2(m, n);
    kernels::serial::matmul(a.data.data(), b.data.data(), c1.data.data(), m, k, n, false);
    kernels::omp::matmul(a.data.data(), b.data.data(), c2.data.data(), m, k, n, false);
    CHECK(c1 == c2);
    check_close(c1, naive_matmul(a, b), 1e-12);

    Matrix d1(k, n), d2(k, n);
    kernels::serial::matmul_at_b(a.data.data(), g.data.data(), d1.data.data(), m, k, n);
    kernels::omp::matmul_at_b(a.data.data(), g.data.data(), d2.data.data(), m, k, n);
    CHECK(d1 == d2);
    check_close(d1, naive_matmul(transpose(a), g), 1e-12);

    Matrix e1(m, k), e2(m, k);
    kernels::serial::matmul_a_bt(g.data.data(), b.data.data(), e1.data.data(), m, k, n);
    kernels::omp::matmul_a_bt(g.data.data(), b.data.data(), e2.data.data(), m, k, n);
    CHECK(e1 == e2);
    check_close(e1, naive_matmul(g, transpose(b)), 1e-12);

    Matrix s1 = g, s2 = g;
    kernels::serial::softmax_rows(s1.data.data(), m, n);
    kernels::omp::softmax_rows(s2.data.data(), m, n);
    CHECK(s1 == s2);
    for (int i = 0; i < m; ++i) {
      double sum = 0;
      for (int j = 0; j < n; ++j) sum += s1(i, j);
      CHECK(sum == doctest::Approx(1.0));
    }
  }
  CHECK(kernels::thread_count() >= 1);
}

TEST_CASE("every graph op passes a finite-difference check") {
  Rng rng(3);
  ParamStore store;
  auto& x = store.create("x", 5, 8, 1.0, rng);
  auto& w = store.create("w", 8, 8, 0.5, rng);
  auto& b = store.create("b", 1, 8, 0.5, rng);
  auto& gain = store.create("gain", 1, 8, 1.0, rng);
  auto& table = store.create("table", 6, 4, 1.0, rng);
  auto& head = store.create("head", 12, 7, 0.5, rng);
  const std::vector<int> idx = {0, 3, 3, 5, 1};
  const std::vector<int> targets = {2, -1, 6, 0, 4};

  auto loss = [&](bool backward) {
    Graph g;
    Var xv = g.param(x);
    Var h = g.linear(xv, g.param(w), g.param(b));
    h = g.layernorm(g.gelu(h), g.param(gain), g.param(b));
    Var a = g.attention(h, g.scale(h, 0.7), g.add(h, xv), 2, true);
    Var e = g.embedding(g.param(table), idx);
    std::vector<Var> parts = {a, e};
    Var cat = g.concat_cols(parts);
    Var logits = g.matmul(cat, g.param(head));
    Var ce = g.cross_entropy(logits, targets);
    Var pooled = g.mean_rows(g.attention(h, h, h, 4, false));
    Var extra = g.cross_entropy(pooled, std::vector<int>{3});
    std::vector<Var> terms = {ce, extra};
    Var total = g.sum(terms);
    if (backward) g.backward(total);
    return g.value(total).data[0];
  };
  auto probes = testing::gradient_check(store, loss, 60, 11);
  for (const auto& p : probes) {
    CAPTURE(p.param);
    CAPTURE(p.analytic);
    CAPTURE(p.numeric);
    CHECK(p.rel_error < 1e-5);
  }
}

TEST_CASE("cross entropy conventions") {
  Graph g;
  Var one = g.input(Matrix(3, 1, 0.7));
  CHECK(g.value(g.cross_entropy(one, std::vector<int>{0, 0, 0})).data[0] == 0.0);
  Var logits = g.input(Matrix(2, 4, 0.0));
  CHECK(g.value(g.cross_entropy(logits, std::vector<int>{1, -1})).data[0] == doctest::Approx(std::log(4.0)));
  CHECK(g.value(g.cross_entropy(logits, std::vector<int>{-1, -1})).data[0] == 0.0);
  CHECK_THROWS_AS(g.cross_entropy(logits, std::vector<int>{9, 0}), Error);
}

TEST_CASE("taped, full and cached transformer forwards agree") {
  Rng rng(5);
  ParamStore store;
  Transformer causal(store, "t", {2, 4, 16, 4, true}, &rng);
  Matrix x = random_matrix(rng, 9, 16);
  Graph g;
  Var out = causal.forward(g, g.input(x));
  Matrix full = causal.infer(x);
  check_close(g.value(out), full, 1e-10);

  auto cache = causal.make_cache(12);
  for (int t = 0; t < x.rows; ++t) {
    auto h = causal.step(cache, std::span<const double>(x.row(t), 16));
    for (int j = 0; j < 16; ++j) CHECK(h[static_cast<std::size_t>(j)] == doctest::Approx(full(t, j)).epsilon(1e-10));
  }

  // causal prefix property: the first rows do not see later rows
  Matrix prefix(4, 16);
  std::copy(x.data.begin(), x.data.begin() + 4 * 16, prefix.data.begin());
  Matrix pre_out = causal.infer(prefix);
  for (int t = 0; t < 4; ++t)
    for (int j = 0; j < 16; ++j) CHECK(pre_out(t, j) == doctest::Approx(full(t, j)).epsilon(1e-10));

  ParamStore store2;
  Rng rng2(5);
  Transformer bidir(store2, "t", {1, 2, 16, 2, false}, &rng2);
  Graph g2;
  check_close(g2.value(bidir.forward(g2, g2.input(x))), bidir.infer(x), 1e-10);

  // binding to existing parameters reproduces the same function
  Transformer bound(store, "t", {2, 4, 16, 4, true}, nullptr);
  CHECK(bound.infer(x) == full);
  CHECK_THROWS_AS(Transformer(store, "missing", {2, 4, 16, 4, true}, nullptr), Error);
  CHECK_THROWS_AS(Transformer(store, "u", {2, 3, 16, 4, true}, &rng), Error);
}

TEST_CASE("adam clips the global gradient norm and skips frozen tensors") {
  Rng rng(8);
  ParamStore store;
  auto& a = store.create("head.a", 2, 2, 1.0, rng);
  auto& b = store.create("head.b", 2, 2, 1.0, rng);
  for (double& g : a.grad.data) g = 3.0;
  for (double& g : b.grad.data) g = 4.0;
  CHECK(grad_norm(store) == doctest::Approx(10.0));
  store.set_frozen("head.b", true);
  CHECK(grad_norm(store) == doctest::Approx(6.0));
  const Matrix before_b = b.value;
  const Matrix before_a = a.value;
  Adam opt({0.1, 0.9, 0.999, 1e-8, 0.5});
  CHECK(opt.step(store) == doctest::Approx(6.0));
  CHECK(b.value == before_b);
  CHECK(a.value != before_a);
  // first Adam step moves every entry by lr regardless of gradient scale
  CHECK(std::abs(a.value.data[0] - before_a.data[0]) == doctest::Approx(0.1).epsilon(1e-6));
  for (double g : a.grad.data) CHECK(g == 0.0);
  CHECK_THROWS_AS(store.create("head.a", 1, 1, 1.0, rng), Error);
}

TEST_CASE("sinusoidal positions") {
  Matrix pe = sinusoidal_positions(3, 6);
  CHECK(pe(0, 0) == 0.0);
  CHECK(pe(0, 1) == 1.0);
  CHECK(pe(1, 0) == doctest::Approx(std::sin(1.0)));
  CHECK(pe(2, 2) == doctest::Approx(std::sin(2.0 * std::pow(10000.0, -2.0 / 6))));
}
