#include "xmusic/nn/graph.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "xmusic/error.hpp"
#include "xmusic/nn/kernels.hpp"

namespace xmusic::nn {

namespace {

void shape_error(const char* op) { throw Error(ErrorCode::DimensionMismatch, std::string("shape mismatch in ") + op); }

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kLayerNormEps = 1e-5;

}  // namespace

Var Graph::push(Matrix value, bool needs_grad) {
  Node n;
  n.own = std::move(value);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Graph::val(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.ref ? *n.ref : n.own;
}

Matrix& Graph::gradm(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad_ref) return *n.grad_ref;
  if (n.own_grad.empty() && !val(id).empty()) n.own_grad = Matrix(val(id).rows, val(id).cols);
  return n.own_grad;
}

const Matrix& Graph::value(Var v) const { return val(v.id); }
const Matrix& Graph::grad(Var v) { return gradm(v.id); }

Var Graph::input(Matrix m) { return push(std::move(m), false); }

Var Graph::param(Parameter& p) {
  Node n;
  n.ref = &p.value;
  n.grad_ref = &p.grad;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::matmul(Var a, Var b) {
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  if (A.cols != B.rows) shape_error("matmul");
  Matrix C(A.rows, B.cols);
  kernels::matmul(A.data.data(), B.data.data(), C.data.data(), A.rows, A.cols, B.cols, false);
  Var c = push(std::move(C), needs(a) || needs(b));
  nodes_.back().back = [this, a, b, c] {
    const Matrix& A = val(a.id);
    const Matrix& B = val(b.id);
    const Matrix& G = gradm(c.id);
    if (needs(a)) kernels::matmul_a_bt(G.data.data(), B.data.data(), gradm(a.id).data.data(), A.rows, A.cols, B.cols);
    if (needs(b)) kernels::matmul_at_b(A.data.data(), G.data.data(), gradm(b.id).data.data(), A.rows, A.cols, B.cols);
  };
  return c;
}

Var Graph::add(Var a, Var b) {
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  if (!A.same_shape(B)) shape_error("add");
  Matrix C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.data[i] += B.data[i];
  Var c = push(std::move(C), needs(a) || needs(b));
  nodes_.back().back = [this, a, b, c] {
    const Matrix& G = gradm(c.id);
    for (Var x : {a, b}) {
      if (!needs(x)) continue;
      Matrix& gx = gradm(x.id);
      for (std::size_t i = 0; i < G.size(); ++i) gx.data[i] += G.data[i];
    }
  };
  return c;
}

Var Graph::add_bias(Var a, Var bias) {
  const Matrix& A = val(a.id);
  const Matrix& B = val(bias.id);
  if (B.rows != 1 || B.cols != A.cols) shape_error("add_bias");
  Matrix C = A;
  for (int r = 0; r < C.rows; ++r)
    for (int j = 0; j < C.cols; ++j) C(r, j) += B.data[static_cast<std::size_t>(j)];
  Var c = push(std::move(C), needs(a) || needs(bias));
  nodes_.back().back = [this, a, bias, c] {
    const Matrix& G = gradm(c.id);
    if (needs(a)) {
      Matrix& ga = gradm(a.id);
      for (std::size_t i = 0; i < G.size(); ++i) ga.data[i] += G.data[i];
    }
    if (needs(bias)) {
      Matrix& gb = gradm(bias.id);
      for (int r = 0; r < G.rows; ++r)
        for (int j = 0; j < G.cols; ++j) gb.data[static_cast<std::size_t>(j)] += G(r, j);
    }
  };
  return c;
}

Var Graph::scale(Var a, double s) {
  Matrix C = val(a.id);
  for (double& x : C.data) x *= s;
  Var c = push(std::move(C), needs(a));
  nodes_.back().back = [this, a, c, s] {
    if (!needs(a)) return;
    const Matrix& G = gradm(c.id);
    Matrix& ga = gradm(a.id);
    for (std::size_t i = 0; i < G.size(); ++i) ga.data[i] += s * G.data[i];
  };
  return c;
}

Var Graph::gelu(Var a) {
  const Matrix& A = val(a.id);
  Matrix C(A.rows, A.cols);
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double x = A.data[i];
    C.data[i] = 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x)));
  }
  Var c = push(std::move(C), needs(a));
  nodes_.back().back = [this, a, c] {
    if (!needs(a)) return;
    const Matrix& A = val(a.id);
    const Matrix& G = gradm(c.id);
    Matrix& ga = gradm(a.id);
    for (std::size_t i = 0; i < A.size(); ++i) {
      const double x = A.data[i];
      const double t = std::tanh(kGeluC * (x + 0.044715 * x * x * x));
      const double d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
      ga.data[i] += G.data[i] * d;
    }
  };
  return c;
}

Var Graph::layernorm(Var a, Var gain, Var bias) {
  const Matrix& A = val(a.id);
  const Matrix& Gn = val(gain.id);
  const Matrix& Bs = val(bias.id);
  if (Gn.rows != 1 || Gn.cols != A.cols || !Gn.same_shape(Bs)) shape_error("layernorm");
  const int n = A.cols;
  auto xhat = std::make_shared<Matrix>(A.rows, n);
  auto inv_sigma = std::make_shared<std::vector<double>>(static_cast<std::size_t>(A.rows));
  Matrix C(A.rows, n);
  for (int r = 0; r < A.rows; ++r) {
    const double* x = A.row(r);
    double mean = 0;
    for (int j = 0; j < n; ++j) mean += x[j];
    mean /= n;
    double var = 0;
    for (int j = 0; j < n; ++j) var += (x[j] - mean) * (x[j] - mean);
    var /= n;
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    (*inv_sigma)[static_cast<std::size_t>(r)] = is;
    for (int j = 0; j < n; ++j) {
      const double h = (x[j] - mean) * is;
      (*xhat)(r, j) = h;
      C(r, j) = h * Gn.data[static_cast<std::size_t>(j)] + Bs.data[static_cast<std::size_t>(j)];
    }
  }
  Var c = push(std::move(C), needs(a) || needs(gain) || needs(bias));
  nodes_.back().back = [this, a, gain, bias, c, xhat, inv_sigma] {
    const Matrix& G = gradm(c.id);
    const Matrix& Gn = val(gain.id);
    const int n = G.cols;
    if (needs(gain) || needs(bias)) {
      for (int r = 0; r < G.rows; ++r)
        for (int j = 0; j < n; ++j) {
          if (needs(gain)) gradm(gain.id).data[static_cast<std::size_t>(j)] += G(r, j) * (*xhat)(r, j);
          if (needs(bias)) gradm(bias.id).data[static_cast<std::size_t>(j)] += G(r, j);
        }
    }
    if (!needs(a)) return;
    Matrix& ga = gradm(a.id);
    std::vector<double> dx(static_cast<std::size_t>(n));
    for (int r = 0; r < G.rows; ++r) {
      double mean_d = 0, mean_dx = 0;
      for (int j = 0; j < n; ++j) {
        dx[static_cast<std::size_t>(j)] = G(r, j) * Gn.data[static_cast<std::size_t>(j)];
        mean_d += dx[static_cast<std::size_t>(j)];
        mean_dx += dx[static_cast<std::size_t>(j)] * (*xhat)(r, j);
      }
      mean_d /= n;
      mean_dx /= n;
      const double is = (*inv_sigma)[static_cast<std::size_t>(r)];
      for (int j = 0; j < n; ++j)
        ga(r, j) += is * (dx[static_cast<std::size_t>(j)] - mean_d - (*xhat)(r, j) * mean_dx);
    }
  };
  return c;
}

namespace {

void gather_cols(const Matrix& src, int c0, int width, Matrix& dst) {
  dst = Matrix(src.rows, width);
  for (int r = 0; r < src.rows; ++r)
    for (int j = 0; j < width; ++j) dst(r, j) = src(r, c0 + j);
}

void scatter_add_cols(const Matrix& src, int c0, Matrix& dst) {
  for (int r = 0; r < src.rows; ++r)
    for (int j = 0; j < src.cols; ++j) dst(r, c0 + j) += src(r, j);
}

}  // namespace

Var Graph::attention(Var q, Var k, Var v, int heads, bool causal) {
  const Matrix& Q = val(q.id);
  const Matrix& K = val(k.id);
  const Matrix& V = val(v.id);
  if (!Q.same_shape(K) || !Q.same_shape(V) || heads <= 0 || Q.cols % heads != 0) shape_error("attention");
  const int T = Q.rows, d = Q.cols / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  auto probs = std::make_shared<std::vector<Matrix>>(static_cast<std::size_t>(heads));
  Matrix out(T, Q.cols);
  Matrix qh, kh, vh, oh(T, d);
  for (int h = 0; h < heads; ++h) {
    gather_cols(Q, h * d, d, qh);
    gather_cols(K, h * d, d, kh);
    gather_cols(V, h * d, d, vh);
    Matrix& P = (*probs)[static_cast<std::size_t>(h)];
    P = Matrix(T, T);
    kernels::matmul_a_bt(qh.data.data(), kh.data.data(), P.data.data(), T, T, d);
    for (int i = 0; i < T; ++i)
      for (int j = 0; j < T; ++j) P(i, j) = causal && j > i ? -INFINITY : P(i, j) * inv;
    kernels::softmax_rows(P.data.data(), T, T);
    kernels::matmul(P.data.data(), vh.data.data(), oh.data.data(), T, T, d, false);
    for (int i = 0; i < T; ++i)
      for (int j = 0; j < d; ++j) out(i, h * d + j) = oh(i, j);
  }
  Var c = push(std::move(out), needs(q) || needs(k) || needs(v));
  nodes_.back().back = [this, q, k, v, c, heads, probs, inv] {
    const Matrix& Q = val(q.id);
    const Matrix& K = val(k.id);
    const Matrix& V = val(v.id);
    const Matrix& G = gradm(c.id);
    const int T = Q.rows, d = Q.cols / heads;
    Matrix qh, kh, vh, goh;
    for (int h = 0; h < heads; ++h) {
      const Matrix& P = (*probs)[static_cast<std::size_t>(h)];
      gather_cols(Q, h * d, d, qh);
      gather_cols(K, h * d, d, kh);
      gather_cols(V, h * d, d, vh);
      gather_cols(G, h * d, d, goh);
      Matrix dP(T, T);
      kernels::matmul_a_bt(goh.data.data(), vh.data.data(), dP.data.data(), T, T, d);
      if (needs(v)) {
        Matrix dv(T, d);
        kernels::matmul_at_b(P.data.data(), goh.data.data(), dv.data.data(), T, T, d);
        scatter_add_cols(dv, h * d, gradm(v.id));
      }
      Matrix dS(T, T);
      for (int i = 0; i < T; ++i) {
        double dot = 0;
        for (int j = 0; j < T; ++j) dot += P(i, j) * dP(i, j);
        for (int j = 0; j < T; ++j) dS(i, j) = P(i, j) * (dP(i, j) - dot) * inv;
      }
      if (needs(q)) {
        Matrix dq(T, d);
        kernels::matmul(dS.data.data(), kh.data.data(), dq.data.data(), T, T, d, false);
        scatter_add_cols(dq, h * d, gradm(q.id));
      }
      if (needs(k)) {
        Matrix dk(T, d);
        kernels::matmul_at_b(dS.data.data(), qh.data.data(), dk.data.data(), T, T, d);
        scatter_add_cols(dk, h * d, gradm(k.id));
      }
    }
  };
  return c;
}

Var Graph::embedding(Var table, std::span<const int> indices) {
  const Matrix& E = val(table.id);
  Matrix C(static_cast<int>(indices.size()), E.cols);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int idx = indices[r];
    if (idx < 0 || idx >= E.rows) throw Error(ErrorCode::DimensionMismatch, "embedding index out of range");
    std::copy(E.row(idx), E.row(idx) + E.cols, C.row(static_cast<int>(r)));
  }
  auto idx = std::make_shared<std::vector<int>>(indices.begin(), indices.end());
  Var c = push(std::move(C), needs(table));
  nodes_.back().back = [this, table, c, idx] {
    if (!needs(table)) return;
    const Matrix& G = gradm(c.id);
    Matrix& gt = gradm(table.id);
    for (std::size_t r = 0; r < idx->size(); ++r) {
      double* dst = gt.row((*idx)[r]);
      const double* src = G.row(static_cast<int>(r));
      for (int j = 0; j < G.cols; ++j) dst[j] += src[j];
    }
  };
  return c;
}

Var Graph::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) shape_error("concat_cols");
  const int rows = val(parts[0].id).rows;
  int cols = 0;
  bool any = false;
  for (Var p : parts) {
    if (val(p.id).rows != rows) shape_error("concat_cols");
    cols += val(p.id).cols;
    any = any || needs(p);
  }
  Matrix C(rows, cols);
  int c0 = 0;
  for (Var p : parts) {
    const Matrix& P = val(p.id);
    for (int r = 0; r < rows; ++r) std::copy(P.row(r), P.row(r) + P.cols, C.row(r) + c0);
    c0 += P.cols;
  }
  auto ids = std::make_shared<std::vector<Var>>(parts.begin(), parts.end());
  Var c = push(std::move(C), any);
  nodes_.back().back = [this, c, ids] {
    const Matrix& G = gradm(c.id);
    int c0 = 0;
    for (Var p : *ids) {
      const int w = val(p.id).cols;
      if (needs(p)) {
        Matrix& gp = gradm(p.id);
        for (int r = 0; r < G.rows; ++r)
          for (int j = 0; j < w; ++j) gp(r, j) += G(r, c0 + j);
      }
      c0 += w;
    }
  };
  return c;
}

Var Graph::cross_entropy(Var logits, std::span<const int> targets) {
  const Matrix& L = val(logits.id);
  if (static_cast<int>(targets.size()) != L.rows) shape_error("cross_entropy");
  auto probs = std::make_shared<Matrix>(L);
  kernels::softmax_rows(probs->data.data(), probs->rows, probs->cols);
  auto tg = std::make_shared<std::vector<int>>(targets.begin(), targets.end());
  int n = 0;
  double loss = 0;
  for (int r = 0; r < L.rows; ++r) {
    const int t = (*tg)[static_cast<std::size_t>(r)];
    if (t < 0) continue;
    if (t >= L.cols) throw Error(ErrorCode::DimensionMismatch, "cross_entropy target out of range");
    // log-softmax directly from logits for accuracy
    double m = -INFINITY;
    for (int j = 0; j < L.cols; ++j) m = std::max(m, L(r, j));
    double s = 0;
    for (int j = 0; j < L.cols; ++j) s += std::exp(L(r, j) - m);
    loss -= L(r, t) - m - std::log(s);
    ++n;
  }
  Matrix out(1, 1, n > 0 ? loss / n : 0.0);
  Var c = push(std::move(out), needs(logits) && n > 0);
  nodes_.back().back = [this, logits, c, probs, tg, n] {
    if (!needs(logits) || n == 0) return;
    const double g = gradm(c.id).data[0] / n;
    Matrix& gl = gradm(logits.id);
    for (int r = 0; r < probs->rows; ++r) {
      const int t = (*tg)[static_cast<std::size_t>(r)];
      if (t < 0) continue;
      for (int j = 0; j < probs->cols; ++j) gl(r, j) += g * ((*probs)(r, j) - (j == t ? 1.0 : 0.0));
    }
  };
  return c;
}

Var Graph::mean_rows(Var a) {
  const Matrix& A = val(a.id);
  if (A.rows == 0) shape_error("mean_rows");
  Matrix C(1, A.cols);
  for (int r = 0; r < A.rows; ++r)
    for (int j = 0; j < A.cols; ++j) C.data[static_cast<std::size_t>(j)] += A(r, j);
  for (double& x : C.data) x /= A.rows;
  Var c = push(std::move(C), needs(a));
  nodes_.back().back = [this, a, c] {
    if (!needs(a)) return;
    const Matrix& G = gradm(c.id);
    Matrix& ga = gradm(a.id);
    const double inv = 1.0 / ga.rows;
    for (int r = 0; r < ga.rows; ++r)
      for (int j = 0; j < ga.cols; ++j) ga(r, j) += G.data[static_cast<std::size_t>(j)] * inv;
  };
  return c;
}

Var Graph::sum(std::span<const Var> scalars) {
  double s = 0;
  bool any = false;
  for (Var v : scalars) {
    if (val(v.id).size() != 1) shape_error("sum");
    s += val(v.id).data[0];
    any = any || needs(v);
  }
  auto ids = std::make_shared<std::vector<Var>>(scalars.begin(), scalars.end());
  Var c = push(Matrix(1, 1, s), any);
  nodes_.back().back = [this, c, ids] {
    const double g = gradm(c.id).data[0];
    for (Var v : *ids)
      if (needs(v)) gradm(v.id).data[0] += g;
  };
  return c;
}

void Graph::backward(Var target) {
  if (val(target.id).size() != 1) throw Error(ErrorCode::DimensionMismatch, "backward needs a scalar target");
  if (!needs(target)) return;
  gradm(target.id).data[0] += 1.0;
  for (int i = target.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || !n.back) continue;
    if (!n.grad_ref && n.own_grad.empty()) continue;  // nothing flowed here
    n.back();
  }
}

}  // namespace xmusic::nn
