/**
 * @file graph.hpp
 * @brief Tape-based reverse-mode autodiff over row-major matrices.
 *
 * A Graph is built fresh for every forward pass. Parameter leaves read the
 * parameter's value in place and backward() accumulates straight into
 * Parameter::grad.
 */
#pragma once

#include <functional>
#include <span>
#include <vector>

#include "xmusic/nn/matrix.hpp"
#include "xmusic/nn/params.hpp"

namespace xmusic::nn {

struct Var {
  int id = -1;
};

class Graph {
 public:
  Var input(Matrix m);
  Var param(Parameter& p);

  const Matrix& value(Var v) const;
  /// Gradient of the last backward() target with respect to v.
  const Matrix& grad(Var v);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  /// a[M x N] + bias[1 x N] on every row.
  Var add_bias(Var a, Var bias);
  Var linear(Var x, Var w, Var bias) { return add_bias(matmul(x, w), bias); }
  Var scale(Var a, double s);
  /// Tanh approximation of GELU.
  Var gelu(Var a);
  /// Per-row normalization with gain and bias rows (eps 1e-5).
  Var layernorm(Var a, Var gain, Var bias);
  /// Multi-head scaled dot-product attention over rows of q, k, v [T x H].
  Var attention(Var q, Var k, Var v, int heads, bool causal);
  /// Rows of `table` picked by `indices`.
  Var embedding(Var table, std::span<const int> indices);
  Var concat_cols(std::span<const Var> parts);
  /// Mean softmax cross-entropy over rows whose target is >= 0 (others are
  /// skipped). A 1 x 1 zero when no row has a target.
  Var cross_entropy(Var logits, std::span<const int> targets);
  /// [1 x N] mean over rows.
  Var mean_rows(Var a);
  /// Sum of 1 x 1 values.
  Var sum(std::span<const Var> scalars);

  /// Seeds d(target)/d(target) = 1 and runs the tape backwards.
  void backward(Var target);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix own;
    const Matrix* ref = nullptr;
    Matrix own_grad;
    Matrix* grad_ref = nullptr;
    bool needs_grad = false;
    std::function<void()> back;
  };

  Var push(Matrix value, bool needs_grad);
  const Matrix& val(int id) const;
  Matrix& gradm(int id);
  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }

  std::vector<Node> nodes_;
};

}  // namespace xmusic::nn
