/**
 * @file transformer.hpp
 * @brief Pre-LN self-attention stack with three execution paths: a taped
 * forward for training, a tape-free full-sequence forward, and an
 * incremental key/value-cached forward for causal decoding.
 */
#pragma once

#include <span>
#include <string>
#include <vector>

#include "xmusic/nn/graph.hpp"
#include "xmusic/nn/params.hpp"
#include "xmusic/rng.hpp"

namespace xmusic::nn {

struct TransformerConfig {
  int layers = 2;
  int heads = 4;
  int hidden = 128;
  int ffn_mult = 4;
  bool causal = true;
};

/// x[T x W] * w[W x N] + b, tape-free.
Matrix linear_forward(const Matrix& x, const Parameter& w, const Parameter& b);
/// In-place per-row layer normalization, tape-free.
void layernorm_forward(Matrix& x, const Parameter& gain, const Parameter& bias);
/// Sinusoidal encoding rows for positions [0, length).
Matrix sinusoidal_positions(int length, int width);

class Transformer {
 public:
  /// Creates the parameters under `prefix` when `rng` is given, otherwise
  /// binds to parameters already in `store` (throws InvalidCheckpoint if absent).
  Transformer(ParamStore& store, const std::string& prefix, TransformerConfig cfg, Rng* rng);

  const TransformerConfig& config() const { return cfg_; }

  /// x[T x H] -> final-normalized hidden states [T x H].
  Var forward(Graph& g, Var x) const;
  Matrix infer(const Matrix& x) const;

  struct Cache {
    std::vector<Matrix> k, v;  // per layer, capacity x H
    int length = 0;
  };
  Cache make_cache(int capacity) const;
  /// Feeds one input row (the next position) and returns its final hidden state.
  std::vector<double> step(Cache& cache, std::span<const double> x) const;

 private:
  struct Layer {
    Parameter *ln1_g, *ln1_b, *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
    Parameter *ln2_g, *ln2_b, *w1, *b1, *w2, *b2;
  };
  TransformerConfig cfg_;
  std::vector<Layer> layers_;
  Parameter* lnf_g_ = nullptr;
  Parameter* lnf_b_ = nullptr;
};

}  // namespace xmusic::nn
