#include "xmusic/nn/transformer.hpp"

#include <cmath>

#include "xmusic/error.hpp"
#include "xmusic/nn/kernels.hpp"

namespace xmusic::nn {

Matrix linear_forward(const Matrix& x, const Parameter& w, const Parameter& b) {
  Matrix y(x.rows, w.value.cols);
  kernels::matmul(x.data.data(), w.value.data.data(), y.data.data(), x.rows, x.cols, w.value.cols, false);
  for (int r = 0; r < y.rows; ++r)
    for (int j = 0; j < y.cols; ++j) y(r, j) += b.value.data[static_cast<std::size_t>(j)];
  return y;
}

void layernorm_forward(Matrix& x, const Parameter& gain, const Parameter& bias) {
  const int n = x.cols;
  for (int r = 0; r < x.rows; ++r) {
    double* row = x.row(r);
    double mean = 0;
    for (int j = 0; j < n; ++j) mean += row[j];
    mean /= n;
    double var = 0;
    for (int j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= n;
    const double is = 1.0 / std::sqrt(var + 1e-5);
    for (int j = 0; j < n; ++j)
      row[j] = (row[j] - mean) * is * gain.value.data[static_cast<std::size_t>(j)] +
               bias.value.data[static_cast<std::size_t>(j)];
  }
}

Matrix sinusoidal_positions(int length, int width) {
  Matrix pe(length, width);
  for (int p = 0; p < length; ++p)
    for (int i = 0; i < width; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / width);
      pe(p, i) = i % 2 == 0 ? std::sin(p * freq) : std::cos(p * freq);
    }
  return pe;
}

Transformer::Transformer(ParamStore& store, const std::string& prefix, TransformerConfig cfg, Rng* rng) : cfg_(cfg) {
  if (cfg.layers <= 0 || cfg.heads <= 0 || cfg.hidden <= 0 || cfg.hidden % cfg.heads != 0 || cfg.ffn_mult <= 0)
    throw Error(ErrorCode::InvalidConfig, "transformer needs positive sizes and hidden divisible by heads");
  const int h = cfg.hidden, f = cfg.hidden * cfg.ffn_mult;
  const double s_in = 1.0 / std::sqrt(static_cast<double>(h));
  const double s_out = s_in / std::sqrt(2.0 * cfg.layers);
  auto mk = [&](const std::string& name, int r, int c, double scale) -> Parameter* {
    if (rng) return &store.create(prefix + name, r, c, scale, *rng);
    Parameter& p = store.at(prefix + name);
    if (p.value.rows != r || p.value.cols != c)
      throw Error(ErrorCode::InvalidCheckpoint, "parameter '" + prefix + name + "' has the wrong shape");
    return &p;
  };
  auto fill = [&](const std::string& name, int r, int c, double v) -> Parameter* {
    if (rng) return &store.create_filled(prefix + name, r, c, v);
    return mk(name, r, c, 0.0);
  };
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = ".layer" + std::to_string(l);
    Layer L{};
    L.ln1_g = fill(p + ".ln1.gain", 1, h, 1.0);
    L.ln1_b = fill(p + ".ln1.bias", 1, h, 0.0);
    L.wq = mk(p + ".attn.wq", h, h, s_in);
    L.bq = fill(p + ".attn.bq", 1, h, 0.0);
    L.wk = mk(p + ".attn.wk", h, h, s_in);
    L.bk = fill(p + ".attn.bk", 1, h, 0.0);
    L.wv = mk(p + ".attn.wv", h, h, s_in);
    L.bv = fill(p + ".attn.bv", 1, h, 0.0);
    L.wo = mk(p + ".attn.wo", h, h, s_out);
    L.bo = fill(p + ".attn.bo", 1, h, 0.0);
    L.ln2_g = fill(p + ".ln2.gain", 1, h, 1.0);
    L.ln2_b = fill(p + ".ln2.bias", 1, h, 0.0);
    L.w1 = mk(p + ".ffn.w1", h, f, s_in);
    L.b1 = fill(p + ".ffn.b1", 1, f, 0.0);
    L.w2 = mk(p + ".ffn.w2", f, h, 1.0 / std::sqrt(static_cast<double>(f)) / std::sqrt(2.0 * cfg.layers));
    L.b2 = fill(p + ".ffn.b2", 1, h, 0.0);
    layers_.push_back(L);
  }
  lnf_g_ = fill(".final_ln.gain", 1, h, 1.0);
  lnf_b_ = fill(".final_ln.bias", 1, h, 0.0);
}

Var Transformer::forward(Graph& g, Var x) const {
  for (const auto& L : layers_) {
    Var n1 = g.layernorm(x, g.param(*L.ln1_g), g.param(*L.ln1_b));
    Var q = g.linear(n1, g.param(*L.wq), g.param(*L.bq));
    Var k = g.linear(n1, g.param(*L.wk), g.param(*L.bk));
    Var v = g.linear(n1, g.param(*L.wv), g.param(*L.bv));
    Var a = g.attention(q, k, v, cfg_.heads, cfg_.causal);
    x = g.add(x, g.linear(a, g.param(*L.wo), g.param(*L.bo)));
    Var n2 = g.layernorm(x, g.param(*L.ln2_g), g.param(*L.ln2_b));
    Var f = g.gelu(g.linear(n2, g.param(*L.w1), g.param(*L.b1)));
    x = g.add(x, g.linear(f, g.param(*L.w2), g.param(*L.b2)));
  }
  return g.layernorm(x, g.param(*lnf_g_), g.param(*lnf_b_));
}

namespace {

void add_into(Matrix& x, const Matrix& y) {
  for (std::size_t i = 0; i < x.size(); ++i) x.data[i] += y.data[i];
}

void gelu_inplace(Matrix& x) {
  constexpr double c = 0.7978845608028654;
  for (double& v : x.data) v = 0.5 * v * (1.0 + std::tanh(c * (v + 0.044715 * v * v * v)));
}

// Attention of the query rows q[Tq x H] against keys/values rows [0, tk) of
// k and v; query row i sits at absolute position offset + i.
Matrix attend(const Matrix& q, const Matrix& k, const Matrix& v, int tk, int heads, bool causal, int offset) {
  const int tq = q.rows, hdim = q.cols, d = hdim / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  Matrix out(tq, hdim);
  std::vector<double> s(static_cast<std::size_t>(tk));
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < tq; ++i) {
      const int limit = causal ? std::min(tk, offset + i + 1) : tk;
      const double* qi = q.row(i) + h * d;
      double m = -INFINITY;
      for (int j = 0; j < limit; ++j) {
        const double* kj = k.row(j) + h * d;
        double dot = 0;
        for (int t = 0; t < d; ++t) dot += qi[t] * kj[t];
        s[static_cast<std::size_t>(j)] = dot * inv;
        m = std::max(m, s[static_cast<std::size_t>(j)]);
      }
      double sum = 0;
      for (int j = 0; j < limit; ++j) sum += (s[static_cast<std::size_t>(j)] = std::exp(s[static_cast<std::size_t>(j)] - m));
      double* oi = out.row(i) + h * d;
      for (int j = 0; j < limit; ++j) {
        const double p = s[static_cast<std::size_t>(j)] / sum;
        const double* vj = v.row(j) + h * d;
        for (int t = 0; t < d; ++t) oi[t] += p * vj[t];
      }
    }
  }
  return out;
}

}  // namespace

Matrix Transformer::infer(const Matrix& input) const {
  Matrix x = input;
  for (const auto& L : layers_) {
    Matrix n1 = x;
    layernorm_forward(n1, *L.ln1_g, *L.ln1_b);
    Matrix q = linear_forward(n1, *L.wq, *L.bq);
    Matrix k = linear_forward(n1, *L.wk, *L.bk);
    Matrix v = linear_forward(n1, *L.wv, *L.bv);
    Matrix a = attend(q, k, v, x.rows, cfg_.heads, cfg_.causal, 0);
    add_into(x, linear_forward(a, *L.wo, *L.bo));
    Matrix n2 = x;
    layernorm_forward(n2, *L.ln2_g, *L.ln2_b);
    Matrix f = linear_forward(n2, *L.w1, *L.b1);
    gelu_inplace(f);
    add_into(x, linear_forward(f, *L.w2, *L.b2));
  }
  layernorm_forward(x, *lnf_g_, *lnf_b_);
  return x;
}

Transformer::Cache Transformer::make_cache(int capacity) const {
  Cache c;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    c.k.emplace_back(capacity, cfg_.hidden);
    c.v.emplace_back(capacity, cfg_.hidden);
  }
  return c;
}

std::vector<double> Transformer::step(Cache& cache, std::span<const double> in) const {
  if (static_cast<int>(in.size()) != cfg_.hidden) throw Error(ErrorCode::DimensionMismatch, "step input width");
  if (cache.k.empty() || cache.length >= cache.k[0].rows)
    throw Error(ErrorCode::ContextOverflow, "key/value cache is full");
  const int pos = cache.length;
  Matrix x(1, cfg_.hidden);
  std::copy(in.begin(), in.end(), x.data.begin());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    Matrix n1 = x;
    layernorm_forward(n1, *L.ln1_g, *L.ln1_b);
    Matrix q = linear_forward(n1, *L.wq, *L.bq);
    Matrix k = linear_forward(n1, *L.wk, *L.bk);
    Matrix v = linear_forward(n1, *L.wv, *L.bv);
    std::copy(k.data.begin(), k.data.end(), cache.k[l].row(pos));
    std::copy(v.data.begin(), v.data.end(), cache.v[l].row(pos));
    Matrix a = attend(q, cache.k[l], cache.v[l], pos + 1, cfg_.heads, false, pos);
    add_into(x, linear_forward(a, *L.wo, *L.bo));
    Matrix n2 = x;
    layernorm_forward(n2, *L.ln2_g, *L.ln2_b);
    Matrix f = linear_forward(n2, *L.w1, *L.b1);
    gelu_inplace(f);
    add_into(x, linear_forward(f, *L.w2, *L.b2));
  }
  layernorm_forward(x, *lnf_g_, *lnf_b_);
  ++cache.length;
  return x.data;
}

}  // namespace xmusic::nn
