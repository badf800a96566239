#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "eyetrans/autograd.hpp"

namespace eyetrans::nn {

template <typename T>
using ParamList = std::vector<Parameter<T>*>;

template <typename T>
void init_uniform(Parameter<T>& p, T limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-static_cast<double>(limit), static_cast<double>(limit));
  for (auto& v : p.value.data) v = static_cast<T>(u(rng));
}

template <typename T>
void init_constant(Parameter<T>& p, T value) {
  std::fill(p.value.data.begin(), p.value.data.end(), value);
}

template <typename T>
struct Linear {
  Parameter<T> weight;  // [in, out]
  Parameter<T> bias;    // [1, out]

  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out)
      : weight(name + ".weight", in, out), bias(name + ".bias", 1, out) {}

  void init(std::mt19937_64& rng) {
    const double fan = static_cast<double>(weight.value.rows() + weight.value.cols());
    init_uniform(weight, static_cast<T>(std::sqrt(6.0 / fan)), rng);
    init_constant(bias, T(0));
  }
  Var operator()(Tape<T>& t, Var x) { return add_row(t, matmul(t, x, t.param(weight)), t.param(bias)); }
  void collect(ParamList<T>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

template <typename T>
struct LayerNorm {
  Parameter<T> gamma;
  Parameter<T> beta;

  LayerNorm() = default;
  LayerNorm(const std::string& name, std::size_t width) : gamma(name + ".gamma", 1, width), beta(name + ".beta", 1, width) {}

  void init() {
    init_constant(gamma, T(1));
    init_constant(beta, T(0));
  }
  Var operator()(Tape<T>& t, Var x) { return layer_norm(t, x, t.param(gamma), t.param(beta)); }
  void collect(ParamList<T>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

// Pre- and post-softmax score matrices of one head, recorded on request.
template <typename T>
struct HeadTrace {
  Tensor<T> scores;   // QK^T / sqrt(d_k)
  Tensor<T> weights;  // softmax(scores + mask)
};

template <typename T>
using AttentionTrace = std::vector<HeadTrace<T>>;

// softmax(QK^T / sqrt(d_k) + mask) V. `blocked` marks masked (row, col)
// entries, row-major over [rows(Q), rows(K)].
template <typename T>
Var scaled_dot_attention(Tape<T>& t, Var q, Var k, Var v, std::span<const std::uint8_t> blocked = {},
                         HeadTrace<T>* trace = nullptr) {
  const auto& Q = t.value(q);
  const auto& K = t.value(k);
  const auto& V = t.value(v);
  if (Q.cols() != K.cols()) throw ShapeMismatch("attention: query/key widths differ");
  if (K.rows() != V.rows()) throw ShapeMismatch("attention: key/value lengths differ");
  const T inv = T(1) / std::sqrt(static_cast<T>(Q.cols()));
  Var scores = scale(t, matmul_nt(t, q, k), inv);
  Var weights = softmax_rows(t, scores, blocked);
  if (trace) {
    trace->scores = t.value(scores);
    trace->weights = t.value(weights);
  }
  return matmul(t, weights, v);
}

// Blocks column j > i.
inline std::vector<std::uint8_t> causal_mask(std::size_t n) {
  std::vector<std::uint8_t> m(n * n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m[i * n + j] = 1;
  return m;
}

template <typename T>
struct AttentionParams {
  Linear<T> wq, wk, wv, wo;
  std::size_t n_heads = 4;

  AttentionParams() = default;
  AttentionParams(const std::string& name, std::size_t d, std::size_t heads)
      : wq(name + ".wq", d, d), wk(name + ".wk", d, d), wv(name + ".wv", d, d), wo(name + ".wo", d, d), n_heads(heads) {
    if (heads == 0 || d % heads != 0) throw ShapeMismatch("model width must be divisible by the head count");
  }
  void init(std::mt19937_64& rng) {
    wq.init(rng);
    wk.init(rng);
    wv.init(rng);
    wo.init(rng);
  }
  void collect(ParamList<T>& out) {
    wq.collect(out);
    wk.collect(out);
    wv.collect(out);
    wo.collect(out);
  }
};

// Heads attend over d/n_heads-wide slices; outputs are concatenated and
// projected by W_o. Query rows come from `xq`, key rows from `xk`, value
// rows from `xv`.
template <typename T>
Var multi_head_attention(Tape<T>& t, Var xq, Var xk, Var xv, AttentionParams<T>& p,
                         std::span<const std::uint8_t> blocked = {}, AttentionTrace<T>* trace = nullptr) {
  const std::size_t d = t.value(xq).cols();
  if (t.value(xk).cols() != d || t.value(xv).cols() != d) throw ShapeMismatch("attention: input widths differ");
  if (d % p.n_heads != 0) throw ShapeMismatch("attention: width not divisible by heads");
  const std::size_t dk = d / p.n_heads;
  Var q = p.wq(t, xq);
  Var k = p.wk(t, xk);
  Var v = p.wv(t, xv);
  if (trace) trace->assign(p.n_heads, {});
  std::vector<Var> heads;
  for (std::size_t h = 0; h < p.n_heads; ++h) {
    Var qh = p.n_heads == 1 ? q : slice_cols(t, q, h * dk, (h + 1) * dk);
    Var kh = p.n_heads == 1 ? k : slice_cols(t, k, h * dk, (h + 1) * dk);
    Var vh = p.n_heads == 1 ? v : slice_cols(t, v, h * dk, (h + 1) * dk);
    heads.push_back(scaled_dot_attention(t, qh, kh, vh, blocked, trace ? &(*trace)[h] : nullptr));
  }
  Var cat = p.n_heads == 1 ? heads[0] : concat_cols(t, heads);
  return p.wo(t, cat);
}

// Inverted dropout with a mask drawn from `rng`; identity when p == 0 or
// rng is null.
template <typename T>
Var dropout(Tape<T>& t, Var x, double p, std::mt19937_64* rng) {
  if (p <= 0.0 || rng == nullptr) return x;
  const auto& X = t.value(x);
  Tensor<T> mask(X.rows(), X.cols());
  std::bernoulli_distribution keep(1.0 - p);
  const T s = static_cast<T>(1.0 / (1.0 - p));
  for (auto& m : mask.data) m = keep(*rng) ? s : T(0);
  return mul(t, x, t.constant(std::move(mask)));
}

template <typename T>
struct FeedForward {
  Linear<T> up, down;

  FeedForward() = default;
  FeedForward(const std::string& name, std::size_t d, std::size_t hidden)
      : up(name + ".up", d, hidden), down(name + ".down", hidden, d) {}
  void init(std::mt19937_64& rng) {
    up.init(rng);
    down.init(rng);
  }
  Var operator()(Tape<T>& t, Var x) { return down(t, relu(t, up(t, x))); }
  void collect(ParamList<T>& out) {
    up.collect(out);
    down.collect(out);
  }
};

// Post-norm: attention -> residual -> norm -> feed-forward -> residual -> norm.
template <typename T>
struct EncoderBlock {
  AttentionParams<T> attn;
  LayerNorm<T> norm1, norm2;
  FeedForward<T> ffn;

  EncoderBlock() = default;
  EncoderBlock(const std::string& name, std::size_t d, std::size_t heads, std::size_t ffn_width)
      : attn(name + ".attn", d, heads), norm1(name + ".norm1", d), norm2(name + ".norm2", d), ffn(name + ".ffn", d, ffn_width) {}

  void init(std::mt19937_64& rng) {
    attn.init(rng);
    norm1.init();
    norm2.init();
    ffn.init(rng);
  }
  Var operator()(Tape<T>& t, Var x, double drop = 0.0, std::mt19937_64* rng = nullptr,
                 AttentionTrace<T>* trace = nullptr) {
    Var a = dropout(t, multi_head_attention(t, x, x, x, attn, {}, trace), drop, rng);
    Var h = norm1(t, add(t, x, a));
    Var f = dropout(t, ffn(t, h), drop, rng);
    return norm2(t, add(t, h, f));
  }
  void collect(ParamList<T>& out) {
    attn.collect(out);
    norm1.collect(out);
    norm2.collect(out);
    ffn.collect(out);
  }
};

// Masked self-attention, then cross-attention against the encoder output,
// then feed-forward, each followed by residual add and norm.
template <typename T>
struct DecoderBlock {
  AttentionParams<T> self_attn, cross_attn;
  LayerNorm<T> norm1, norm2, norm3;
  FeedForward<T> ffn;
  // Literal reading of "decoder embeddings feed Q and K": queries and keys
  // both project the decoder stream, and the encoder contributes values
  // through its mean row (the only shape-consistent way to use it).
  bool cross_qk_from_decoder = false;

  DecoderBlock() = default;
  DecoderBlock(const std::string& name, std::size_t d, std::size_t heads, std::size_t ffn_width)
      : self_attn(name + ".self_attn", d, heads),
        cross_attn(name + ".cross_attn", d, heads),
        norm1(name + ".norm1", d),
        norm2(name + ".norm2", d),
        norm3(name + ".norm3", d),
        ffn(name + ".ffn", d, ffn_width) {}

  void init(std::mt19937_64& rng) {
    self_attn.init(rng);
    cross_attn.init(rng);
    norm1.init();
    norm2.init();
    norm3.init();
    ffn.init(rng);
  }
  Var operator()(Tape<T>& t, Var y, Var memory, double drop = 0.0, std::mt19937_64* rng = nullptr) {
    const std::size_t n = t.value(y).rows();
    const auto mask = causal_mask(n);
    Var s = dropout(t, multi_head_attention(t, y, y, y, self_attn, mask), drop, rng);
    Var h1 = norm1(t, add(t, y, s));
    Var c;
    if (cross_qk_from_decoder) {
      const std::size_t m = t.value(memory).rows();
      Var pooled = scale(t, scatter_add_rows(t, memory, std::vector<std::size_t>(m, 0), 1), T(1) / T(m));
      Var values = gather_rows(t, pooled, std::vector<std::size_t>(n, 0));
      c = multi_head_attention(t, h1, h1, values, cross_attn, mask);
    } else {
      c = multi_head_attention(t, h1, memory, memory, cross_attn);
    }
    Var h2 = norm2(t, add(t, h1, dropout(t, c, drop, rng)));
    Var f = dropout(t, ffn(t, h2), drop, rng);
    return norm3(t, add(t, h2, f));
  }
  void collect(ParamList<T>& out) {
    self_attn.collect(out);
    cross_attn.collect(out);
    norm1.collect(out);
    norm2.collect(out);
    norm3.collect(out);
    ffn.collect(out);
  }
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

// Bias-corrected Adam over `params`, reading Parameter::grad.
template <typename T>
void adam_step(const ParamList<T>& params, AdamState<T>& state, const AdamConfig& cfg = {}) {
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i]->value.size(), T(0));
      state.v[i].assign(params[i]->value.size(), T(0));
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i]->value.data;
    const auto& g = params[i]->grad.data;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = static_cast<T>(cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k]);
      v[k] = static_cast<T>(cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k]);
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      w[k] = static_cast<T>(w[k] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

struct GradCheckReport {
  double max_relative_error = 0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::vector<std::string> disconnected;
};

// Compares analytic gradients against central differences at up to
// `coords_per_param` sampled entries of every parameter. Coordinates whose
// +-eps perturbation flips any relu input sign are skipped and counted.
// Error per coordinate: |analytic - numeric| / max(1e-8, |analytic|).
template <typename T>
GradCheckReport grad_check(const std::function<Var(Tape<T>&)>& closure, const ParamList<T>& params, T eps,
                           std::size_t coords_per_param = 16, std::uint64_t seed = 0) {
  GradCheckReport report;
  for (auto* p : params) p->zero_grad();
  {
    Tape<T> tape;
    Var loss = closure(tape);
    report.disconnected = tape.backward(loss).disconnected;
  }
  std::vector<Tensor<T>> analytic;
  for (auto* p : params) analytic.push_back(p->grad);

  auto evaluate = [&](std::vector<std::int8_t>& kinks) {
    Tape<T> tape;
    Var loss = closure(tape);
    kinks = tape.kink_pattern();
    return tape.value(loss).data[0];
  };

  std::mt19937_64 rng(seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& w = params[pi]->value.data;
    std::vector<std::size_t> coords(w.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    std::shuffle(coords.begin(), coords.end(), rng);
    if (coords.size() > coords_per_param) coords.resize(coords_per_param);
    for (std::size_t idx : coords) {
      const T orig = w[idx];
      std::vector<std::int8_t> kp, km;
      w[idx] = orig + eps;
      const T fp = evaluate(kp);
      w[idx] = orig - eps;
      const T fm = evaluate(km);
      w[idx] = orig;
      if (kp != km) {
        ++report.skipped_kinks;
        continue;
      }
      const double numeric = static_cast<double>(fp - fm) / (2.0 * static_cast<double>(eps));
      const double a = static_cast<double>(analytic[pi].data[idx]);
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a));
      ++report.checked;
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_parameter = params[pi]->name;
        report.worst_index = idx;
      }
    }
  }
  return report;
}

}  // namespace eyetrans::nn
