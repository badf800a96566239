#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "eyetrans/tensor.hpp"

namespace eyetrans::nn {

// Sign-flips the matmul left-operand gradient. Only the gradient checker's
// mutation mode turns this on, to prove the checker can fail.
inline std::atomic<bool> g_mutate_matmul_grad{false};

struct Var {
  std::size_t id = 0;
};

struct BackwardReport {
  // Parameters recorded on the tape that the loss does not depend on; their
  // gradient contribution is zero.
  std::vector<std::string> disconnected;
};

// Reverse-mode record of one forward pass. Single owner; not thread-safe.
template <typename T>
class Tape {
 public:
  using BackFn = std::function<void(Tape&, std::size_t self)>;

  Var constant(Tensor<T> value) { return push(std::move(value), false, nullptr, nullptr); }

  Var param(Parameter<T>& p) { return push(p.value, true, nullptr, &p); }

  // Records an op. `back` reads grad(self) and accumulates into inputs.
  Var record(Tensor<T> value, std::initializer_list<Var> inputs, BackFn back) {
    bool needs = false;
    for (Var v : inputs) needs = needs || nodes_[v.id].needs_grad;
    std::vector<std::size_t> ins;
    for (Var v : inputs) ins.push_back(v.id);
    Var out = push(std::move(value), needs, needs ? std::move(back) : BackFn{}, nullptr);
    nodes_[out.id].inputs = std::move(ins);
    return out;
  }
  Var record(Tensor<T> value, const std::vector<Var>& inputs, BackFn back) {
    bool needs = false;
    for (Var v : inputs) needs = needs || nodes_[v.id].needs_grad;
    std::vector<std::size_t> ins;
    for (Var v : inputs) ins.push_back(v.id);
    Var out = push(std::move(value), needs, needs ? std::move(back) : BackFn{}, nullptr);
    nodes_[out.id].inputs = std::move(ins);
    return out;
  }

  const Tensor<T>& value(Var v) const { return nodes_[v.id].value; }
  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::size_t input(std::size_t self, std::size_t k) const { return nodes_[self].inputs[k]; }

  // Gradient buffer of a node, allocated on first touch.
  std::vector<T>& grad(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.value.size(), T(0));
    return n.grad;
  }
  std::vector<T>& grad(Var v) { return grad(v.id); }

  std::size_t size() const { return nodes_.size(); }

  // Runs the reverse sweep from a scalar loss, adding seed * dloss/dparam
  // into every reachable Parameter::grad.
  BackwardReport backward(Var loss, T seed = T(1)) {
    if (nodes_[loss.id].value.size() != 1) throw ShapeMismatch("backward needs a scalar loss");
    std::vector<char> reached(nodes_.size(), 0);
    reached[loss.id] = 1;
    grad(loss.id)[0] += seed;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!reached[i] || !n.needs_grad) continue;
      if (n.back) n.back(*this, i);
      for (std::size_t in : nodes_[i].inputs) {
        if (nodes_[in].needs_grad) reached[in] = 1;
      }
    }
    BackwardReport report;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      Node& n = nodes_[i];
      if (!n.param) continue;
      if (!reached[i]) {
        report.disconnected.push_back(n.param->name);
        continue;
      }
      if (n.grad.empty()) continue;
      for (std::size_t k = 0; k < n.grad.size(); ++k) n.param->grad.data[k] += n.grad[k];
    }
    return report;
  }

  // Sign pattern of every relu input seen so far; the gradient checker skips
  // coordinates whose perturbation changes it.
  std::vector<std::int8_t>& kink_pattern() { return kinks_; }

 private:
  struct Node {
    Tensor<T> value;
    std::vector<T> grad;
    std::vector<std::size_t> inputs;
    BackFn back;
    Parameter<T>* param = nullptr;
    bool needs_grad = false;
  };

  Var push(Tensor<T> value, bool needs, BackFn back, Parameter<T>* p) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs;
    n.back = std::move(back);
    n.param = p;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  std::vector<std::int8_t> kinks_;
};

// ---- primitive ops -------------------------------------------------------

namespace detail {

template <typename T>
void check_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeMismatch(std::string(op) + ": " + shape_string(a.rows(), a.cols()) + " vs " +
                        shape_string(b.rows(), b.cols()));
  }
}

// C[m,n] += A[m,k] * B[k,n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    const T* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ai[p];
      if (av == T(0)) continue;
      const T* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[m,n] += A[m,k] * B[n,k]^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* bj = b + j * k;
      T s = 0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * n + j] += s;
    }
  }
}

// C[k,n] += A[m,k]^T * B[m,n]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    const T* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ai[p];
      if (av == T(0)) continue;
      T* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

}  // namespace detail

template <typename T>
Var matmul(Tape<T>& t, Var a, Var b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  if (A.cols() != B.rows()) {
    throw ShapeMismatch("matmul: " + shape_string(A.rows(), A.cols()) + " x " + shape_string(B.rows(), B.cols()));
  }
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor<T> C(m, n);
  detail::gemm_nn(A.data.data(), B.data.data(), C.data.data(), m, k, n);
  return t.record(std::move(C), {a, b}, [m, k, n](Tape<T>& tp, std::size_t self) {
    const std::size_t ia = tp.input(self, 0), ib = tp.input(self, 1);
    const auto& g = tp.grad(self);
    if (tp.needs_grad(ia)) {
      auto& ga = tp.grad(ia);
      if (g_mutate_matmul_grad.load(std::memory_order_relaxed)) {
        std::vector<T> tmp(ga.size(), T(0));
        detail::gemm_nt(g.data(), tp.value(ib).data.data(), tmp.data(), m, n, k);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] -= tmp[i];
      } else {
        detail::gemm_nt(g.data(), tp.value(ib).data.data(), ga.data(), m, n, k);
      }
    }
    if (tp.needs_grad(ib)) detail::gemm_tn(tp.value(ia).data.data(), g.data(), tp.grad(ib).data(), m, k, n);
  });
}

// A[m,k] * B[n,k]^T
template <typename T>
Var matmul_nt(Tape<T>& t, Var a, Var b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  if (A.cols() != B.cols()) {
    throw ShapeMismatch("matmul_nt: " + shape_string(A.rows(), A.cols()) + " x " +
                        shape_string(B.rows(), B.cols()) + "^T");
  }
  const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
  Tensor<T> C(m, n);
  detail::gemm_nt(A.data.data(), B.data.data(), C.data.data(), m, k, n);
  return t.record(std::move(C), {a, b}, [m, k, n](Tape<T>& tp, std::size_t self) {
    const std::size_t ia = tp.input(self, 0), ib = tp.input(self, 1);
    const auto& g = tp.grad(self);
    if (tp.needs_grad(ia)) detail::gemm_nn(g.data(), tp.value(ib).data.data(), tp.grad(ia).data(), m, n, k);
    if (tp.needs_grad(ib)) detail::gemm_tn(g.data(), tp.value(ia).data.data(), tp.grad(ib).data(), m, n, k);
  });
}

template <typename T>
Var add(Tape<T>& t, Var a, Var b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  detail::check_same(A, B, "add");
  Tensor<T> C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.data[i] += B.data[i];
  return t.record(std::move(C), {a, b}, [](Tape<T>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    for (std::size_t k = 0; k < 2; ++k) {
      const std::size_t in = tp.input(self, k);
      if (!tp.needs_grad(in)) continue;
      auto& gi = tp.grad(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

// A[m,n] + b[1,n] broadcast over rows.
template <typename T>
Var add_row(Tape<T>& t, Var a, Var b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  if (B.rows() != 1 || B.cols() != A.cols()) {
    throw ShapeMismatch("add_row: " + shape_string(A.rows(), A.cols()) + " + " + shape_string(B.rows(), B.cols()));
  }
  Tensor<T> C = A;
  const std::size_t m = A.rows(), n = A.cols();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) C.data[i * n + j] += B.data[j];
  return t.record(std::move(C), {a, b}, [m, n](Tape<T>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    const std::size_t ia = tp.input(self, 0), ib = tp.input(self, 1);
    if (tp.needs_grad(ia)) {
      auto& ga = tp.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.needs_grad(ib)) {
      auto& gb = tp.grad(ib);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    }
  });
}

template <typename T>
Var mul(Tape<T>& t, Var a, Var b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  detail::check_same(A, B, "mul");
  Tensor<T> C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.data[i] *= B.data[i];
  return t.record(std::move(C), {a, b}, [](Tape<T>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    const std::size_t ia = tp.input(self, 0), ib = tp.input(self, 1);
    if (tp.needs_grad(ia)) {
      auto& ga = tp.grad(ia);
      const auto& bv = tp.value(ib).data;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tp.needs_grad(ib)) {
      auto& gb = tp.grad(ib);
      const auto& av = tp.value(ia).data;
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

template <typename T>
Var scale(Tape<T>& t, Var a, T s) {
  Tensor<T> C = t.value(a);
  for (auto& v : C.data) v *= s;
  return t.record(std::move(C), {a}, [s](Tape<T>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    auto& ga = tp.grad(tp.input(self, 0));
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  });
}

template <typename T>
Var add_scalar(Tape<T>& t, Var a, T s) {
  Tensor<T> C = t.value(a);
  for (auto& v : C.data) v += s;
  return t.record(std::move(C), {a}, [](Tape<T>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    auto& ga = tp.grad(tp.input(self, 0));
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

template <typename T>
Var relu(Tape<T>& t, Var a) {
  Tensor<T> C = t.value(a);
  auto& kinks = t.kink_pattern();
  for (auto& v : C.data) {
    kinks.push_back(v > T(0) ? 1 : (v < T(0) ? -1 : 0));
    if (!(v > T(0))) v = T(0);
  }
  return t.record(std::move(C), {a}, [](Tape<T>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    const std::size_t ia = tp.input(self, 0);
    const auto& x = tp.value(ia).data;
    auto& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > T(0)) ga[i] += g[i];
    }
  });
}

template <typename T>
Var sigmoid(Tape<T>& t, Var a) {
  Tensor<T> C = t.value(a);
  for (auto& v : C.data) v = T(1) / (T(1) + std::exp(-v));
  return t.record(std::move(C), {a}, [](Tape<T>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    const auto& y = tp.value(self).data;
    auto& ga = tp.grad(tp.input(self, 0));
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (T(1) - y[i]);
  });
}

// Row-wise softmax. Entries with mask != 0 are blocked and get weight
// exactly 0; a fully blocked row is all zeros.
template <typename T>
Var softmax_rows(Tape<T>& t, Var a, std::span<const std::uint8_t> blocked = {}) {
  const auto& A = t.value(a);
  const std::size_t m = A.rows(), n = A.cols();
  if (!blocked.empty() && blocked.size() != m * n) throw ShapeMismatch("softmax mask shape");
  Tensor<T> Y(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (!blocked.empty() && blocked[i * n + j]) continue;
      mx = std::max(mx, A.data[i * n + j]);
    }
    if (mx == -std::numeric_limits<T>::infinity()) continue;
    T sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!blocked.empty() && blocked[i * n + j]) continue;
      const T e = std::exp(A.data[i * n + j] - mx);
      Y.data[i * n + j] = e;
      sum += e;
    }
    for (std::size_t j = 0; j < n; ++j) Y.data[i * n + j] /= sum;
  }
  return t.record(std::move(Y), {a}, [m, n](Tape<T>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    const auto& y = tp.value(self).data;
    auto& ga = tp.grad(tp.input(self, 0));
    for (std::size_t i = 0; i < m; ++i) {
      T dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
    }
  });
}

// Row-wise normalization to zero mean and unit variance, then gamma/beta.
template <typename T>
Var layer_norm(Tape<T>& t, Var a, Var gamma, Var beta, T eps = T(1e-5)) {
  const auto& A = t.value(a);
  const auto& G = t.value(gamma);
  const auto& B = t.value(beta);
  const std::size_t m = A.rows(), n = A.cols();
  if (G.size() != n || B.size() != n) throw ShapeMismatch("layer_norm: gamma/beta width");
  Tensor<T> Y(m, n);
  std::vector<T> xhat(m * n), inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    T mean = 0;
    for (std::size_t j = 0; j < n; ++j) mean += A.data[i * n + j];
    mean /= T(n);
    T var = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const T d = A.data[i * n + j] - mean;
      var += d * d;
    }
    var /= T(n);
    inv_std[i] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (A.data[i * n + j] - mean) * inv_std[i];
      Y.data[i * n + j] = xhat[i * n + j] * G.data[j] + B.data[j];
    }
  }
  return t.record(std::move(Y), {a, gamma, beta},
                  [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& tp, std::size_t self) {
                    const auto& g = tp.grad(self);
                    const std::size_t ia = tp.input(self, 0), ig = tp.input(self, 1), ib = tp.input(self, 2);
                    const auto& gam = tp.value(ig).data;
                    if (tp.needs_grad(ig)) {
                      auto& gg = tp.grad(ig);
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * xhat[i * n + j];
                    }
                    if (tp.needs_grad(ib)) {
                      auto& gb = tp.grad(ib);
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
                    }
                    if (tp.needs_grad(ia)) {
                      auto& ga = tp.grad(ia);
                      for (std::size_t i = 0; i < m; ++i) {
                        T mean_dx = 0, mean_dx_xhat = 0;
                        for (std::size_t j = 0; j < n; ++j) {
                          const T dx = g[i * n + j] * gam[j];
                          mean_dx += dx;
                          mean_dx_xhat += dx * xhat[i * n + j];
                        }
                        mean_dx /= T(n);
                        mean_dx_xhat /= T(n);
                        for (std::size_t j = 0; j < n; ++j) {
                          const T dx = g[i * n + j] * gam[j];
                          ga[i * n + j] += inv_std[i] * (dx - mean_dx - xhat[i * n + j] * mean_dx_xhat);
                        }
                      }
                    }
                  });
}

// out[i] = table[index[i]]; also used as a row selector on activations.
template <typename T>
Var gather_rows(Tape<T>& t, Var table, std::vector<std::size_t> index) {
  const auto& A = t.value(table);
  const std::size_t n = A.cols();
  Tensor<T> Y(index.size(), n);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= A.rows()) {
      throw ShapeMismatch("gather_rows: index " + std::to_string(index[i]) + " out of " + std::to_string(A.rows()));
    }
    std::copy_n(A.row(index[i]), n, Y.row(i));
  }
  return t.record(std::move(Y), {table}, [n, index = std::move(index)](Tape<T>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    auto& ga = tp.grad(tp.input(self, 0));
    for (std::size_t i = 0; i < index.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) ga[index[i] * n + j] += g[i * n + j];
  });
}

// out[index[i]] += src[i], output has `rows` rows.
template <typename T>
Var scatter_add_rows(Tape<T>& t, Var src, std::vector<std::size_t> index, std::size_t rows) {
  const auto& S = t.value(src);
  if (index.size() != S.rows()) throw ShapeMismatch("scatter_add_rows: index length");
  const std::size_t n = S.cols();
  Tensor<T> Y(rows, n);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= rows) throw ShapeMismatch("scatter_add_rows: index out of range");
    for (std::size_t j = 0; j < n; ++j) Y.data[index[i] * n + j] += S.data[i * n + j];
  }
  return t.record(std::move(Y), {src}, [n, index = std::move(index)](Tape<T>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    auto& gs = tp.grad(tp.input(self, 0));
    for (std::size_t i = 0; i < index.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) gs[i * n + j] += g[index[i] * n + j];
  });
}

template <typename T>
Var concat_rows(Tape<T>& t, Var a, Var b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  if (A.cols() != B.cols()) throw ShapeMismatch("concat_rows: widths differ");
  Tensor<T> Y(A.rows() + B.rows(), A.cols());
  std::copy(A.data.begin(), A.data.end(), Y.data.begin());
  std::copy(B.data.begin(), B.data.end(), Y.data.begin() + static_cast<std::ptrdiff_t>(A.size()));
  const std::size_t split = A.size();
  return t.record(std::move(Y), {a, b}, [split](Tape<T>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    const std::size_t ia = tp.input(self, 0), ib = tp.input(self, 1);
    if (tp.needs_grad(ia)) {
      auto& ga = tp.grad(ia);
      for (std::size_t i = 0; i < split; ++i) ga[i] += g[i];
    }
    if (tp.needs_grad(ib)) {
      auto& gb = tp.grad(ib);
      for (std::size_t i = split; i < g.size(); ++i) gb[i - split] += g[i];
    }
  });
}

template <typename T>
Var slice_cols(Tape<T>& t, Var a, std::size_t c0, std::size_t c1) {
  const auto& A = t.value(a);
  if (c0 > c1 || c1 > A.cols()) throw ShapeMismatch("slice_cols: bad range");
  const std::size_t m = A.rows(), n = A.cols(), w = c1 - c0;
  Tensor<T> Y(m, w);
  for (std::size_t i = 0; i < m; ++i) std::copy_n(A.row(i) + c0, w, Y.row(i));
  return t.record(std::move(Y), {a}, [m, n, w, c0](Tape<T>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    auto& ga = tp.grad(tp.input(self, 0));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) ga[i * n + c0 + j] += g[i * w + j];
  });
}

template <typename T>
Var concat_cols(Tape<T>& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols: no inputs");
  const std::size_t m = t.value(parts[0]).rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (Var p : parts) {
    if (t.value(p).rows() != m) throw ShapeMismatch("concat_cols: row counts differ");
    widths.push_back(t.value(p).cols());
    total += widths.back();
  }
  Tensor<T> Y(m, total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& P = t.value(parts[k]);
    for (std::size_t i = 0; i < m; ++i) std::copy_n(P.row(i), widths[k], Y.row(i) + off);
    off += widths[k];
  }
  return t.record(std::move(Y), parts, [m, total, widths](Tape<T>& tp, std::size_t self) {
    const auto& g = tp.grad(self);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      const std::size_t in = tp.input(self, k);
      if (tp.needs_grad(in)) {
        auto& gi = tp.grad(in);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) gi[i * widths[k] + j] += g[i * total + offset + j];
      }
      offset += widths[k];
    }
  });
}

template <typename T>
Var sum(Tape<T>& t, Var a) {
  T s = 0;
  for (T v : t.value(a).data) s += v;
  return t.record(Tensor<T>(1, 1, s), {a}, [](Tape<T>& tp, std::size_t self) {
    const T g = tp.grad(self)[0];
    for (auto& v : tp.grad(tp.input(self, 0))) v += g;
  });
}

// Weighted mean negative log-likelihood over rows of logits[m, C].
// Rows with weight 0 (padding) contribute nothing.
template <typename T>
Var cross_entropy(Tape<T>& t, Var logits, std::vector<int> targets, std::vector<T> weights = {}) {
  const auto& L = t.value(logits);
  const std::size_t m = L.rows(), c = L.cols();
  if (targets.size() != m) throw ShapeMismatch("cross_entropy: target count");
  if (weights.empty()) weights.assign(m, T(1));
  T wsum = 0;
  for (T w : weights) wsum += w;
  if (!(wsum > 0)) throw ShapeMismatch("cross_entropy: all rows masked");
  std::vector<T> probs(m * c);
  T loss = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= c) {
      throw ShapeMismatch("cross_entropy: target out of range");
    }
    T mx = L.data[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, L.data[i * c + j]);
    T s = 0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(L.data[i * c + j] - mx);
      s += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= s;
    const T logp = L.data[i * c + static_cast<std::size_t>(targets[i])] - mx - std::log(s);
    loss -= weights[i] * logp;
  }
  loss /= wsum;
  return t.record(Tensor<T>(1, 1, loss), {logits},
                  [m, c, wsum, probs = std::move(probs), targets = std::move(targets),
                   weights = std::move(weights)](Tape<T>& tp, std::size_t self) {
                    const T g = tp.grad(self)[0];
                    auto& gl = tp.grad(tp.input(self, 0));
                    for (std::size_t i = 0; i < m; ++i) {
                      const T wi = g * weights[i] / wsum;
                      if (wi == T(0)) continue;
                      for (std::size_t j = 0; j < c; ++j) {
                        const T y = j == static_cast<std::size_t>(targets[i]) ? T(1) : T(0);
                        gl[i * c + j] += wi * (probs[i * c + j] - y);
                      }
                    }
                  });
}

}  // namespace eyetrans::nn
