#include <cmath>

#include "doctest.h"
#include "eyetrans/gradcheck.hpp"
#include "eyetrans/layers.hpp"

using namespace eyetrans;
using namespace eyetrans::nn;

namespace {

Tensor<double> random_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Tensor<double> t(r, c);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& v : t.data) v = u(rng);
  return t;
}

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace

TEST_CASE("attention of one token returns V") {
  Tape<double> t;
  auto v = Tensor<double>(1, 3, {0.5, -1, 2});
  auto out = t.value(scaled_dot_attention(t, t.constant(Tensor<double>(1, 3, {1, 2, 3})),
                                          t.constant(Tensor<double>(1, 3, {4, 5, 6})), t.constant(v)));
  CHECK(max_abs_diff(out, v) < 1e-15);
}

TEST_CASE("equal scores average V") {
  Tape<double> t;
  Tensor<double> v(3, 2, {1, 2, 3, 4, 5, 9});
  auto out = t.value(scaled_dot_attention(t, t.constant(Tensor<double>(3, 2)), t.constant(Tensor<double>(3, 2)),
                                          t.constant(v)));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(out.at(i, 0) == doctest::Approx(3.0));
    CHECK(out.at(i, 1) == doctest::Approx(5.0));
  }
}

TEST_CASE("two-token closed form") {
  // Q = K = I, d_k = 2: row 0 weights are e^{1/sqrt2} : 1.
  Tape<double> t;
  Tensor<double> eye(2, 2, {1, 0, 0, 1});
  Tensor<double> v(2, 1, {10, 20});
  HeadTrace<double> trace;
  auto out = t.value(scaled_dot_attention(t, t.constant(eye), t.constant(eye), t.constant(v), {}, &trace));
  const double e = std::exp(1.0 / std::sqrt(2.0));
  const double w0 = e / (e + 1);
  CHECK(trace.weights.at(0, 0) == doctest::Approx(w0).epsilon(1e-12));
  CHECK(trace.weights.at(0, 1) == doctest::Approx(1 - w0).epsilon(1e-12));
  CHECK(trace.scores.at(0, 0) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(out.at(0, 0) == doctest::Approx(10 * w0 + 20 * (1 - w0)).epsilon(1e-12));
  CHECK(out.at(1, 0) == doctest::Approx(10 * (1 - w0) + 20 * w0).epsilon(1e-12));
}

TEST_CASE("masked positions get weight exactly zero; rows sum to 1") {
  std::mt19937_64 rng(1);
  Tape<double> t;
  auto q = random_tensor(rng, 5, 4), k = random_tensor(rng, 5, 4), v = random_tensor(rng, 5, 4);
  auto mask = causal_mask(5);
  HeadTrace<double> trace;
  scaled_dot_attention(t, t.constant(q), t.constant(k), t.constant(v), mask, &trace);
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 5; ++j) {
      if (j > i) CHECK(trace.weights.at(i, j) == 0.0);
      s += trace.weights.at(i, j);
    }
    CHECK(std::abs(s - 1) < 1e-6);
  }
  Tape<double> bad;
  CHECK_THROWS_AS(scaled_dot_attention(bad, bad.constant(Tensor<double>(2, 3)), bad.constant(Tensor<double>(2, 4)),
                                       bad.constant(Tensor<double>(2, 4))),
                  ShapeMismatch);
}

TEST_CASE("multi-head with one head is attention then W_o") {
  std::mt19937_64 rng(2);
  AttentionParams<double> p("a", 4, 1);
  p.init(rng);
  auto x = random_tensor(rng, 3, 4);
  Tape<double> t;
  Var xv = t.constant(x);
  auto mha = t.value(multi_head_attention(t, xv, xv, xv, p));
  Tape<double> r;
  Var xr = r.constant(x);
  Var att = scaled_dot_attention(r, p.wq(r, xr), p.wk(r, xr), p.wv(r, xr));
  auto ref = r.value(p.wo(r, att));
  CHECK(max_abs_diff(mha, ref) < 1e-14);

  AttentionParams<double> p4("b", 8, 4);
  p4.init(rng);
  Tape<double> z;
  Var zero = z.constant(Tensor<double>(6, 8));
  auto out = z.value(multi_head_attention(z, zero, zero, zero, p4));
  CHECK(out.rows() == 6);
  CHECK(out.cols() == 8);
  for (double v : out.data) CHECK(v == 0.0);
  CHECK_THROWS_AS(AttentionParams<double>("c", 6, 4), ShapeMismatch);
}

TEST_CASE("layer norm rows have mean 0 and variance near 1") {
  std::mt19937_64 rng(3);
  LayerNorm<double> ln("ln", 16);
  ln.init();
  Tape<double> t;
  auto y = t.value(ln(t, t.constant(random_tensor(rng, 7, 16, 5.0))));
  for (std::size_t i = 0; i < 7; ++i) {
    double m = 0, v = 0;
    for (std::size_t j = 0; j < 16; ++j) m += y.at(i, j);
    m /= 16;
    for (std::size_t j = 0; j < 16; ++j) v += (y.at(i, j) - m) * (y.at(i, j) - m);
    v /= 16;
    CHECK(std::abs(m) < 1e-12);
    CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("encoder and decoder blocks keep shape; decoder is causal") {
  std::mt19937_64 rng(4);
  std::vector<EncoderBlock<double>> enc;
  for (int i = 0; i < 4; ++i) {
    enc.emplace_back("e" + std::to_string(i), 8, 4, 32);
    enc.back().init(rng);
  }
  Tape<double> t;
  Var x = t.constant(random_tensor(rng, 5, 8));
  for (auto& b : enc) x = b(t, x);
  CHECK(t.value(x).rows() == 5);
  CHECK(t.value(x).cols() == 8);

  DecoderBlock<double> dec("d", 8, 4, 32);
  dec.init(rng);
  auto mem = random_tensor(rng, 5, 8);
  auto y = random_tensor(rng, 4, 8);
  auto y2 = y;
  for (std::size_t j = 0; j < 8; ++j) y2.at(3, j) += 1.0;
  Tape<double> a, b;
  auto out1 = a.value(dec(a, a.constant(y), a.constant(mem)));
  auto out2 = b.value(dec(b, b.constant(y2), b.constant(mem)));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 8; ++j) CHECK(out1.at(i, j) == doctest::Approx(out2.at(i, j)).epsilon(1e-12));
  double diff = 0;
  for (std::size_t j = 0; j < 8; ++j) diff += std::abs(out1.at(3, j) - out2.at(3, j));
  CHECK(diff > 1e-6);

  dec.cross_qk_from_decoder = true;
  Tape<double> c;
  CHECK(c.value(dec(c, c.constant(y), c.constant(mem))).rows() == 4);
}

TEST_CASE("backward basics and disconnected parameters") {
  Parameter<double> x("x", 2, 3), unused("unused", 1, 1);
  for (auto& v : x.value.data) v = 0.7;
  Tape<double> t;
  t.param(unused);
  auto report = t.backward(sum(t, t.param(x)));
  for (double g : x.grad.data) CHECK(g == 1.0);
  REQUIRE(report.disconnected.size() == 1);
  CHECK(report.disconnected[0] == "unused");
  CHECK(unused.grad.data[0] == 0.0);

  Tape<double> s;
  CHECK_THROWS_AS(s.backward(s.param(x)), ShapeMismatch);
}

TEST_CASE("matmul gradient matches central differences") {
  std::mt19937_64 rng(5);
  Parameter<double> a("a", 3, 4), b("b", 4, 2);
  a.value = random_tensor(rng, 3, 4);
  b.value = random_tensor(rng, 4, 2);
  auto w = random_tensor(rng, 3, 2);
  auto loss = [&](Tape<double>& t) { return sum(t, mul(t, matmul(t, t.param(a), t.param(b)), t.constant(w))); };
  auto r = grad_check<double>(loss, {&a, &b}, 1e-5, 100);
  CHECK(r.checked == 20);
  CHECK(r.max_relative_error < 1e-6);
}

TEST_CASE("linear model gradient is exact to rounding") {
  std::mt19937_64 rng(6);
  Linear<double> lin("lin", 5, 3);
  lin.init(rng);
  for (auto& v : lin.bias.value.data) v = 0.3;
  auto x = random_tensor(rng, 4, 5);
  auto w = random_tensor(rng, 4, 3);
  nn::ParamList<double> params;
  lin.collect(params);
  auto loss = [&](Tape<double>& t) { return sum(t, mul(t, lin(t, t.constant(x)), t.constant(w))); };
  auto r = grad_check<double>(loss, params, 1e-4, 100);
  CHECK(r.max_relative_error < 1e-9);
  CHECK(r.skipped_kinks == 0);
}

TEST_CASE("relu kinks are skipped and counted") {
  Parameter<double> x("x", 1, 4);
  x.value.data = {0.0, 1.0, -1.0, 1e-7};
  auto loss = [&](Tape<double>& t) { return sum(t, relu(t, t.param(x))); };
  auto r = grad_check<double>(loss, {&x}, 1e-4, 4);
  CHECK(r.skipped_kinks == 2);
  CHECK(r.checked == 2);
  CHECK(r.max_relative_error < 1e-9);
}

TEST_CASE("full models pass the finite-difference check; a mutated rule fails") {
  auto ok = run_gradcheck();
  CHECK(ok.pass);
  CHECK(ok.max_relative_error <= 1e-3);
  CHECK(ok.classifier.checked > 0);
  CHECK(ok.seq2seq.checked > 0);
  auto bad = run_gradcheck(true);
  CHECK_FALSE(bad.pass);
  CHECK_FALSE(g_mutate_matmul_grad.load());
}

TEST_CASE("cross entropy of uniform logits is ln C") {
  Tape<double> t;
  Var l = cross_entropy(t, t.constant(Tensor<double>(3, 7)), {0, 3, 6});
  CHECK(t.value(l).data[0] == doctest::Approx(std::log(7.0)).epsilon(1e-12));
  Tape<double> w;
  Var lw = cross_entropy(w, w.constant(Tensor<double>(2, 4, {5, 0, 0, 0, 0, 0, 0, 0})), {0, 1}, {0.0, 1.0});
  CHECK(w.value(lw).data[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("adam examples") {
  Parameter<double> p("p", 1, 1);
  p.value.data[0] = 0.5;
  AdamState<double> st;
  adam_step<double>({&p}, st);
  CHECK(p.value.data[0] == 0.5);

  Parameter<double> q("q", 1, 1);
  q.grad.data[0] = 1.0;
  AdamState<double> sq;
  adam_step<double>({&q}, sq);
  CHECK(q.value.data[0] == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(sq.step == 1);

  Parameter<double> th("theta", 1, 1);
  th.value.data[0] = 1.0;
  AdamState<double> s;
  AdamConfig cfg;
  cfg.lr = 0.01;
  double prev = 1.0;
  for (int i = 0; i < 100; ++i) {
    th.grad.data[0] = 2 * th.value.data[0];
    adam_step<double>({&th}, s, cfg);
    CHECK(std::abs(th.value.data[0]) < prev);
    prev = std::abs(th.value.data[0]);
  }
}

TEST_CASE("forward passes are deterministic given the dropout seed") {
  std::mt19937_64 init(7);
  EncoderBlock<float> blk("e", 8, 4, 32);
  blk.init(init);
  Tensor<float> x(4, 8, 0.1f);
  x.at(1, 2) = 0.7f;
  auto run = [&](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Tape<float> t;
    return t.value(blk(t, t.constant(x), 0.3, &rng));
  };
  CHECK(run(3) == run(3));
  CHECK_FALSE(run(3) == run(4));
}
