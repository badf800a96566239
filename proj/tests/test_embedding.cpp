#include <cmath>

#include "doctest.h"
#include "eyetrans/augment.hpp"
#include "eyetrans/embedding.hpp"
#include "eyetrans/gaze.hpp"
#include "support.hpp"

using namespace eyetrans;
using SC = SemanticCategory;

namespace {

using Tables = EmbeddingTables<float>;

Tables seeded_tables(std::uint64_t seed, int width = 8) {
  Tables t(width);
  std::mt19937_64 rng(seed);
  t.init(rng);
  return t;
}

float relu(float x) { return x > 0 ? x : 0; }
float sigm(float x) { return 1.0f / (1.0f + std::exp(-x)); }

// a=0 -> {b=1, c=2}, b -> {d=3, e=4}
Ast five() {
  return testing::make_tree({{0, {1, 2}}, {1, {3, 4}}},
                            {{0, SC::method_declaration}, {1, SC::variable_declaration}, {2, SC::return_statement},
                             {3, SC::variable_use}, {4, SC::operator_}});
}

}  // namespace

TEST_CASE("tables have the documented shapes and init range") {
  Tables t = seeded_tables(1, 32);
  CHECK(t.E.value.rows() == kNumCategories);
  CHECK(t.H.value.rows() == kMaxHeight + 1);
  CHECK(t.P.value.rows() == kMaxOrdinal);
  CHECK(t.CLS.value.cols() == 32);
  for (auto* p : {&t.E, &t.H, &t.P, &t.CLS})
    for (float v : p->value.data) CHECK(std::abs(v) <= 0.05f);
  CHECK(t.E.name == "embed.E");
  CHECK(t.P.name == "embed.P");
}

TEST_CASE("fuse without switches is E + H exactly; CLS row is CLS + H[0]") {
  Tables t = seeded_tables(2);
  Ast a = five();
  auto seq = bfs_serialize(a);
  auto out = fuse_values(seq, {}, t, FusionConfig{});
  REQUIRE(out.rows() == seq.size() + 1);
  for (std::size_t j = 0; j < 8; ++j) CHECK(out.at(0, j) == t.CLS.value.at(0, j) + t.H.value.at(0, j));
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto c = static_cast<std::size_t>(category_id(seq.categories[i]));
    const auto h = static_cast<std::size_t>(seq.heights[i]);
    for (std::size_t j = 0; j < 8; ++j) CHECK(out.at(i + 1, j) == t.E.value.at(c, j) + t.H.value.at(h, j));
  }
  FuseOptions<float> no_cls;
  no_cls.prepend_cls = false;
  CHECK(fuse_values(seq, {}, t, FusionConfig{}, no_cls).rows() == seq.size());
}

TEST_CASE("single switch a -> e follows the closed form") {
  Tables t = seeded_tables(3);
  Ast a = five();
  auto seq = bfs_serialize(a);
  auto out = fuse_values(seq, {{1, 0, 4}}, t, FusionConfig{});
  const std::size_t ia = *seq.index_of(0) + 1, ie = *seq.index_of(4) + 1;
  const auto ca = static_cast<std::size_t>(category_id(SC::method_declaration));
  const auto ce = static_cast<std::size_t>(category_id(SC::operator_));
  const auto ha = static_cast<std::size_t>(a.node(0).height);
  const auto he = static_cast<std::size_t>(a.node(4).height);
  for (std::size_t j = 0; j < 8; ++j) {
    const float p = t.P.value.at(0, j);
    CHECK(out.at(ia, j) == doctest::Approx(t.E.value.at(ca, j) * (1 + relu(p)) + t.H.value.at(ha, j)).epsilon(1e-6));
    CHECK(out.at(ie, j) == doctest::Approx(t.E.value.at(ce, j) + t.H.value.at(he, j) * (1 + relu(p))).epsilon(1e-6));
  }
  // untouched rows stay E + H
  const std::size_t ib = *seq.index_of(1) + 1;
  const auto cb = static_cast<std::size_t>(category_id(SC::variable_declaration));
  for (std::size_t j = 0; j < 8; ++j)
    CHECK(out.at(ib, j) == t.E.value.at(cb, j) + t.H.value.at(static_cast<std::size_t>(a.node(1).height), j));
}

TEST_CASE("zero P matches the no-switch output") {
  Tables t = seeded_tables(4);
  std::fill(t.P.value.data.begin(), t.P.value.data.end(), 0.0f);
  auto seq = bfs_serialize(five());
  CHECK(fuse_values(seq, {{1, 0, 4}, {2, 4, 2}, {3, 2, 0}}, t, FusionConfig{}) == fuse_values(seq, {}, t, FusionConfig{}));
}

TEST_CASE("unknown endpoint and bad ordinal are rejected") {
  Tables t = seeded_tables(5);
  auto seq = bfs_serialize(five());
  CHECK_THROWS_AS(fuse_values(seq, {{1, 0, 77}}, t, FusionConfig{}), UnknownEndpoint);
  CHECK_THROWS_AS(t.ordinal_row(0), ValidationError);
}

TEST_CASE("switch_aggregate sums and clamps") {
  Tables t = seeded_tables(6);
  std::vector<AttentionSwitch> sw{{1, 0, 4}, {2, 4, 0}, {3, 0, 2}};
  const NodeId nodes[] = {0, 1, 2, 3, 4};
  auto out = switch_aggregate(sw, SwitchDirection::outgoing, t, nodes);
  for (std::size_t j = 0; j < 8; ++j) {
    CHECK(out[0][j] == t.P.value.at(0, j) + t.P.value.at(2, j));
    CHECK(out[1][j] == 0.0f);
    CHECK(out[4][j] == t.P.value.at(1, j));
  }
  auto in = switch_aggregate(sw, SwitchDirection::incoming, t, nodes);
  for (std::size_t j = 0; j < 8; ++j) CHECK(in[3][j] == 0.0f);
  CHECK(t.ordinal_row(10000) == 511);
  CHECK(t.ordinal_row(512) == 511);
  CHECK(t.ordinal_row(1) == 0);
  auto far = switch_aggregate<float>({{10000, 1, 3}}, SwitchDirection::outgoing, t);
  for (std::size_t j = 0; j < 8; ++j) CHECK(far[1][j] == t.P.value.at(511, j));
}

TEST_CASE("ablations change exactly one part of the formula") {
  CHECK(ablate(Ablation::none) == FusionConfig{});
  CHECK(ablate(Ablation::sigmoid_activation).activation == Activation::sigmoid);
  CHECK(ablate(Ablation::no_plus_one).keep_plus_one == false);
  CHECK(ablate(Ablation::no_height).use_height == false);
  CHECK(ablation_from_name(ablation_name(Ablation::no_height)) == Ablation::no_height);

  Tables t = seeded_tables(7);
  Ast a = five();
  auto seq = bfs_serialize(a);
  std::vector<AttentionSwitch> sw{{1, 0, 4}};
  const std::size_t ia = *seq.index_of(0) + 1, ie = *seq.index_of(4) + 1;
  const auto ca = static_cast<std::size_t>(category_id(SC::method_declaration));
  const auto ce = static_cast<std::size_t>(category_id(SC::operator_));
  const auto ha = static_cast<std::size_t>(a.node(0).height);
  const auto he = static_cast<std::size_t>(a.node(4).height);

  auto sig = fuse_values(seq, sw, t, ablate(Ablation::sigmoid_activation));
  auto nop = fuse_values(seq, sw, t, ablate(Ablation::no_plus_one));
  auto noh = fuse_values(seq, sw, t, ablate(Ablation::no_height));
  for (std::size_t j = 0; j < 8; ++j) {
    const float p = t.P.value.at(0, j);
    const float Ea = t.E.value.at(ca, j), Ha = t.H.value.at(ha, j);
    const float Ee = t.E.value.at(ce, j), He = t.H.value.at(he, j);
    CHECK(sig.at(ia, j) == doctest::Approx(Ea * (1 + sigm(p)) + Ha * (1 + sigm(0))).epsilon(1e-6));
    CHECK(sig.at(ie, j) == doctest::Approx(Ee * (1 + sigm(0)) + He * (1 + sigm(p))).epsilon(1e-6));
    CHECK(nop.at(ia, j) == doctest::Approx(Ea * relu(p)).epsilon(1e-6));
    CHECK(nop.at(ie, j) == doctest::Approx(He * relu(p)).epsilon(1e-6));
    CHECK(noh.at(ia, j) == doctest::Approx(Ea * (1 + relu(p))).epsilon(1e-6));
    CHECK(noh.at(ie, j) == Ee);
    CHECK(noh.at(0, j) == t.CLS.value.at(0, j));
  }
}

TEST_CASE("perturbation: identity, full drop, noise statistics") {
  nn::Tensor<float> rows(100, 100);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(-1, 1);
  for (auto& v : rows.data) v = u(rng);
  CHECK(perturb_semantic(rows, 0, 0, 5) == rows);

  auto dropped = perturb_semantic(rows, 1, 0, 5);
  for (float v : dropped.data) CHECK(v == 0.0f);

  nn::Tensor<float> zeros(100, 100);
  auto noisy = perturb_semantic(zeros, 0, 0.5, 11);
  double mean = 0, sq = 0;
  for (float v : noisy.data) mean += v;
  mean /= noisy.size();
  for (float v : noisy.data) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / (noisy.size() - 1));
  CHECK(std::abs(mean) <= 3 * 0.5 / std::sqrt(10000.0));
  CHECK(std::abs(sd - 0.5) <= 0.05 * 0.5);
  CHECK(perturb_semantic(rows, 0.3, 0.2, 9) == perturb_semantic(rows, 0.3, 0.2, 9));

  // Full drop through fusion leaves only the height side; CLS is exempt.
  Tables t = seeded_tables(8);
  auto seq = bfs_serialize(five());
  auto p = make_semantic_perturbation<float>(seq.size(), 8, 1.0, 0.0, 3);
  FuseOptions<float> fo;
  fo.perturb = &p;
  auto out = fuse_values(seq, {}, t, FusionConfig{}, fo);
  for (std::size_t j = 0; j < 8; ++j) CHECK(out.at(0, j) == t.CLS.value.at(0, j) + t.H.value.at(0, j));
  for (std::size_t i = 0; i < seq.size(); ++i)
    for (std::size_t j = 0; j < 8; ++j)
      CHECK(out.at(i + 1, j) == t.H.value.at(static_cast<std::size_t>(seq.heights[i]), j));
  CHECK_THROWS_AS(make_semantic_perturbation<float>(3, 8, 1.5, 0, 0), ConfigError);
  CHECK_THROWS_AS(make_semantic_perturbation<float>(3, 8, 0, -1, 0), ConfigError);
}

TEST_CASE("property: src and dst of a switch share P[k]") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    Tables t = seeded_tables(trial);
    std::fill(t.E.value.data.begin(), t.E.value.data.end(), 1.0f);
    std::fill(t.H.value.data.begin(), t.H.value.data.end(), 1.0f);
    Ast a = testing::random_tree(rng, 12);
    auto seq = bfs_serialize(a);
    std::uniform_int_distribution<std::size_t> pick(0, seq.size() - 1);
    std::uniform_int_distribution<int> ord(1, 600);
    std::size_t s = pick(rng), d = pick(rng);
    while (d == s) d = pick(rng);
    const int k = ord(rng);
    auto out = fuse_values(seq, {{k, seq.node_ids[s], seq.node_ids[d]}}, t, FusionConfig{});
    const std::size_t row = t.ordinal_row(k);
    for (std::size_t j = 0; j < 8; ++j) {
      const float share = relu(t.P.value.at(row, j));
      CHECK(out.at(s + 1, j) - 2.0f == doctest::Approx(share));
      CHECK(out.at(d + 1, j) - 2.0f == doctest::Approx(share));
    }
  }
}

TEST_CASE("property: fusion is consistent under permutation and remapping") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    Tables t = seeded_tables(trial + 100);
    Ast a = testing::random_tree(rng, 20);
    auto sw = synthesize_gaze(a, GazeMode::markov, rng(), 10);
    Ast p = permute_ast(a, rng());
    auto s0 = bfs_serialize(a);
    auto s1 = bfs_serialize(p);
    auto f0 = fuse_values(s0, sw, t, FusionConfig{});
    auto f1 = fuse_values(s1, remap_switches(sw, p), t, FusionConfig{});
    for (std::size_t i = 0; i < s0.size(); ++i) {
      const std::size_t j = *s1.index_of(s0.node_ids[i]);
      for (std::size_t c = 0; c < 8; ++c) CHECK(f0.at(i + 1, c) == f1.at(j + 1, c));
    }
  }
}

TEST_CASE("gradient reaches P[k] for ordinals in use") {
  Tables t = seeded_tables(31);
  std::fill(t.P.value.data.begin(), t.P.value.data.end(), 0.02f);
  auto seq = bfs_serialize(five());
  nn::Tape<float> tape;
  auto out = fuse(tape, seq, {{1, 0, 4}, {3, 4, 2}}, t, FusionConfig{});
  tape.backward(nn::sum(tape, out));
  auto row_norm = [&](std::size_t r) {
    double s = 0;
    for (std::size_t j = 0; j < 8; ++j) s += std::abs(t.P.grad.at(r, j));
    return s;
  };
  CHECK(row_norm(0) > 0);
  CHECK(row_norm(2) > 0);
  CHECK(row_norm(1) == 0);
  // E and H gradients exist too
  double e = 0;
  for (float g : t.E.grad.data) e += std::abs(g);
  CHECK(e > 0);
}
