#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "eyetrans/ast.hpp"
#include "eyetrans/attention_switch.hpp"
#include "eyetrans/autograd.hpp"
#include "eyetrans/errors.hpp"
#include "eyetrans/layers.hpp"

namespace eyetrans {

enum class Activation { relu, sigmoid };

// Defaults reproduce E*(1+relu(out)) + H*(1+relu(in)).
struct FusionConfig {
  Activation activation = Activation::relu;
  bool keep_plus_one = true;
  bool use_height = true;

  bool operator==(const FusionConfig&) const = default;
};

enum class Ablation { none, sigmoid_activation, no_plus_one, no_height };

std::string_view ablation_name(Ablation a);
Ablation ablation_from_name(std::string_view name);
// The default configuration with exactly one ablation applied.
FusionConfig ablate(Ablation a);

inline constexpr int kDefaultWidth = 32;
inline constexpr int kMaxOrdinal = 512;

// A switch with endpoints as positions in the BFS token sequence.
struct IndexedSwitch {
  int ordinal = 1;
  std::size_t src = 0;
  std::size_t dst = 0;

  bool operator==(const IndexedSwitch&) const = default;
};

// Throws UnknownEndpoint if an endpoint is not in the sequence.
std::vector<IndexedSwitch> index_switches(const TokenSequence& tokens, const std::vector<AttentionSwitch>& switches);

template <typename T>
struct EmbeddingTables {
  int width = kDefaultWidth;
  int max_height = kMaxHeight;
  int max_ordinal = kMaxOrdinal;
  nn::Parameter<T> E;    // category -> vector
  nn::Parameter<T> H;    // height 0..max_height -> vector
  nn::Parameter<T> P;    // switch ordinal 1..max_ordinal -> vector (row k-1)
  nn::Parameter<T> CLS;  // classification token

  explicit EmbeddingTables(int w = kDefaultWidth, int heights = kMaxHeight, int ordinals = kMaxOrdinal)
      : width(w),
        max_height(heights),
        max_ordinal(ordinals),
        E("embed.E", kNumCategories, static_cast<std::size_t>(w)),
        H("embed.H", static_cast<std::size_t>(heights) + 1, static_cast<std::size_t>(w)),
        P("embed.P", static_cast<std::size_t>(ordinals), static_cast<std::size_t>(w)),
        CLS("embed.CLS", 1, static_cast<std::size_t>(w)) {}

  // Uniform in [-0.05, 0.05].
  void init(std::mt19937_64& rng) {
    for (auto* p : {&E, &H, &P, &CLS}) nn::init_uniform(*p, T(0.05), rng);
  }

  // Ordinals past max_ordinal share the last row.
  std::size_t ordinal_row(int ordinal) const {
    if (ordinal < 1) throw ValidationError("switch ordinals start at 1");
    return static_cast<std::size_t>(std::min(ordinal, max_ordinal) - 1);
  }
  void collect(nn::ParamList<T>& out) {
    out.push_back(&E);
    out.push_back(&H);
    out.push_back(&P);
    out.push_back(&CLS);
  }
};

// Token-level dropout and additive Gaussian noise on semantic rows.
template <typename T>
struct SemanticPerturbation {
  std::vector<T> keep;  // 0 drops the row
  nn::Tensor<T> noise;  // same shape as the semantic rows
};

template <typename T>
SemanticPerturbation<T> make_semantic_perturbation(std::size_t rows, std::size_t width, double drop_rate,
                                                   double noise_sigma, std::uint64_t seed) {
  if (drop_rate < 0 || drop_rate > 1) throw ConfigError("dropout rate must lie in [0,1]");
  if (noise_sigma < 0) throw ConfigError("noise level must be >= 0");
  SemanticPerturbation<T> p;
  p.keep.assign(rows, T(1));
  p.noise = nn::Tensor<T>(rows, width);
  std::mt19937_64 rng(seed);
  if (drop_rate > 0) {
    std::bernoulli_distribution drop(drop_rate);
    for (auto& k : p.keep) k = drop(rng) ? T(0) : T(1);
  }
  if (noise_sigma > 0) {
    std::normal_distribution<double> gauss(0.0, noise_sigma);
    for (auto& v : p.noise.data) v = static_cast<T>(gauss(rng));
  }
  return p;
}

// Pure version used for inspection: dropped rows become zero, then noise is
// added to every row.
template <typename T>
nn::Tensor<T> perturb_semantic(const nn::Tensor<T>& rows, double drop_rate, double noise_sigma, std::uint64_t seed) {
  auto p = make_semantic_perturbation<T>(rows.rows(), rows.cols(), drop_rate, noise_sigma, seed);
  nn::Tensor<T> out = rows;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out.at(i, j) = out.at(i, j) * p.keep[i] + p.noise.at(i, j);
  return out;
}

template <typename T>
struct FuseOptions {
  bool prepend_cls = true;
  const SemanticPerturbation<T>* perturb = nullptr;
};

namespace detail {

template <typename T>
nn::Var activate(nn::Tape<T>& t, nn::Var x, Activation a) {
  return a == Activation::relu ? nn::relu(t, x) : nn::sigmoid(t, x);
}

}  // namespace detail

// Per token: E[cat] * (1 + phi(sum of P[k] leaving it)) + H[height] * (1 +
// phi(sum of P[k] arriving at it)). With prepend_cls, row 0 is CLS + H[0].
template <typename T>
nn::Var fuse_indexed(nn::Tape<T>& t, std::span<const int> categories, std::span<const int> heights,
                     std::span<const IndexedSwitch> switches, EmbeddingTables<T>& tables, const FusionConfig& cfg,
                     FuseOptions<T> opts = {}) {
  const std::size_t n = categories.size();
  if (heights.size() != n) throw ShapeMismatch("fuse: categories and heights differ in length");
  if (n == 0) throw ShapeMismatch("fuse: empty token sequence");
  const std::size_t d = static_cast<std::size_t>(tables.width);
  std::vector<std::size_t> cat_idx(n), height_idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (categories[i] < 0 || categories[i] >= kNumCategories) throw ValidationError("fuse: category id out of range");
    if (heights[i] < 0 || heights[i] > tables.max_height) throw ValidationError("fuse: height out of range");
    cat_idx[i] = static_cast<std::size_t>(categories[i]);
    height_idx[i] = static_cast<std::size_t>(heights[i]);
  }

  nn::Var e = nn::gather_rows(t, t.param(tables.E), std::move(cat_idx));
  if (opts.perturb) {
    const auto& p = *opts.perturb;
    if (p.keep.size() != n || p.noise.rows() != n || p.noise.cols() != d) {
      throw ShapeMismatch("fuse: perturbation shape");
    }
    nn::Tensor<T> mask(n, d);
    for (std::size_t i = 0; i < n; ++i) std::fill_n(mask.row(i), d, p.keep[i]);
    e = nn::add(t, nn::mul(t, e, t.constant(std::move(mask))), t.constant(p.noise));
  }

  std::vector<std::size_t> ord_rows, srcs, dsts;
  for (const IndexedSwitch& s : switches) {
    if (s.src >= n || s.dst >= n) throw UnknownEndpoint("fuse: switch endpoint outside the sequence");
    ord_rows.push_back(tables.ordinal_row(s.ordinal));
    srcs.push_back(s.src);
    dsts.push_back(s.dst);
  }
  nn::Var out_sum, in_sum;
  if (switches.empty()) {
    out_sum = t.constant(nn::Tensor<T>(n, d));
    in_sum = t.constant(nn::Tensor<T>(n, d));
  } else {
    nn::Var p = nn::gather_rows(t, t.param(tables.P), std::move(ord_rows));
    out_sum = nn::scatter_add_rows(t, p, std::move(srcs), n);
    in_sum = nn::scatter_add_rows(t, p, std::move(dsts), n);
  }
  nn::Var out_factor = detail::activate(t, out_sum, cfg.activation);
  if (cfg.keep_plus_one) out_factor = nn::add_scalar(t, out_factor, T(1));
  nn::Var rows = nn::mul(t, e, out_factor);
  if (cfg.use_height) {
    nn::Var h = nn::gather_rows(t, t.param(tables.H), std::move(height_idx));
    nn::Var in_factor = detail::activate(t, in_sum, cfg.activation);
    if (cfg.keep_plus_one) in_factor = nn::add_scalar(t, in_factor, T(1));
    rows = nn::add(t, rows, nn::mul(t, h, in_factor));
  }
  if (!opts.prepend_cls) return rows;
  nn::Var cls = t.param(tables.CLS);
  if (cfg.use_height) cls = nn::add(t, cls, nn::gather_rows(t, t.param(tables.H), {0}));
  return nn::concat_rows(t, cls, rows);
}

template <typename T>
nn::Var fuse(nn::Tape<T>& t, const TokenSequence& tokens, const std::vector<AttentionSwitch>& switches,
             EmbeddingTables<T>& tables, const FusionConfig& cfg, FuseOptions<T> opts = {}) {
  std::vector<int> cats, heights;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    cats.push_back(category_id(tokens.categories[i]));
    heights.push_back(tokens.heights[i]);
  }
  auto indexed = index_switches(tokens, switches);
  return fuse_indexed<T>(t, cats, heights, indexed, tables, cfg, opts);
}

// Evaluates the fusion without keeping the tape.
template <typename T>
nn::Tensor<T> fuse_values(const TokenSequence& tokens, const std::vector<AttentionSwitch>& switches,
                          EmbeddingTables<T>& tables, const FusionConfig& cfg, FuseOptions<T> opts = {}) {
  nn::Tape<T> t;
  return t.value(fuse(t, tokens, switches, tables, cfg, opts));
}

enum class SwitchDirection { outgoing, incoming };

// Per-node sum of P[k] over switches leaving (outgoing) or reaching
// (incoming) the node. Nodes without matching switches map to zeros.
template <typename T>
std::map<NodeId, std::vector<T>> switch_aggregate(const std::vector<AttentionSwitch>& switches,
                                                  SwitchDirection direction, const EmbeddingTables<T>& tables,
                                                  std::span<const NodeId> nodes = {}) {
  const std::size_t d = static_cast<std::size_t>(tables.width);
  std::map<NodeId, std::vector<T>> out;
  for (NodeId id : nodes) out.emplace(id, std::vector<T>(d, T(0)));
  for (const AttentionSwitch& s : switches) {
    const NodeId key = direction == SwitchDirection::outgoing ? s.src : s.dst;
    auto& acc = out.try_emplace(key, std::vector<T>(d, T(0))).first->second;
    const T* row = tables.P.value.row(tables.ordinal_row(s.ordinal));
    for (std::size_t j = 0; j < d; ++j) acc[j] += row[j];
  }
  return out;
}

}  // namespace eyetrans
