#include "eyetrans/planted.hpp"

#include <algorithm>
#include <map>
#include <random>

#include "eyetrans/augment.hpp"

namespace eyetrans {

namespace {

struct Shape {
  std::vector<std::vector<int>> children;  // node index -> child indices
  std::vector<int> depth;
};

// Root with 2-3 children; each of those has 1-3 children; some grandchildren
// get one leaf. Guarantees at least two nodes at depths 1 and 2 and one at
// depth 3.
Shape random_shape(std::mt19937_64& rng) {
  Shape s;
  auto add = [&](int parent) {
    const int id = static_cast<int>(s.children.size());
    s.children.emplace_back();
    s.depth.push_back(parent < 0 ? 0 : s.depth[static_cast<std::size_t>(parent)] + 1);
    if (parent >= 0) s.children[static_cast<std::size_t>(parent)].push_back(id);
    return id;
  };
  std::uniform_int_distribution<int> two_three(2, 3), one_three(1, 3);
  std::bernoulli_distribution leaf(0.35);
  const int root = add(-1);
  const int n1 = two_three(rng);
  std::vector<int> level1, level2;
  for (int i = 0; i < n1; ++i) level1.push_back(add(root));
  for (int p : level1) {
    const int k = one_three(rng);
    for (int i = 0; i < k; ++i) level2.push_back(add(p));
  }
  if (level2.size() < 2) level2.push_back(add(level1.front()));
  bool deep = false;
  for (int p : level2) {
    if (leaf(rng)) {
      add(p);
      deep = true;
    }
  }
  if (!deep) add(level2.back());
  return s;
}

}  // namespace

PlantedTask make_planted_task(const PlantedTaskConfig& cfg) {
  if (cfg.n_asts < 1 || cfg.n_templates < 1) throw ConfigError("planted task needs asts and templates");
  if (cfg.class_heights.empty() || cfg.class_heights.size() != cfg.class_weights.size()) {
    throw ConfigError("planted task: class_heights and class_weights differ in length");
  }
  if (cfg.n_fixations < 2) throw ConfigError("planted task needs at least one switch");
  for (auto [a, b] : cfg.class_heights) {
    if (a < 0 || a > 3 || b < 0 || b > 3 || (a == 0 && b == 0)) {
      throw ConfigError("planted task heights must lie in 0..3 and name two distinct nodes");
    }
  }

  std::mt19937_64 rng(mix_seed(cfg.seed, 0x504c));
  std::vector<Shape> templates;
  for (int i = 0; i < cfg.n_templates; ++i) templates.push_back(random_shape(rng));

  PlantedTask task;
  task.n_classes = static_cast<int>(cfg.class_heights.size());
  std::uniform_int_distribution<std::size_t> pick_template(0, templates.size() - 1);
  std::discrete_distribution<int> pick_class(cfg.class_weights.begin(), cfg.class_weights.end());

  std::vector<DatasetRow> rows;
  for (int i = 0; i < cfg.n_asts; ++i) {
    const Shape& s = templates[pick_template(rng)];
    const int label = pick_class(rng);
    std::vector<AstNode> nodes;
    for (std::size_t k = 0; k < s.children.size(); ++k) {
      nodes.push_back({static_cast<NodeId>(k), cfg.category, s.children[k], 0});
    }
    Ast ast("planted" + std::to_string(i), 0, std::move(nodes), label);

    std::map<int, std::vector<NodeId>> at_depth;
    for (std::size_t k = 0; k < s.depth.size(); ++k) at_depth[s.depth[k]].push_back(static_cast<NodeId>(k));
    const auto [hs, hd] = cfg.class_heights[static_cast<std::size_t>(label)];
    std::vector<NodeId> srcs = at_depth[hs];
    if (at_depth[hd].size() == 1) std::erase(srcs, at_depth[hd].front());
    std::uniform_int_distribution<std::size_t> ps(0, srcs.size() - 1);
    const NodeId src = srcs[ps(rng)];
    std::vector<NodeId> dsts;
    for (NodeId d : at_depth[hd])
      if (d != src) dsts.push_back(d);
    std::uniform_int_distribution<std::size_t> pd(0, dsts.size() - 1);
    const NodeId dst = dsts[pd(rng)];

    auto sw = synthesize_gaze(ast, GazeMode::planted, mix_seed(cfg.seed, static_cast<std::uint64_t>(i)),
                              cfg.n_fixations, PlantedEdge{src, dst});
    rows.push_back(make_row(ast.method_id(), ast, sw, TierFlags{true, true, true}));
    task.asts.push_back(std::move(ast));
    task.switches.push_back(std::move(sw));
  }
  task.split = split_rows(rows, cfg.train_fraction, cfg.split_seed);
  std::vector<int> counts(static_cast<std::size_t>(task.n_classes), 0);
  for (const auto& r : task.split.test) ++counts[static_cast<std::size_t>(*r.label_class)];
  if (!task.split.test.empty()) {
    task.majority_rate = static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
                         static_cast<double>(task.split.test.size());
  }
  return task;
}

}  // namespace eyetrans
