#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "eyetrans/dataset.hpp"

namespace eyetrans {

// Synthetic classification task whose label is decodable only from the
// endpoints of switch 1. Every token has the same category and tree shapes
// are drawn independently of the label from a small template pool, so a
// model without switches sees nothing that predicts the class.
struct PlantedTaskConfig {
  int n_asts = 500;
  int n_templates = 8;
  // Class c plants switch 1 from a node at height class_heights[c].first to
  // one at class_heights[c].second (depths 0..3).
  std::vector<std::pair<int, int>> class_heights{{0, 1}, {0, 2}, {0, 3}};
  std::vector<double> class_weights{0.5, 0.25, 0.25};
  int n_fixations = 4;  // switches per sample = n_fixations - 1
  SemanticCategory category = SemanticCategory::variable_use;
  std::uint64_t seed = 7;
  double train_fraction = 0.8;
  std::uint64_t split_seed = kSplitSeed;
};

struct PlantedTask {
  std::vector<Ast> asts;  // label_class set
  std::vector<std::vector<AttentionSwitch>> switches;
  Split split;
  int n_classes = 0;
  double majority_rate = 0;  // test-split share of the most frequent class
};

PlantedTask make_planted_task(const PlantedTaskConfig& cfg = {});

}  // namespace eyetrans
