#pragma once

#include <map>
#include <random>
#include <vector>

#include "eyetrans/ast.hpp"

namespace testing {

using eyetrans::Ast;
using eyetrans::AstNode;
using eyetrans::NodeId;
using eyetrans::SemanticCategory;

// Categories default to `other` for ids not listed.
inline Ast make_tree(const std::map<NodeId, std::vector<NodeId>>& children,
                     const std::map<NodeId, SemanticCategory>& cats = {}, NodeId root = 0,
                     std::optional<int> label = std::nullopt) {
  std::map<NodeId, AstNode> nodes;
  auto touch = [&](NodeId id) {
    auto& n = nodes[id];
    n.id = id;
    auto it = cats.find(id);
    n.category = it == cats.end() ? SemanticCategory::other : it->second;
  };
  for (const auto& [id, kids] : children) {
    touch(id);
    nodes[id].children = kids;
    for (NodeId k : kids) touch(k);
  }
  std::vector<AstNode> list;
  for (auto& [_, n] : nodes) list.push_back(n);
  return Ast("t", root, std::move(list), label);
}

// Random rooted tree with n nodes; ids are shuffled so they carry no order.
inline Ast random_tree(std::mt19937_64& rng, int n, int max_children = 4) {
  std::vector<NodeId> ids(n);
  for (int i = 0; i < n; ++i) ids[i] = i * 3 + 1;
  std::shuffle(ids.begin(), ids.end(), rng);
  std::map<NodeId, std::vector<NodeId>> kids;
  std::map<NodeId, SemanticCategory> cats;
  std::uniform_int_distribution<int> cat(0, eyetrans::kNumCategories - 1);
  kids[ids[0]];
  for (int i = 0; i < n; ++i) cats[ids[i]] = static_cast<SemanticCategory>(cat(rng));
  for (int i = 1; i < n; ++i) {
    for (int tries = 0;; ++tries) {
      std::uniform_int_distribution<int> parent(std::max(0, i - 6), i - 1);
      NodeId p = ids[parent(rng)];
      if (static_cast<int>(kids[p].size()) < max_children || tries > 20) {
        kids[p].push_back(ids[i]);
        kids[ids[i]];
        break;
      }
    }
  }
  return make_tree(kids, cats, ids[0]);
}

}  // namespace testing

#include <fstream>

#include "eyetrans/dataset.hpp"
#include "eyetrans/java_parser.hpp"
#include "json.hpp"

namespace testing {

// The bundled Java corpus as labelled, summarized ASTs.
inline std::vector<Ast> micro_corpus() {
  std::ifstream in(std::string(EYETRANS_SOURCE_DIR) + "/data/micro_corpus.json");
  auto doc = nlohmann::json::parse(in);
  std::vector<Ast> out;
  for (const auto& e : doc) {
    Ast a = eyetrans::parse_java_method(e.at("source").get<std::string>()).ast;
    std::vector<AstNode> nodes;
    for (const auto& [_, n] : a.nodes()) nodes.push_back(n);
    out.emplace_back(e.at("id").get<std::string>(), a.root(), std::move(nodes), e.at("label").get<int>(),
                     eyetrans::tokenize_summary(e.at("summary").get<std::string>()));
  }
  return out;
}

}  // namespace testing
