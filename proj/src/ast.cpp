#include "eyetrans/ast.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "eyetrans/errors.hpp"

namespace eyetrans {

std::string_view category_name(SemanticCategory c) {
  return kCategoryNames.at(static_cast<std::size_t>(c));
}

std::optional<SemanticCategory> category_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == name) return static_cast<SemanticCategory>(i);
  }
  return std::nullopt;
}

std::optional<SemanticCategory> category_from_id(int id) {
  if (id < 0 || id >= kNumCategories) return std::nullopt;
  return static_cast<SemanticCategory>(id);
}

int category_rank(SemanticCategory c) {
  auto it = std::find(kCategoryPriority.begin(), kCategoryPriority.end(), c);
  return static_cast<int>(it - kCategoryPriority.begin());
}

Ast::Ast(std::string method_id, NodeId root, std::vector<AstNode> nodes,
         std::optional<int> label_class, std::vector<std::string> summary)
    : method_id_(std::move(method_id)),
      root_(root),
      label_class_(label_class),
      summary_(std::move(summary)) {
  if (nodes.empty()) throw ValidationError("empty tree: no nodes");
  if (static_cast<int>(nodes.size()) > kMaxTokens) {
    throw TooLarge("size cap: " + std::to_string(nodes.size()) + " nodes exceeds " +
                   std::to_string(kMaxTokens));
  }
  for (auto& n : nodes) {
    if (n.id < 0) throw ValidationError("negative node id " + std::to_string(n.id));
    if (category_id(n.category) < 0 || category_id(n.category) >= kNumCategories) {
      throw ValidationError("unknown category on node " + std::to_string(n.id));
    }
    NodeId id = n.id;
    if (!nodes_.emplace(id, std::move(n)).second) {
      throw ValidationError("duplicate node id " + std::to_string(id));
    }
  }
  if (!contains(root_)) throw ValidationError("root " + std::to_string(root_) + " not among nodes");

  for (const auto& [id, n] : nodes_) {
    for (NodeId c : n.children) {
      if (!contains(c)) {
        throw ValidationError("missing child " + std::to_string(c) + " of node " + std::to_string(id));
      }
    }
  }

  // Depth-first walk from the root; revisiting a node on the current path is
  // a cycle, revisiting one elsewhere means it has two parents.
  std::set<NodeId> visited;
  std::set<NodeId> on_path;
  struct Frame {
    NodeId id;
    std::size_t next_child;
  };
  std::vector<Frame> stack{{root_, 0}};
  nodes_.at(root_).height = 0;
  visited.insert(root_);
  on_path.insert(root_);
  while (!stack.empty()) {
    Frame& f = stack.back();
    AstNode& n = nodes_.at(f.id);
    if (f.next_child == n.children.size()) {
      on_path.erase(f.id);
      stack.pop_back();
      continue;
    }
    NodeId c = n.children[f.next_child++];
    if (on_path.count(c)) {
      throw ValidationError("cycle through node " + std::to_string(c));
    }
    if (visited.count(c)) {
      throw ValidationError("node " + std::to_string(c) + " has multiple parents");
    }
    AstNode& child = nodes_.at(c);
    child.height = n.height + 1;
    if (child.height > kMaxHeight) {
      throw TooLarge("height cap: node " + std::to_string(c) + " at depth " +
                     std::to_string(child.height) + " exceeds " + std::to_string(kMaxHeight));
    }
    parents_[c] = f.id;
    visited.insert(c);
    on_path.insert(c);
    stack.push_back({c, 0});
  }
  if (visited.size() != nodes_.size()) {
    for (const auto& [id, n] : nodes_) {
      if (!visited.count(id)) {
        throw ValidationError("orphan node " + std::to_string(id) + " unreachable from root");
      }
    }
  }
}

const AstNode& Ast::node(NodeId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw ValidationError("no node " + std::to_string(id));
  return it->second;
}

std::optional<NodeId> Ast::parent(NodeId id) const {
  auto it = parents_.find(id);
  if (it == parents_.end()) return std::nullopt;
  return it->second;
}

Ast Ast::with_child_orders(const std::map<NodeId, std::vector<NodeId>>& orders) const {
  std::vector<AstNode> nodes;
  nodes.reserve(nodes_.size());
  for (const auto& [id, n] : nodes_) {
    AstNode copy = n;
    if (auto it = orders.find(id); it != orders.end()) copy.children = it->second;
    nodes.push_back(std::move(copy));
  }
  return Ast(method_id_, root_, std::move(nodes), label_class_, summary_);
}

Ast Ast::with_label(std::optional<int> label_class) const {
  Ast copy = *this;
  copy.label_class_ = label_class;
  return copy;
}

bool Ast::operator==(const Ast& other) const {
  return method_id_ == other.method_id_ && root_ == other.root_ && nodes_ == other.nodes_ &&
         label_class_ == other.label_class_ && summary_ == other.summary_;
}

std::optional<std::size_t> TokenSequence::index_of(NodeId id) const {
  auto it = std::find(node_ids.begin(), node_ids.end(), id);
  if (it == node_ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - node_ids.begin());
}

TokenSequence bfs_serialize(const Ast& ast) {
  TokenSequence seq;
  seq.node_ids.reserve(ast.size());
  std::deque<NodeId> queue{ast.root()};
  while (!queue.empty()) {
    NodeId id = queue.front();
    queue.pop_front();
    const AstNode& n = ast.node(id);
    seq.node_ids.push_back(id);
    seq.categories.push_back(n.category);
    seq.heights.push_back(n.height);
    for (NodeId c : n.children) queue.push_back(c);
  }
  return seq;
}

}  // namespace eyetrans
