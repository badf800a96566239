#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eyetrans {

inline constexpr int kMaxTokens = 200;
inline constexpr int kMaxHeight = 50;

enum class SemanticCategory : std::uint8_t {
  method_declaration,
  variable_declaration,
  conditional_statement,
  conditional_block,
  loop_statement,
  loop_body,
  return_statement,
  method_call,
  argument,
  parameter,
  operator_,
  literal_placeholder,
  variable_use,
  type_reference,
  assignment,
  field_access,
  array_access,
  block_delimiter,
  other,
};

inline constexpr int kNumCategories = 19;

// Canonical snake_case labels indexed by category id.
inline constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {
    "method_declaration", "variable_declaration", "conditional_statement",
    "conditional_block",  "loop_statement",       "loop_body",
    "return_statement",   "method_call",          "argument",
    "parameter",          "operator",             "literal_placeholder",
    "variable_use",       "type_reference",       "assignment",
    "field_access",       "array_access",         "block_delimiter",
    "other",
};

// Resolution order when several roles apply to one token, highest first.
// Declarations, then control flow, then statements, then call/argument,
// then operator, then leaf roles.
inline constexpr std::array<SemanticCategory, kNumCategories> kCategoryPriority = {
    SemanticCategory::method_declaration,  SemanticCategory::variable_declaration,
    SemanticCategory::parameter,           SemanticCategory::conditional_statement,
    SemanticCategory::conditional_block,   SemanticCategory::loop_statement,
    SemanticCategory::loop_body,           SemanticCategory::return_statement,
    SemanticCategory::assignment,          SemanticCategory::literal_placeholder,
    SemanticCategory::method_call,         SemanticCategory::argument,
    SemanticCategory::field_access,        SemanticCategory::array_access,
    SemanticCategory::operator_,           SemanticCategory::type_reference,
    SemanticCategory::variable_use,        SemanticCategory::block_delimiter,
    SemanticCategory::other,
};

constexpr int category_id(SemanticCategory c) { return static_cast<int>(c); }
std::string_view category_name(SemanticCategory c);
std::optional<SemanticCategory> category_from_name(std::string_view name);
std::optional<SemanticCategory> category_from_id(int id);
// Rank in kCategoryPriority; 0 is the strongest.
int category_rank(SemanticCategory c);

using NodeId = int;

struct AstNode {
  NodeId id = 0;
  SemanticCategory category = SemanticCategory::other;
  std::vector<NodeId> children;
  int height = 0;  // depth from the root, root = 0

  bool operator==(const AstNode&) const = default;
};

// Rooted, ordered, literal-free tree. Construction validates every structural
// invariant and recomputes heights; instances are immutable afterwards.
class Ast {
 public:
  Ast(std::string method_id, NodeId root, std::vector<AstNode> nodes,
      std::optional<int> label_class = std::nullopt,
      std::vector<std::string> summary = {});

  const std::string& method_id() const { return method_id_; }
  NodeId root() const { return root_; }
  const std::map<NodeId, AstNode>& nodes() const { return nodes_; }
  const AstNode& node(NodeId id) const;
  bool contains(NodeId id) const { return nodes_.count(id) != 0; }
  std::size_t size() const { return nodes_.size(); }
  const std::optional<int>& label_class() const { return label_class_; }
  const std::vector<std::string>& summary() const { return summary_; }
  std::optional<NodeId> parent(NodeId id) const;

  // Same nodes and metadata, children lists replaced where given.
  Ast with_child_orders(const std::map<NodeId, std::vector<NodeId>>& orders) const;
  Ast with_label(std::optional<int> label_class) const;

  bool operator==(const Ast& other) const;

 private:
  std::string method_id_;
  NodeId root_;
  std::map<NodeId, AstNode> nodes_;
  std::map<NodeId, NodeId> parents_;
  std::optional<int> label_class_;
  std::vector<std::string> summary_;
};

struct TokenSequence {
  std::vector<NodeId> node_ids;
  std::vector<SemanticCategory> categories;
  std::vector<int> heights;

  std::size_t size() const { return node_ids.size(); }
  // Position of a node in the sequence, if present.
  std::optional<std::size_t> index_of(NodeId id) const;
  bool operator==(const TokenSequence&) const = default;
};

// Level-order traversal from the root, children in stored order.
TokenSequence bfs_serialize(const Ast& ast);

}  // namespace eyetrans
