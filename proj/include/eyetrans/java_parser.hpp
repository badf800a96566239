#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eyetrans/ast.hpp"

namespace eyetrans {

// Zero-based screen position of a source token in a monospace rendering.
struct TokenSpan {
  int row = 0;
  int col = 0;
  int length = 0;

  bool operator==(const TokenSpan&) const = default;
};

// Syntactic parse before category resolution: every node carries all the
// roles that apply to its anchor token.
struct ParseNode {
  std::vector<SemanticCategory> roles;
  TokenSpan span;
  std::vector<int> children;
};

struct ParseTree {
  std::string method_name;
  int root = 0;
  std::vector<ParseNode> nodes;  // preorder; nodes[root] is the method
};

// Highest-priority role wins; an empty role set maps to `other`.
SemanticCategory resolve_roles(std::span<const SemanticCategory> roles);
std::vector<SemanticCategory> assign_semantic_categories(const ParseTree& tree);

// Throws SyntaxError with line/column on unsupported or malformed input.
ParseTree parse_java_tree(std::string_view source);

struct ParsedMethod {
  Ast ast;
  std::map<NodeId, TokenSpan> spans;
};

// Literal-free AST of a single method plus the source span of each node.
// Throws TooLarge above kMaxTokens nodes.
ParsedMethod parse_java_method(std::string_view source);
Ast parse_java_subset(std::string_view source);

}  // namespace eyetrans
