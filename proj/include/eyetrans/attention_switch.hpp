#pragma once

#include <compare>
#include <vector>

#include "eyetrans/ast.hpp"

namespace eyetrans {

// Directed transition between consecutive fixations on distinct nodes.
struct AttentionSwitch {
  int ordinal = 1;  // 1-based temporal position within a trial
  NodeId src = 0;
  NodeId dst = 0;

  auto operator<=>(const AttentionSwitch&) const = default;
};

// Throws DanglingEndpoint when an endpoint is not a node of `ast`, and
// ValidationError on self-switches or ordinals that are not 1..K in order.
void validate_switches(const std::vector<AttentionSwitch>& switches, const Ast& ast);

}  // namespace eyetrans
