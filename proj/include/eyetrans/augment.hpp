#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eyetrans/ast.hpp"
#include "eyetrans/attention_switch.hpp"

namespace eyetrans {

struct AugmentedSample {
  std::string base_method_id;
  std::string sample_id;  // trial the switches came from
  int variant_index = 0;  // 0 is the unpermuted original
  Ast ast;
  std::vector<AttentionSwitch> switches;
  std::uint64_t provenance_seed = 0;
};

struct AugmentInput {
  std::string sample_id;
  Ast ast;
  std::vector<AttentionSwitch> switches;
};

// splitmix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
// FNV-1a; std::hash is not stable across standard libraries.
std::uint64_t stable_hash(const std::string& s);

// Each node's children are shuffled with a sub-seed derived from
// (seed, node_id), so editing one subtree leaves the others' orders intact.
Ast permute_ast(const Ast& ast, std::uint64_t seed);

// Endpoints are node ids, so the mapping is the identity; this validates the
// switches against the permuted tree and throws DanglingEndpoint otherwise.
std::vector<AttentionSwitch> remap_switches(const std::vector<AttentionSwitch>& switches,
                                            const Ast& permuted);

inline constexpr int kDefaultAugmentVariants = 3;

// Original plus up to k permuted variants per input, with every retained
// (BFS category sequence, switch set) key unique across the whole output.
// Each variant slot retries a bounded number of fresh permutations before
// giving up, so small trees still reach their distinct orderings.
std::vector<AugmentedSample> augment_dataset(const std::vector<AugmentInput>& samples, int k_variants,
                                             std::uint64_t seed);

}  // namespace eyetrans
