#include "eyetrans/augment.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <tuple>

#include "eyetrans/errors.hpp"

namespace eyetrans {

void validate_switches(const std::vector<AttentionSwitch>& switches, const Ast& ast) {
  for (std::size_t i = 0; i < switches.size(); ++i) {
    const AttentionSwitch& s = switches[i];
    for (NodeId endpoint : {s.src, s.dst}) {
      if (!ast.contains(endpoint)) {
        throw DanglingEndpoint("switch " + std::to_string(s.ordinal) + " references unknown node " +
                               std::to_string(endpoint));
      }
    }
    if (s.src == s.dst) throw ValidationError("self-switch on node " + std::to_string(s.src));
    if (s.ordinal != static_cast<int>(i) + 1) {
      throw ValidationError("switch ordinals must be 1..K in order; got " + std::to_string(s.ordinal) +
                            " at position " + std::to_string(i + 1));
    }
  }
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Ast permute_ast(const Ast& ast, std::uint64_t seed) {
  std::map<NodeId, std::vector<NodeId>> orders;
  for (const auto& [id, node] : ast.nodes()) {
    if (node.children.size() < 2) continue;
    std::vector<NodeId> children = node.children;
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(id)));
    std::shuffle(children.begin(), children.end(), rng);
    orders.emplace(id, std::move(children));
  }
  return ast.with_child_orders(orders);
}

std::vector<AttentionSwitch> remap_switches(const std::vector<AttentionSwitch>& switches,
                                            const Ast& permuted) {
  validate_switches(switches, permuted);
  return switches;
}

namespace {

using DedupKey = std::pair<std::vector<SemanticCategory>, std::set<std::tuple<int, NodeId, NodeId>>>;

DedupKey dedup_key(const Ast& ast, const std::vector<AttentionSwitch>& switches) {
  DedupKey key;
  key.first = bfs_serialize(ast).categories;
  for (const AttentionSwitch& s : switches) key.second.emplace(s.ordinal, s.src, s.dst);
  return key;
}

constexpr int kAttemptsPerVariant = 8;

}  // namespace

std::vector<AugmentedSample> augment_dataset(const std::vector<AugmentInput>& samples, int k_variants,
                                             std::uint64_t seed) {
  if (k_variants < 0) throw ConfigError("k_variants must be >= 0");
  std::vector<AugmentedSample> out;
  std::set<DedupKey> seen;
  for (const AugmentInput& in : samples) {
    validate_switches(in.switches, in.ast);
    const std::uint64_t base_seed =
        mix_seed(seed, stable_hash(in.ast.method_id() + '\x1f' + in.sample_id));
    if (seen.insert(dedup_key(in.ast, in.switches)).second) {
      out.push_back({in.ast.method_id(), in.sample_id, 0, in.ast, in.switches, base_seed});
    }
    std::uint64_t draw = 0;
    for (int v = 1; v <= k_variants; ++v) {
      for (int attempt = 0; attempt < kAttemptsPerVariant; ++attempt) {
        const std::uint64_t variant_seed = mix_seed(base_seed, ++draw);
        Ast permuted = permute_ast(in.ast, variant_seed);
        auto switches = remap_switches(in.switches, permuted);
        if (seen.insert(dedup_key(permuted, switches)).second) {
          out.push_back({in.ast.method_id(), in.sample_id, v, std::move(permuted), std::move(switches),
                         variant_seed});
          break;
        }
      }
    }
  }
  return out;
}

}  // namespace eyetrans
