#include "eyetrans/embedding.hpp"

namespace eyetrans {

std::string_view ablation_name(Ablation a) {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::sigmoid_activation: return "sigmoid";
    case Ablation::no_plus_one: return "no_plus_one";
    case Ablation::no_height: return "no_height";
  }
  return "none";
}

Ablation ablation_from_name(std::string_view name) {
  for (Ablation a : {Ablation::none, Ablation::sigmoid_activation, Ablation::no_plus_one, Ablation::no_height}) {
    if (ablation_name(a) == name) return a;
  }
  throw ConfigError("unknown ablation '" + std::string(name) + "'");
}

FusionConfig ablate(Ablation a) {
  FusionConfig cfg;
  switch (a) {
    case Ablation::none: break;
    case Ablation::sigmoid_activation: cfg.activation = Activation::sigmoid; break;
    case Ablation::no_plus_one: cfg.keep_plus_one = false; break;
    case Ablation::no_height: cfg.use_height = false; break;
  }
  return cfg;
}

std::vector<IndexedSwitch> index_switches(const TokenSequence& tokens, const std::vector<AttentionSwitch>& switches) {
  std::map<NodeId, std::size_t> pos;
  for (std::size_t i = 0; i < tokens.size(); ++i) pos[tokens.node_ids[i]] = i;
  std::vector<IndexedSwitch> out;
  out.reserve(switches.size());
  for (const AttentionSwitch& s : switches) {
    auto a = pos.find(s.src);
    auto b = pos.find(s.dst);
    if (a == pos.end() || b == pos.end()) {
      throw UnknownEndpoint("switch " + std::to_string(s.ordinal) + ": node " +
                            std::to_string(a == pos.end() ? s.src : s.dst) + " not in the token sequence");
    }
    out.push_back({s.ordinal, a->second, b->second});
  }
  return out;
}

}  // namespace eyetrans
