#include "eyetrans/models.hpp"

#include <set>

namespace eyetrans {

using nlohmann::json;

std::string_view task_name(TaskKind k) { return k == TaskKind::functional ? "functional" : "general"; }

TaskKind task_from_name(std::string_view name) {
  if (name == "functional") return TaskKind::functional;
  if (name == "general") return TaskKind::general;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

void ModelConfig::validate(TaskKind kind) const {
  if (width <= 0) throw ConfigError("model.width must be positive");
  if (heads <= 0 || width % heads != 0) throw ShapeMismatch("model.width must be divisible by model.heads");
  if (encoder_layers < 1) throw ConfigError("model.encoder_layers must be >= 1");
  if (dropout < 0 || dropout >= 1) throw ConfigError("model.dropout must lie in [0,1)");
  if (max_height < 0) throw ConfigError("model.max_height must be >= 0");
  if (max_ordinal < 1) throw ConfigError("model.max_ordinal must be >= 1");
  if (kind == TaskKind::functional) {
    if (n_classes < 1 || n_classes > kMaxClasses) throw ConfigError("model.n_classes must lie in [1, 300]");
  } else {
    if (decoder_layers < 1) throw ConfigError("model.decoder_layers must be >= 1");
    if (vocab < 4 || vocab > kMaxVocab) throw ConfigError("model.vocab must lie in [4, 2000]");
    if (max_summary < 1 || max_summary > kMaxSummaryLength) throw ConfigError("model.max_summary must lie in [1, 30]");
  }
}

json model_config_to_json(const ModelConfig& c) {
  return {{"width", c.width},
          {"heads", c.heads},
          {"encoder_layers", c.encoder_layers},
          {"decoder_layers", c.decoder_layers},
          {"ffn_width", c.ffn()},
          {"dropout", c.dropout},
          {"n_classes", c.n_classes},
          {"vocab", c.vocab},
          {"max_summary", c.max_summary},
          {"max_height", c.max_height},
          {"max_ordinal", c.max_ordinal},
          {"cross_qk_from_decoder", c.cross_qk_from_decoder},
          {"fusion",
           {{"activation", c.fusion.activation == Activation::relu ? "relu" : "sigmoid"},
            {"keep_plus_one", c.fusion.keep_plus_one},
            {"use_height", c.fusion.use_height}}}};
}

namespace {

template <typename V>
void take(const json& j, const char* key, V& out, const std::string& prefix) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for " + prefix + key);
  }
}

FusionConfig fusion_from_json(const json& j, FusionConfig f) {
  static const std::set<std::string> known{"activation", "keep_plus_one", "use_height", "ablation"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("unknown config key fusion." + it.key());
  }
  if (j.contains("ablation")) f = ablate(ablation_from_name(j["ablation"].get<std::string>()));
  if (j.contains("activation")) {
    const auto a = j["activation"].get<std::string>();
    if (a == "relu") f.activation = Activation::relu;
    else if (a == "sigmoid") f.activation = Activation::sigmoid;
    else throw ConfigError("bad value for fusion.activation");
  }
  take(j, "keep_plus_one", f.keep_plus_one, "fusion.");
  take(j, "use_height", f.use_height, "fusion.");
  return f;
}

}  // namespace

ModelConfig model_config_from_json(const json& j, ModelConfig c) {
  static const std::set<std::string> known{"width",       "heads",      "encoder_layers", "decoder_layers",
                                           "ffn_width",   "dropout",    "n_classes",      "vocab",
                                           "max_summary", "max_height", "max_ordinal",    "cross_qk_from_decoder",
                                           "fusion"};
  if (!j.is_object()) throw ConfigError("model config must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("unknown config key model." + it.key());
  }
  take(j, "width", c.width, "model.");
  take(j, "heads", c.heads, "model.");
  take(j, "encoder_layers", c.encoder_layers, "model.");
  take(j, "decoder_layers", c.decoder_layers, "model.");
  take(j, "ffn_width", c.ffn_width, "model.");
  take(j, "dropout", c.dropout, "model.");
  take(j, "n_classes", c.n_classes, "model.");
  take(j, "vocab", c.vocab, "model.");
  take(j, "max_summary", c.max_summary, "model.");
  take(j, "max_height", c.max_height, "model.");
  take(j, "max_ordinal", c.max_ordinal, "model.");
  take(j, "cross_qk_from_decoder", c.cross_qk_from_decoder, "model.");
  if (j.contains("fusion")) c.fusion = fusion_from_json(j["fusion"], c.fusion);
  return c;
}

}  // namespace eyetrans
