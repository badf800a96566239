#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "eyetrans/dataset.hpp"
#include "eyetrans/embedding.hpp"
#include "eyetrans/layers.hpp"
#include "json.hpp"

namespace eyetrans {

enum class TaskKind { functional, general };

std::string_view task_name(TaskKind k);
TaskKind task_from_name(std::string_view name);

struct ModelConfig {
  int width = kDefaultWidth;
  int heads = 4;
  int encoder_layers = 4;
  int decoder_layers = 4;
  int ffn_width = 0;  // 0 means 4 * width
  double dropout = 0.0;
  int n_classes = 0;  // 0: derived from the data
  int vocab = 0;      // 0: taken from the dataset vocabulary
  int max_summary = kMaxSummaryLength;
  int max_height = kMaxHeight;
  int max_ordinal = kMaxOrdinal;
  bool cross_qk_from_decoder = false;
  FusionConfig fusion;

  int ffn() const { return ffn_width > 0 ? ffn_width : 4 * width; }
  void validate(TaskKind kind) const;
  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json model_config_to_json(const ModelConfig& c);
// Unknown keys raise ConfigError naming the key.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

template <typename T>
struct ForwardOptions {
  bool use_switches = true;
  const SemanticPerturbation<T>* perturb = nullptr;
  std::mt19937_64* dropout_rng = nullptr;
  nn::AttentionTrace<T>* trace = nullptr;  // first encoder block
};

template <typename T>
struct EncoderStack {
  std::vector<nn::EncoderBlock<T>> blocks;

  EncoderStack() = default;
  EncoderStack(const ModelConfig& c) {
    for (int i = 0; i < c.encoder_layers; ++i) {
      blocks.emplace_back("enc" + std::to_string(i), static_cast<std::size_t>(c.width),
                          static_cast<std::size_t>(c.heads), static_cast<std::size_t>(c.ffn()));
    }
  }
  void init(std::mt19937_64& rng) {
    for (auto& b : blocks) b.init(rng);
  }
  nn::Var operator()(nn::Tape<T>& t, nn::Var x, double drop, std::mt19937_64* rng, nn::AttentionTrace<T>* trace) {
    for (std::size_t i = 0; i < blocks.size(); ++i) x = blocks[i](t, x, drop, rng, i == 0 ? trace : nullptr);
    return x;
  }
  void collect(nn::ParamList<T>& out) {
    for (auto& b : blocks) b.collect(out);
  }
};

namespace detail {

template <typename T>
nn::Var embed_row(nn::Tape<T>& t, const DatasetRow& row, EmbeddingTables<T>& tables, const FusionConfig& fusion,
                  const ForwardOptions<T>& opts, bool cls) {
  static const std::vector<IndexedSwitch> none;
  const auto& sw = opts.use_switches ? row.switches : none;
  FuseOptions<T> fo;
  fo.prepend_cls = cls;
  fo.perturb = opts.perturb;
  return fuse_indexed<T>(t, row.tokens, row.heights, sw, tables, fusion, fo);
}

}  // namespace detail

// Fused embeddings with a CLS row, an encoder stack and a linear head over
// the final CLS representation.
template <typename T>
struct FunctionalModel {
  ModelConfig config;
  EmbeddingTables<T> tables;
  EncoderStack<T> encoder;
  nn::Linear<T> head;

  explicit FunctionalModel(const ModelConfig& c)
      : config(c),
        tables(c.width, c.max_height, c.max_ordinal),
        encoder(c),
        head("head", static_cast<std::size_t>(c.width), static_cast<std::size_t>(c.n_classes)) {
    c.validate(TaskKind::functional);
  }

  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    tables.init(rng);
    encoder.init(rng);
    head.init(rng);
  }

  nn::ParamList<T> parameters() {
    nn::ParamList<T> out;
    tables.collect(out);
    encoder.collect(out);
    head.collect(out);
    return out;
  }

  nn::Var encode(nn::Tape<T>& t, const DatasetRow& row, const ForwardOptions<T>& opts = {}) {
    nn::Var x = detail::embed_row(t, row, tables, config.fusion, opts, true);
    return encoder(t, x, config.dropout, opts.dropout_rng, opts.trace);
  }

  // [1, n_classes]
  nn::Var logits(nn::Tape<T>& t, const DatasetRow& row, const ForwardOptions<T>& opts = {}) {
    nn::Var h = encode(t, row, opts);
    return head(t, nn::gather_rows(t, h, {0}));
  }

  nn::Var loss(nn::Tape<T>& t, const DatasetRow& row, const ForwardOptions<T>& opts = {}) {
    if (!row.label_class) throw ValidationError(row.id + ": functional rows need label_class");
    if (*row.label_class < 0 || *row.label_class >= config.n_classes) {
      throw LabelOutOfRange(row.id + ": label " + std::to_string(*row.label_class) + " outside [0, " +
                            std::to_string(config.n_classes) + ")");
    }
    return nn::cross_entropy(t, logits(t, row, opts), {*row.label_class});
  }

  // Lowest class id wins ties.
  int predict(const DatasetRow& row, const ForwardOptions<T>& opts = {}) {
    nn::Tape<T> t;
    const auto& L = t.value(logits(t, row, opts));
    int best = 0;
    for (std::size_t j = 1; j < L.cols(); ++j)
      if (L.data[j] > L.data[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
    return best;
  }
};

// Encoder over fused embeddings (no CLS row), decoder over summary tokens
// with a learned position table, linear head over the vocabulary.
template <typename T>
struct Seq2SeqModel {
  ModelConfig config;
  EmbeddingTables<T> tables;
  EncoderStack<T> encoder;
  nn::Parameter<T> token_embed;  // [vocab, d]
  nn::Parameter<T> positions;    // [max_summary, d]
  std::vector<nn::DecoderBlock<T>> decoder;
  nn::Linear<T> head;

  explicit Seq2SeqModel(const ModelConfig& c)
      : config(c),
        tables(c.width, c.max_height, c.max_ordinal),
        encoder(c),
        token_embed("dec.embed", static_cast<std::size_t>(c.vocab), static_cast<std::size_t>(c.width)),
        positions("dec.pos", static_cast<std::size_t>(c.max_summary), static_cast<std::size_t>(c.width)),
        head("dec.head", static_cast<std::size_t>(c.width), static_cast<std::size_t>(c.vocab)) {
    c.validate(TaskKind::general);
    for (int i = 0; i < c.decoder_layers; ++i) {
      decoder.emplace_back("dec" + std::to_string(i), static_cast<std::size_t>(c.width),
                           static_cast<std::size_t>(c.heads), static_cast<std::size_t>(c.ffn()));
      decoder.back().cross_qk_from_decoder = c.cross_qk_from_decoder;
    }
  }

  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    tables.init(rng);
    encoder.init(rng);
    nn::init_uniform(token_embed, T(0.05), rng);
    nn::init_uniform(positions, T(0.05), rng);
    for (auto& b : decoder) b.init(rng);
    head.init(rng);
  }

  nn::ParamList<T> parameters() {
    nn::ParamList<T> out{&tables.E, &tables.H, &tables.P};
    encoder.collect(out);
    out.push_back(&token_embed);
    out.push_back(&positions);
    for (auto& b : decoder) b.collect(out);
    head.collect(out);
    return out;
  }

  nn::Var encode(nn::Tape<T>& t, const DatasetRow& row, const ForwardOptions<T>& opts = {}) {
    nn::Var x = detail::embed_row(t, row, tables, config.fusion, opts, false);
    return encoder(t, x, config.dropout, opts.dropout_rng, opts.trace);
  }

  // [len(inputs), vocab]
  nn::Var decode_logits(nn::Tape<T>& t, nn::Var memory, const std::vector<int>& inputs,
                        std::mt19937_64* rng = nullptr) {
    std::vector<std::size_t> ids, pos;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      ids.push_back(static_cast<std::size_t>(inputs[i]));
      pos.push_back(i);
    }
    nn::Var y = nn::add(t, nn::gather_rows(t, t.param(token_embed), std::move(ids)),
                        nn::gather_rows(t, t.param(positions), std::move(pos)));
    for (auto& b : decoder) y = b(t, y, memory, config.dropout, rng);
    return head(t, y);
  }

  // Targets are the summary followed by EOS, capped at max_summary; the
  // decoder sees BOS followed by all but the last target.
  std::pair<std::vector<int>, std::vector<int>> teacher_forcing(const DatasetRow& row) const {
    std::vector<int> targets = row.summary;
    targets.push_back(Vocabulary::kEos);
    if (targets.size() > static_cast<std::size_t>(config.max_summary)) targets.resize(config.max_summary);
    std::vector<int> inputs{Vocabulary::kBos};
    inputs.insert(inputs.end(), targets.begin(), targets.end() - 1);
    return {inputs, targets};
  }

  nn::Var loss(nn::Tape<T>& t, const DatasetRow& row, const ForwardOptions<T>& opts = {}) {
    for (int id : row.summary) {
      if (id < 0 || id >= config.vocab) throw LabelOutOfRange(row.id + ": summary token outside the vocabulary");
    }
    auto [inputs, targets] = teacher_forcing(row);
    nn::Var memory = encode(t, row, opts);
    return nn::cross_entropy(t, decode_logits(t, memory, inputs, opts.dropout_rng), std::move(targets));
  }

  // Argmax from BOS until EOS or max_summary tokens; lowest id wins ties.
  // The returned sequence excludes EOS.
  std::vector<int> greedy_decode(const DatasetRow& row, const ForwardOptions<T>& opts = {}) {
    nn::Tape<T> t;
    nn::Var memory = encode(t, row, opts);
    std::vector<int> inputs{Vocabulary::kBos};
    std::vector<int> out;
    while (static_cast<int>(out.size()) < config.max_summary) {
      nn::Tape<T> step;
      nn::Var mem = step.constant(t.value(memory));
      const auto& L = step.value(decode_logits(step, mem, inputs));
      const T* last = L.row(L.rows() - 1);
      int best = 0;
      for (std::size_t j = 1; j < L.cols(); ++j)
        if (last[j] > last[best]) best = static_cast<int>(j);
      if (best == Vocabulary::kEos) break;
      out.push_back(best);
      inputs.push_back(best);
    }
    return out;
  }
};

// Sets every parameter to zero; used by the uniform-logit loss check.
template <typename T>
void zero_parameters(const nn::ParamList<T>& params) {
  for (auto* p : params) std::fill(p->value.data.begin(), p->value.data.end(), T(0));
}

template <typename T>
std::size_t parameter_count(const nn::ParamList<T>& params) {
  std::size_t n = 0;
  for (auto* p : params) n += p->value.size();
  return n;
}

}  // namespace eyetrans
