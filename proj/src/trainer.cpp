#include "eyetrans/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "eyetrans/augment.hpp"

namespace eyetrans {

using nlohmann::json;

namespace {

constexpr std::uint64_t kSaltShuffle = 0x5348;
constexpr std::uint64_t kSaltPerturb = 0x5045;
constexpr std::uint64_t kSaltDropout = 0x4452;
constexpr std::uint64_t kSaltInit = 0x494e;
constexpr int kEvalEpoch = -1;

}  // namespace

std::string_view apply_at_name(ApplyAt a) {
  switch (a) {
    case ApplyAt::train:
      return "train";
    case ApplyAt::eval:
      return "eval";
    case ApplyAt::both:
      return "both";
  }
  return "both";
}

ApplyAt apply_at_from_name(std::string_view name) {
  if (name == "train") return ApplyAt::train;
  if (name == "eval") return ApplyAt::eval;
  if (name == "both") return ApplyAt::both;
  throw ConfigError("unknown apply_at '" + std::string(name) + "'");
}

void PerturbConfig::validate() const {
  if (drop_rate < 0 || drop_rate > 1) throw ConfigError("R must lie in [0,1]");
  if (noise < 0) throw ConfigError("N must be >= 0");
}

TaskModel::TaskModel(TaskKind task, const ModelConfig& config) : task_(task), config_(config) {
  if (task == TaskKind::functional) {
    functional_ = std::make_unique<FunctionalModel<float>>(config);
  } else {
    seq2seq_ = std::make_unique<Seq2SeqModel<float>>(config);
  }
}

void TaskModel::init(std::uint64_t seed) {
  const std::uint64_t s = mix_seed(seed, kSaltInit);
  if (functional_) functional_->init(s);
  else seq2seq_->init(s);
}

nn::ParamList<float> TaskModel::parameters() {
  return functional_ ? functional_->parameters() : seq2seq_->parameters();
}

nn::Var TaskModel::loss(nn::Tape<float>& t, const DatasetRow& row, const ForwardOptions<float>& opts) {
  return functional_ ? functional_->loss(t, row, opts) : seq2seq_->loss(t, row, opts);
}

FunctionalModel<float>& TaskModel::functional() {
  if (!functional_) throw ConfigError("model is not a functional classifier");
  return *functional_;
}

Seq2SeqModel<float>& TaskModel::seq2seq() {
  if (!seq2seq_) throw ConfigError("model is not a seq2seq summarizer");
  return *seq2seq_;
}

ModelConfig derive_model_config(TaskKind task, ModelConfig c, const std::vector<DatasetRow>& train,
                                const std::vector<DatasetRow>& test, const Vocabulary& vocab) {
  if (task == TaskKind::functional && c.n_classes == 0) {
    int mx = -1;
    for (const auto* rows : {&train, &test})
      for (const auto& r : *rows)
        if (r.label_class) mx = std::max(mx, *r.label_class);
    c.n_classes = std::max(1, mx + 1);
  }
  if (task == TaskKind::general && c.vocab == 0) c.vocab = vocab.size();
  return c;
}

void check_rows(TaskKind task, const ModelConfig& config, const std::vector<DatasetRow>& rows) {
  if (rows.empty()) throw EmptyDataset("no training rows");
  for (const auto& r : rows) {
    validate_row(r);
    if (task == TaskKind::functional) {
      if (!r.label_class) throw ValidationError(r.id + ": functional rows need label_class");
      if (*r.label_class >= config.n_classes) {
        throw LabelOutOfRange(r.id + ": label " + std::to_string(*r.label_class) + " >= n_classes " +
                              std::to_string(config.n_classes));
      }
    } else {
      for (int id : r.summary) {
        if (id < 0 || id >= config.vocab) throw LabelOutOfRange(r.id + ": summary token outside the vocabulary");
      }
    }
  }
}

std::uint64_t sample_seed(std::uint64_t seed, int epoch, const std::string& row_id, std::uint64_t salt) {
  return mix_seed(mix_seed(mix_seed(seed, salt), static_cast<std::uint64_t>(static_cast<std::int64_t>(epoch))),
                  stable_hash(row_id));
}

namespace {

struct SampleContext {
  SemanticPerturbation<float> perturb;
  std::mt19937_64 dropout_rng;
  ForwardOptions<float> opts;
};

void prepare(SampleContext& ctx, const DatasetRow& row, const ModelConfig& mc, const TrainConfig& cfg,
             const PerturbConfig& p, bool perturb, int epoch, bool training) {
  ctx.opts = {};
  ctx.opts.use_switches = !cfg.baseline;
  if (perturb) {
    ctx.perturb = make_semantic_perturbation<float>(row.tokens.size(), static_cast<std::size_t>(mc.width), p.drop_rate,
                                                    p.noise, sample_seed(cfg.seed, epoch, row.id, kSaltPerturb));
    ctx.opts.perturb = &ctx.perturb;
  }
  if (training && mc.dropout > 0) {
    ctx.dropout_rng.seed(sample_seed(cfg.seed, epoch, row.id, kSaltDropout));
    ctx.opts.dropout_rng = &ctx.dropout_rng;
  }
}

}  // namespace

double train_epoch(TaskModel& model, TrainState& state, const std::vector<DatasetRow>& rows, const TrainConfig& cfg,
                   const PerturbConfig& perturb) {
  if (rows.empty()) throw EmptyDataset("no training rows");
  if (cfg.batch < 1) throw ConfigError("train.batch must be >= 1");
  const int epoch = state.epoch + 1;
  auto params = model.parameters();
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(mix_seed(cfg.seed, kSaltShuffle), static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), rows.size());
  nn::AdamConfig adam;
  adam.lr = cfg.lr;
  double total = 0;
  SampleContext ctx;
  for (std::size_t start = 0; start < order.size(); start += batch) {
    const std::size_t end = std::min(order.size(), start + batch);
    for (auto* p : params) p->zero_grad();
    const float inv = 1.0f / static_cast<float>(end - start);
    for (std::size_t i = start; i < end; ++i) {
      const DatasetRow& row = rows[order[i]];
      prepare(ctx, row, model.config(), cfg, perturb, perturb.at_train(), epoch, true);
      nn::Tape<float> tape;
      nn::Var loss = model.loss(tape, row, ctx.opts);
      total += tape.value(loss).data[0];
      tape.backward(loss, inv);
    }
    nn::adam_step(params, state.adam, adam);
  }
  state.epoch = epoch;
  return total / static_cast<double>(rows.size());
}

double mean_loss(TaskModel& model, const std::vector<DatasetRow>& rows, bool baseline) {
  if (rows.empty()) throw EmptyDataset("no rows");
  double total = 0;
  ForwardOptions<float> opts;
  opts.use_switches = !baseline;
  for (const auto& r : rows) {
    nn::Tape<float> t;
    total += t.value(model.loss(t, r, opts)).data[0];
  }
  return total / static_cast<double>(rows.size());
}

std::vector<std::string> metric_names(TaskKind task) {
  if (task == TaskKind::functional) return {"maf1", "map", "mar", "accuracy"};
  return {"rouge1", "rouge2", "rougeL", "rougeS", "rougeSU"};
}

std::vector<std::pair<std::string, double>> EvalReport::metrics() const {
  if (task == TaskKind::functional) {
    return {{"maf1", classes.maf1_at_1}, {"map", classes.map_at_1}, {"mar", classes.mar_at_1},
            {"accuracy", classes.accuracy}};
  }
  return {{"rouge1", 100 * rouge.rouge1.f1},
          {"rouge2", 100 * rouge.rouge2.f1},
          {"rougeL", 100 * rouge.rougeL.f1},
          {"rougeS", 100 * rouge.rougeS.f1},
          {"rougeSU", 100 * rouge.rougeSU.f1}};
}

namespace {

json prf_json(const Prf& p) { return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}}; }

json rouge_json(const RougeReport& r) {
  return {{"rouge1", prf_json(r.rouge1)},
          {"rouge2", prf_json(r.rouge2)},
          {"rougeL", prf_json(r.rougeL)},
          {"rougeS", prf_json(r.rougeS)},
          {"rougeSU", prf_json(r.rougeSU)}};
}

}  // namespace

json EvalReport::to_json(const Vocabulary* vocab) const {
  json j;
  j["format_version"] = 1;
  j["task"] = task_name(task);
  j["count"] = ids.size();
  json m = json::object();
  for (const auto& [k, v] : metrics()) m[k] = v;
  j["metrics"] = m;
  json samples = json::array();
  if (task == TaskKind::functional) {
    json per_class = json::object();
    for (const auto& [c, s] : classes.per_class) {
      per_class[std::to_string(c)] = {
          {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
    }
    j["per_class"] = per_class;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      samples.push_back({{"id", ids[i]}, {"label", labels[i]}, {"prediction", predictions[i]}});
    }
  } else {
    j["corpus"] = rouge_json(rouge);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      json s = rouge_json(per_sample[i]);
      s["id"] = ids[i];
      if (vocab) {
        s["candidate"] = vocab->decode(candidates[i]);
        s["reference"] = vocab->decode(references[i]);
      } else {
        s["candidate"] = candidates[i];
        s["reference"] = references[i];
      }
      samples.push_back(std::move(s));
    }
  }
  j["samples"] = std::move(samples);
  return j;
}

EvalReport evaluate(TaskModel& model, const std::vector<DatasetRow>& rows, const TrainConfig& cfg,
                    const PerturbConfig& perturb) {
  EvalReport rep;
  rep.task = model.task();
  SampleContext ctx;
  for (const auto& row : rows) {
    prepare(ctx, row, model.config(), cfg, perturb, perturb.at_eval(), kEvalEpoch, false);
    rep.ids.push_back(row.id);
    if (rep.task == TaskKind::functional) {
      if (!row.label_class) throw ValidationError(row.id + ": functional rows need label_class");
      rep.labels.push_back(*row.label_class);
      rep.predictions.push_back(model.functional().predict(row, ctx.opts));
    } else {
      rep.references.push_back(row.summary);
      rep.candidates.push_back(model.seq2seq().greedy_decode(row, ctx.opts));
      rep.per_sample.push_back(rouge_all<int>(rep.candidates.back(), rep.references.back()));
    }
  }
  if (rep.task == TaskKind::functional) {
    rep.classes = classification_report(rep.predictions, rep.labels);
  } else {
    rep.rouge = mean_rouge(rep.per_sample);
  }
  return rep;
}

std::vector<EpochLog> train(TaskModel& model, TrainState& state, const std::vector<DatasetRow>& train_rows,
                            const std::vector<DatasetRow>& test_rows, const TrainConfig& cfg,
                            const PerturbConfig& perturb, const EpochCallback& on_epoch) {
  perturb.validate();
  check_rows(model.task(), model.config(), train_rows);
  std::vector<EpochLog> log;
  while (state.epoch < cfg.epochs) {
    EpochLog e;
    e.loss = train_epoch(model, state, train_rows, cfg, perturb);
    e.epoch = state.epoch;
    if (cfg.eval_each_epoch || state.epoch == cfg.epochs) {
      if (!test_rows.empty()) e.metrics = evaluate(model, test_rows, cfg, perturb).metrics();
    }
    log.push_back(e);
    if (on_epoch) on_epoch(e, state);
  }
  return log;
}

}  // namespace eyetrans
