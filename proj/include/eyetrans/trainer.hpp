#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "eyetrans/dataset.hpp"
#include "eyetrans/metrics.hpp"
#include "eyetrans/models.hpp"
#include "json.hpp"

namespace eyetrans {

enum class ApplyAt { train, eval, both };

std::string_view apply_at_name(ApplyAt a);
ApplyAt apply_at_from_name(std::string_view name);

// Token dropout rate R and Gaussian noise level N on semantic embeddings.
struct PerturbConfig {
  double drop_rate = 0.0;
  double noise = 0.0;
  ApplyAt apply_at = ApplyAt::both;

  bool at_train() const { return apply_at != ApplyAt::eval && (drop_rate > 0 || noise > 0); }
  bool at_eval() const { return apply_at != ApplyAt::train && (drop_rate > 0 || noise > 0); }
  void validate() const;
};

struct TrainConfig {
  int epochs = 10;
  double lr = 1e-3;
  int batch = 256;  // clipped to the training-set size
  std::uint64_t seed = 0;
  bool baseline = false;  // drop every switch
  bool eval_each_epoch = true;
};

// Owns one of the two task models in 32-bit floats.
class TaskModel {
 public:
  TaskModel(TaskKind task, const ModelConfig& config);

  TaskKind task() const { return task_; }
  const ModelConfig& config() const { return config_; }
  void init(std::uint64_t seed);
  nn::ParamList<float> parameters();
  nn::Var loss(nn::Tape<float>& t, const DatasetRow& row, const ForwardOptions<float>& opts);

  FunctionalModel<float>& functional();
  Seq2SeqModel<float>& seq2seq();

 private:
  TaskKind task_;
  ModelConfig config_;
  std::unique_ptr<FunctionalModel<float>> functional_;
  std::unique_ptr<Seq2SeqModel<float>> seq2seq_;
};

// Fills n_classes / vocab left at 0 from the data.
ModelConfig derive_model_config(TaskKind task, ModelConfig base, const std::vector<DatasetRow>& train,
                                const std::vector<DatasetRow>& test, const Vocabulary& vocab);

// Throws EmptyDataset, LabelOutOfRange, or ValidationError when rows do not
// fit the task.
void check_rows(TaskKind task, const ModelConfig& config, const std::vector<DatasetRow>& rows);

struct TrainState {
  int epoch = 0;  // completed epochs
  nn::AdamState<float> adam;
};

struct EvalReport {
  TaskKind task = TaskKind::functional;
  std::vector<std::string> ids;
  // functional
  std::vector<int> predictions;
  std::vector<int> labels;
  ClassReport classes;
  // general
  std::vector<std::vector<int>> candidates;
  std::vector<std::vector<int>> references;
  std::vector<RougeReport> per_sample;
  RougeReport rouge;

  // Headline numbers in percent, in a fixed order.
  std::vector<std::pair<std::string, double>> metrics() const;
  nlohmann::json to_json(const Vocabulary* vocab = nullptr) const;
};

std::vector<std::string> metric_names(TaskKind task);

struct EpochLog {
  int epoch = 0;
  double loss = 0;
  std::vector<std::pair<std::string, double>> metrics;
};

// Per-sample perturbation and dropout seeds derive from (seed, epoch, row
// id); evaluation seeds from (seed, row id) only.
std::uint64_t sample_seed(std::uint64_t seed, int epoch, const std::string& row_id, std::uint64_t salt);

// One pass over `rows` in a seeded order with minibatch Adam; returns the
// mean per-sample loss and advances state.epoch.
double train_epoch(TaskModel& model, TrainState& state, const std::vector<DatasetRow>& rows, const TrainConfig& cfg,
                   const PerturbConfig& perturb);

// Mean per-sample loss with no perturbation and no parameter update.
double mean_loss(TaskModel& model, const std::vector<DatasetRow>& rows, bool baseline);

// Never mutates the model.
EvalReport evaluate(TaskModel& model, const std::vector<DatasetRow>& rows, const TrainConfig& cfg,
                    const PerturbConfig& perturb);

using EpochCallback = std::function<void(const EpochLog&, const TrainState&)>;

// Runs epochs state.epoch+1 .. cfg.epochs.
std::vector<EpochLog> train(TaskModel& model, TrainState& state, const std::vector<DatasetRow>& train_rows,
                            const std::vector<DatasetRow>& test_rows, const TrainConfig& cfg,
                            const PerturbConfig& perturb, const EpochCallback& on_epoch = {});

}  // namespace eyetrans
