#include <cmath>

#include "doctest.h"
#include "eyetrans/paraphrase.hpp"
#include "eyetrans/planted.hpp"
#include "eyetrans/trainer.hpp"
#include "support.hpp"

using namespace eyetrans;
using SC = SemanticCategory;

namespace {

ModelConfig tiny(int classes = 0, int vocab = 0) {
  ModelConfig c;
  c.width = 8;
  c.heads = 2;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.n_classes = classes;
  c.vocab = vocab;
  return c;
}

Ast with_summary(const Ast& a, std::vector<std::string> words) {
  std::vector<AstNode> nodes;
  for (const auto& [_, n] : a.nodes()) nodes.push_back(n);
  return Ast(a.method_id(), a.root(), std::move(nodes), std::nullopt, std::move(words));
}

struct SummaryData {
  std::vector<DatasetRow> rows;
  Vocabulary vocab;
};

SummaryData summary_rows() {
  std::vector<std::vector<std::string>> words{{"returns", "the", "sum"}, {"checks", "if", "empty"},
                                              {"returns", "the", "largest", "value"}};
  std::vector<Ast> asts{
      with_summary(testing::make_tree({{0, {1, 2}}}, {{0, SC::method_declaration}, {2, SC::return_statement}}),
                   words[0]),
      with_summary(testing::make_tree({{0, {1}}, {1, {2, 3}}}, {{0, SC::method_declaration}, {1, SC::conditional_statement}}),
                   words[1]),
      with_summary(testing::make_tree({{0, {1, 2, 3}}}, {{1, SC::loop_body}, {3, SC::return_statement}}), words[2])};
  SummaryData d;
  d.vocab = Vocabulary::build(words);
  for (std::size_t i = 0; i < asts.size(); ++i) {
    d.rows.push_back(make_row("r" + std::to_string(i), asts[i], {{1, 0, 2}, {2, 2, 1}}, {}, &d.vocab));
  }
  return d;
}

std::vector<DatasetRow> planted_rows(int n) {
  PlantedTaskConfig pc;
  pc.n_asts = n;
  auto task = make_planted_task(pc);
  return task.split.train;
}

std::vector<float> flat(TaskModel& m) {
  std::vector<float> out;
  for (auto* p : m.parameters()) out.insert(out.end(), p->value.data.begin(), p->value.data.end());
  return out;
}

}  // namespace

TEST_CASE("zero parameters give uniform-logit loss") {
  auto rows = planted_rows(20);
  TaskModel f(TaskKind::functional, tiny(5));
  f.init(1);
  zero_parameters(f.parameters());
  CHECK(mean_loss(f, rows, false) == doctest::Approx(std::log(5.0)).epsilon(1e-3));

  auto d = summary_rows();
  TaskModel s(TaskKind::general, tiny(0, d.vocab.size()));
  s.init(1);
  zero_parameters(s.parameters());
  CHECK(mean_loss(s, d.rows, false) == doctest::Approx(std::log(static_cast<double>(d.vocab.size()))).epsilon(1e-3));
}

TEST_CASE("baseline mode leaves P untouched") {
  auto rows = planted_rows(30);
  TaskModel m(TaskKind::functional, tiny(3));
  m.init(4);
  const auto before = m.functional().tables.P.value;
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch = 8;
  cfg.baseline = true;
  TrainState st;
  train(m, st, rows, {}, cfg, {});
  CHECK(m.functional().tables.P.value == before);
  for (float g : m.functional().tables.P.grad.data) CHECK(g == 0.0f);
}

TEST_CASE("without switches the two modes train identically") {
  auto rows = planted_rows(30);
  for (auto& r : rows) r.switches.clear();
  auto run = [&](bool baseline) {
    TaskModel m(TaskKind::functional, tiny(3));
    m.init(9);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch = 8;
    cfg.baseline = baseline;
    TrainState st;
    std::vector<double> losses;
    for (auto& e : train(m, st, rows, {}, cfg, {})) losses.push_back(e.loss);
    return losses;
  };
  CHECK(run(true) == run(false));
}

TEST_CASE("same seed gives identical loss curves and weights") {
  auto rows = planted_rows(30);
  auto run = [&](std::uint64_t seed) {
    TaskModel m(TaskKind::functional, tiny(3));
    m.init(seed);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch = 4;
    cfg.seed = seed;
    PerturbConfig p{0.1, 0.1, ApplyAt::both};
    TrainState st;
    std::vector<double> losses;
    for (auto& e : train(m, st, rows, rows, cfg, p)) losses.push_back(e.loss);
    return std::make_pair(losses, flat(m));
  };
  CHECK(run(42) == run(42));
  CHECK(run(42).first != run(43).first);
}

TEST_CASE("evaluate does not mutate the model") {
  auto rows = planted_rows(20);
  TaskModel m(TaskKind::functional, tiny(3));
  m.init(2);
  const auto before = flat(m);
  auto r1 = evaluate(m, rows, {}, {0.5, 0.5, ApplyAt::both});
  auto r2 = evaluate(m, rows, {}, {0.5, 0.5, ApplyAt::both});
  CHECK(flat(m) == before);
  CHECK(r1.predictions == r2.predictions);
  // perturbation limited to training leaves evaluation clean
  auto clean = evaluate(m, rows, {}, {});
  auto train_only = evaluate(m, rows, {}, {0.5, 0.5, ApplyAt::train});
  CHECK(clean.predictions == train_only.predictions);
}

TEST_CASE("perfect predictions score 100") {
  auto rows = planted_rows(20);
  TaskModel m(TaskKind::functional, tiny(3));
  m.init(2);
  auto rep = evaluate(m, rows, {}, {});
  auto perfect = classification_report(rep.labels, rep.labels);
  CHECK(perfect.maf1_at_1 == 100.0);
  CHECK(perfect.accuracy == 100.0);
}

TEST_CASE("greedy decoding: length cap, ties, immediate EOS") {
  auto d = summary_rows();
  TaskModel m(TaskKind::general, tiny(0, d.vocab.size()));
  m.init(3);
  zero_parameters(m.parameters());
  // every logit ties, so the lowest id (padding) wins until the cap
  auto out = m.seq2seq().greedy_decode(d.rows[0]);
  CHECK(out.size() == kMaxSummaryLength);
  for (int id : out) CHECK(id == 0);
  m.seq2seq().head.bias.value.data[Vocabulary::kEos] = 1.0f;
  CHECK(m.seq2seq().greedy_decode(d.rows[0]).empty());

  m.init(3);
  for (const auto& r : d.rows) CHECK(m.seq2seq().greedy_decode(r).size() <= 30);
}

TEST_CASE("teacher forcing appends EOS and truncates to 30") {
  auto d = summary_rows();
  TaskModel m(TaskKind::general, tiny(0, d.vocab.size()));
  auto [in, tgt] = m.seq2seq().teacher_forcing(d.rows[0]);
  CHECK(in.front() == Vocabulary::kBos);
  CHECK(tgt.back() == Vocabulary::kEos);
  CHECK(in.size() == tgt.size());
  DatasetRow longrow = d.rows[0];
  longrow.summary.assign(50, 4);
  auto [in2, tgt2] = m.seq2seq().teacher_forcing(longrow);
  CHECK(tgt2.size() == 30);
  CHECK(in2.size() == 30);
}

TEST_CASE("a single repeated sample is memorized") {
  auto d = summary_rows();
  std::vector<DatasetRow> one(8, d.rows[2]);
  for (std::size_t i = 0; i < one.size(); ++i) one[i].id = "dup" + std::to_string(i);
  TaskModel m(TaskKind::general, tiny(0, d.vocab.size()));
  m.init(5);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch = 8;
  cfg.lr = 1e-2;
  TrainState st;
  const double start = mean_loss(m, one, false);
  auto log = train(m, st, one, {}, cfg, {});
  CHECK(log.back().loss < 0.05 * start);
  CHECK(m.seq2seq().greedy_decode(one[0]) == one[0].summary);
}

TEST_CASE("label errors and config validation") {
  auto rows = planted_rows(20);
  TaskModel m(TaskKind::functional, tiny(2));
  m.init(0);
  TrainState st;
  CHECK_THROWS_AS(train(m, st, {}, {}, {}, {}), EmptyDataset);
  CHECK_THROWS_AS(train(m, st, rows, {}, {}, {}), LabelOutOfRange);
  CHECK_THROWS_AS((PerturbConfig{1.5, 0, ApplyAt::both}.validate()), ConfigError);
  CHECK_THROWS_AS((PerturbConfig{0, -0.1, ApplyAt::both}.validate()), ConfigError);
  CHECK(apply_at_from_name("eval") == ApplyAt::eval);
  CHECK(apply_at_name(ApplyAt::both) == "both");
  CHECK_THROWS_AS(apply_at_from_name("never"), ConfigError);
  ModelConfig bad = tiny(3);
  bad.heads = 3;
  CHECK_THROWS_AS(TaskModel(TaskKind::functional, bad), Error);
}

TEST_CASE("paraphrase templates") {
  using V = std::vector<std::string>;
  CHECK(label_paraphrase({}, 0).empty());
  CHECK(label_paraphrase({"returns", "the", "value"}, 0) == V{"gives", "back", "the", "value"});
  CHECK(label_paraphrase({"zzz", "qqq"}, 5) == V{"zzz", "qqq"});
  for (std::uint64_t s = 0; s < 10; ++s) {
    CHECK(label_paraphrase({"finds", "the", "largest"}, s) == label_paraphrase({"finds", "the", "largest"}, s));
  }
}
