// Acceptance runner: one PASS/FAIL line per criterion, exit 0 only when all pass.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eyetrans/attnmap.hpp"
#include "eyetrans/augment.hpp"
#include "eyetrans/checkpoint.hpp"
#include "eyetrans/embedding.hpp"
#include "eyetrans/experiment.hpp"
#include "eyetrans/gaze.hpp"
#include "eyetrans/gradcheck.hpp"
#include "eyetrans/metrics.hpp"
#include "eyetrans/planted.hpp"

using namespace eyetrans;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmtd(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(part);
  return out;
}

// PGM allows `#` comment lines in the header.
std::string pgm_without_comments(const std::string& pgm) {
  std::string out;
  for (const auto& line : split(pgm, '\n'))
    if (line.empty() || line[0] != '#') out += line + "\n";
  return out;
}

// Every regular file under `root`, relative path -> bytes.
std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

Ast build_tree(const std::map<NodeId, std::vector<NodeId>>& kids, const std::map<NodeId, SemanticCategory>& cats) {
  std::map<NodeId, AstNode> nodes;
  auto touch = [&](NodeId id) {
    nodes[id].id = id;
    auto it = cats.find(id);
    nodes[id].category = it == cats.end() ? SemanticCategory::other : it->second;
  };
  for (const auto& [id, ch] : kids) {
    touch(id);
    nodes[id].children = ch;
    for (NodeId c : ch) touch(c);
  }
  std::vector<AstNode> list;
  for (auto& [_, n] : nodes) list.push_back(n);
  return Ast("acc", 0, std::move(list));
}

Ast random_tree(std::mt19937_64& rng, int n) {
  std::map<NodeId, std::vector<NodeId>> kids;
  std::map<NodeId, SemanticCategory> cats;
  std::uniform_int_distribution<int> cat(0, kNumCategories - 1);
  kids[0];
  cats[0] = static_cast<SemanticCategory>(cat(rng));
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> parent(std::max(0, i - 5), i - 1);
    kids[parent(rng)].push_back(i);
    cats[i] = static_cast<SemanticCategory>(cat(rng));
  }
  return build_tree(kids, cats);
}

// a=0 -> {b=1, c=2}, b -> {d=3, e=4}
Ast fig_tree() {
  using SC = SemanticCategory;
  return build_tree({{0, {1, 2}}, {1, {3, 4}}}, {{0, SC::method_declaration},
                                                 {1, SC::variable_declaration},
                                                 {2, SC::return_statement},
                                                 {3, SC::variable_use},
                                                 {4, SC::operator_}});
}

EmbeddingTables<float> seeded_tables(std::uint64_t seed) {
  EmbeddingTables<float> t;
  std::mt19937_64 rng(seed);
  t.init(rng);
  return t;
}

float relu(float x) { return x > 0 ? x : 0; }

// ---- criteria ---------------------------------------------------------------

Outcome gradient_correctness() {
  auto s = run_gradcheck();
  Outcome o;
  o.pass = s.pass && s.max_relative_error <= 1e-3 && s.seconds <= 60.0;
  o.detail = "max relative error " + fmtd("%.3g", s.max_relative_error) + " (<= 1e-3), " + fmtd("%.2f", s.seconds) +
             " s (<= 60 s)";
  return o;
}

Outcome fusion_identity() {
  auto t = seeded_tables(2024);
  std::fill(t.P.value.data.begin(), t.P.value.data.end(), 0.0f);
  Ast a = fig_tree();
  auto seq = bfs_serialize(a);
  const std::size_t d = static_cast<std::size_t>(t.width);
  bool exact = true, zero_p = true, closed = true;

  auto t2 = seeded_tables(2024);
  auto none = fuse_values(seq, {}, t2, FusionConfig{});
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto c = static_cast<std::size_t>(category_id(seq.categories[i]));
    const auto h = static_cast<std::size_t>(seq.heights[i]);
    for (std::size_t j = 0; j < d; ++j) exact = exact && none.at(i + 1, j) == t2.E.value.at(c, j) + t2.H.value.at(h, j);
  }

  std::vector<AttentionSwitch> many{{1, 0, 4}, {2, 4, 2}, {3, 2, 3}};
  zero_p = fuse_values(seq, many, t, FusionConfig{}) == fuse_values(seq, {}, t, FusionConfig{});

  auto out = fuse_values(seq, {{1, 0, 4}}, t2, FusionConfig{});
  const std::size_t ia = *seq.index_of(0) + 1, ie = *seq.index_of(4) + 1;
  const auto ca = static_cast<std::size_t>(category_id(a.node(0).category));
  const auto ce = static_cast<std::size_t>(category_id(a.node(4).category));
  const auto ha = static_cast<std::size_t>(a.node(0).height), he = static_cast<std::size_t>(a.node(4).height);
  double worst = 0;
  for (std::size_t j = 0; j < d; ++j) {
    const double p = relu(t2.P.value.at(0, j));
    const double ra = t2.E.value.at(ca, j) * (1 + p) + t2.H.value.at(ha, j);
    const double re = t2.E.value.at(ce, j) + t2.H.value.at(he, j) * (1 + p);
    worst = std::max({worst, std::abs(out.at(ia, j) - ra), std::abs(out.at(ie, j) - re)});
  }
  closed = worst <= 1e-6;
  Outcome o;
  o.pass = exact && zero_p && closed;
  o.detail = std::string("E+H bit-exact ") + (exact ? "yes" : "no") + ", zero-P identical " + (zero_p ? "yes" : "no") +
             ", single-switch closed form max |diff| " + fmtd("%.2g", worst) + " (<= 1e-6)";
  return o;
}

Outcome shared_component() {
  Ast a = fig_tree();
  auto seq = bfs_serialize(a);
  const std::size_t ia = *seq.index_of(0) + 1, ie = *seq.index_of(4) + 1;
  double worst = 0;
  // Literal zeroing, then E and H set to a common constant so the (1 + phi) factor is visible.
  for (float fill : {0.0f, 1.0f}) {
    auto t = seeded_tables(99);
    std::fill(t.E.value.data.begin(), t.E.value.data.end(), fill);
    std::fill(t.H.value.data.begin(), t.H.value.data.end(), fill);
    auto out = fuse_values(seq, {{1, 0, 4}}, t, FusionConfig{});
    for (std::size_t j = 0; j < static_cast<std::size_t>(t.width); ++j) {
      worst = std::max(worst, static_cast<double>(std::abs(out.at(ia, j) - out.at(ie, j))));
      const double expect = fill * (2 + relu(t.P.value.at(0, j)));
      worst = std::max(worst, std::abs(out.at(ia, j) - expect));
    }
  }
  return {worst <= 1e-6, "rows a and e max |diff| " + fmtd("%.2g", worst) + " (<= 1e-6)"};
}

struct PlantedRun {
  ExperimentConfig cfg;
  json report;
  int n_classes = 0;
};

std::map<std::string, double> mean_accuracy(const json& report) {
  std::map<std::string, double> out;
  for (const auto& r : report["rows"]) {
    if (r["seed"] != "mean") continue;
    out[r["mode"].get<std::string>() + "@" + fmtd("%g", r["R"].get<double>()) + "," + fmtd("%g", r["N"].get<double>())] =
        r["accuracy"].get<double>();
  }
  return out;
}

Outcome planted_separation(PlantedRun& run, double& seconds) {
  ExperimentConfig c = run.cfg;
  c.grid = {{0, 0}};
  auto t0 = Clock::now();
  auto res = run_experiment(c);
  seconds = seconds_since(t0);
  auto acc = mean_accuracy(res.report);
  const double e = acc["eyetrans@0,0"] / 100.0, b = acc["baseline@0,0"] / 100.0;
  const double chance = 1.0 / run.n_classes;
  Outcome o;
  o.pass = e >= 0.90 && b <= 2 * chance && seconds <= 600;
  o.detail = "eyetrans " + fmtd("%.3f", e) + " (>= 0.90), baseline " + fmtd("%.3f", b) + " (<= " +
             fmtd("%.3f", 2 * chance) + "), " + fmtd("%.0f", seconds) + " s (<= 600 s)";
  return o;
}

Outcome robustness_trend(PlantedRun& run) {
  auto res = run_experiment(run.cfg);
  run.report = res.report;
  auto acc = mean_accuracy(res.report);
  bool ok = true;
  std::string detail;
  for (const char* mode : {"eyetrans", "baseline"}) {
    double prev = 1e9;
    detail += std::string(detail.empty() ? "" : "; ") + mode;
    for (const auto& cell : run.cfg.grid) {
      const std::string key = std::string(mode) + "@" + fmtd("%g", cell.drop_rate) + "," + fmtd("%g", cell.noise);
      const double v = acc[key];
      ok = ok && v <= prev;
      prev = v;
      detail += " " + fmtd("%.1f", v);
    }
  }
  for (const auto& cell : run.cfg.grid) {
    const std::string suffix = "@" + fmtd("%g", cell.drop_rate) + "," + fmtd("%g", cell.noise);
    ok = ok && acc["eyetrans" + suffix] >= acc["baseline" + suffix];
  }
  return {ok, "mean accuracy (%) over (0,0) (0.1,0.1) (0.5,0.5): " + detail +
                  "; non-increasing and eyetrans >= baseline required"};
}

// Descriptive only: the (0,0) models evaluated under eval-time perturbation.
std::string eval_only_trend(const PlantedRun& run) {
  auto task = make_planted_task(*run.cfg.planted);
  std::string out;
  for (RunMode mode : {RunMode::eyetrans, RunMode::baseline}) {
    out += std::string(out.empty() ? "" : "; ") + std::string(mode_name(mode));
    for (const auto& cell : run.cfg.grid) {
      double sum = 0;
      for (auto seed : run.cfg.seeds) {
        auto lm = load_model(run_checkpoint_path(run.cfg, mode, {0, 0}, seed));
        TrainConfig tc = run.cfg.train;
        tc.seed = seed;
        tc.baseline = mode == RunMode::baseline;
        PerturbConfig pc{cell.drop_rate, cell.noise, ApplyAt::eval};
        sum += evaluate(*lm.model, task.split.test, tc, pc).classes.accuracy;
      }
      out += " " + fmtd("%.1f", sum / static_cast<double>(run.cfg.seeds.size()));
    }
  }
  return out;
}

Outcome overfit() {
  PlantedTaskConfig pc;
  pc.n_asts = 40;
  auto task = make_planted_task(pc);
  auto rows = task.split.train;
  ModelConfig mc;
  mc.n_classes = task.n_classes;
  TaskModel m(TaskKind::functional, mc);
  m.init(0);
  TrainConfig tc;
  tc.epochs = 300;
  tc.lr = 1e-3;
  tc.batch = 8;
  tc.eval_each_epoch = false;
  TrainState st;
  int reached = -1;
  double maf1 = 0;
  while (st.epoch < tc.epochs) {
    train_epoch(m, st, rows, tc, {});
    maf1 = evaluate(m, rows, tc, {}).classes.maf1_at_1;
    if (maf1 == 100.0) {
      reached = st.epoch;
      break;
    }
  }
  return {reached > 0 && rows.size() == 32,
          std::to_string(rows.size()) + " samples, train MAF1@1 " + fmtd("%.2f", maf1) +
              (reached > 0 ? " at epoch " + std::to_string(reached) : std::string(" after 300 epochs")) +
              " (100 within 300 required)"};
}

Outcome ivt_oracle() {
  auto still = [](int n, double span) {
    std::vector<GazeSample> s;
    for (int i = 0; i < n; ++i) s.push_back({150, 60, span * i / (n - 1), true});
    return s;
  };
  const double dt = 1000.0 / 60.0;
  auto one = classify_ivt(still(18, 300), kSaccadeThresholdPxPer100Ms);
  std::vector<GazeSample> jump;
  for (int i = 0; i < 12; ++i) jump.push_back({100, 100, i * dt, true});
  for (int i = 12; i < 24; ++i) jump.push_back({300, 100, i * dt, true});
  auto two = classify_ivt(jump, kSaccadeThresholdPxPer100Ms);
  std::vector<GazeSample> drift;
  for (int i = 0; i < 60; ++i) drift.push_back({10.0 * i * dt, 0, i * dt, true});
  auto none = classify_ivt(drift, kSaccadeThresholdPxPer100Ms);
  const bool ok = kSaccadeThresholdPxPer100Ms == 400.0 && one.size() == 1 && std::abs(one[0].duration - 300) < 1e-9 &&
                  two.size() == 2 && two[0].x == 100 && two[1].x == 300 && none.empty();
  return {ok, "still trace " + std::to_string(one.size()) + " fixation, 200 px jump " + std::to_string(two.size()) +
                  " fixations, 10 px/ms drift " + std::to_string(none.size()) + " fixations; threshold " +
                  fmtd("%g", kSaccadeThresholdPxPer100Ms) + " px/100 ms"};
}

Outcome metric_oracles() {
  const double tol = 1e-9;
  std::vector<int> labels{0, 0, 1, 1}, preds{0, 1, 1, 1};
  auto rep = classification_report(preds, labels);
  const double maf1 = 100.0 * (2.0 / 3.0 + 4.0 / 5.0) / 2.0;
  std::vector<std::string> abc{"a", "b", "c"}, abd{"a", "b", "d"}, ab{"a", "b"}, ba{"b", "a"}, empty;
  double worst = std::abs(rep.maf1_at_1 - maf1);
  auto chk = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  auto r1 = rouge_n<std::string>(abc, abd, 1);
  chk(r1.precision, 2.0 / 3);
  chk(r1.recall, 2.0 / 3);
  chk(r1.f1, 2.0 / 3);
  chk(rouge_n<std::string>(abc, abc, 1).f1, 1);
  chk(rouge_n<std::string>(abc, std::vector<std::string>{"x", "y"}, 1).f1, 0);
  chk(rouge_l<std::string>(abc, abd).f1, 2.0 / 3);
  chk(rouge_l<std::string>(abc, empty).f1, 0);
  chk(static_cast<double>(lcs_length<std::string>(std::vector<std::string>{"c", "b", "a"}, abc)), 1);
  chk(rouge_s<std::string>(abc, abc, 4).f1, 1);
  chk(rouge_s<std::string>(ab, ba).f1, 0);
  chk(rouge_s<std::string>(empty, abc).f1, 0);
  const bool su_positive = rouge_su<std::string>(ab, ba).f1 > 0;
  chk(rep.per_class.at(0).precision, 1);
  chk(rep.per_class.at(0).recall, 0.5);
  chk(rep.per_class.at(1).precision, 2.0 / 3);
  chk(rep.per_class.at(1).recall, 1);
  chk(classification_report(labels, labels).maf1_at_1, 100);
  return {worst <= tol && su_positive,
          "MAF1 " + fmtd("%.6f", rep.maf1_at_1) + ", max |diff| over ROUGE/MAF1 examples " + fmtd("%.2g", worst) +
              " (<= 1e-9)"};
}

Outcome augmentation_invariants() {
  std::mt19937_64 rng(9);
  int bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::uniform_int_distribution<int> size(2, 60);
    Ast a = random_tree(rng, size(rng));
    auto sw = synthesize_gaze(a, GazeMode::markov, rng(), 8);
    Ast p = permute_ast(a, rng());
    bool ok = p.size() == a.size() && p.root() == a.root();
    std::multiset<std::pair<NodeId, NodeId>> e0, e1;
    for (const auto& [id, n] : a.nodes()) {
      for (NodeId c : n.children) e0.insert({id, c});
      ok = ok && p.node(id).height == n.height && p.node(id).category == n.category;
    }
    for (const auto& [id, n] : p.nodes())
      for (NodeId c : n.children) e1.insert({id, c});
    ok = ok && e0 == e1 && remap_switches(sw, p) == sw;
    if (!ok) ++bad;
  }
  int dupes = 0;
  for (int round = 0; round < 20; ++round) {
    std::vector<AugmentInput> in;
    for (int i = 0; i < 6; ++i) {
      std::uniform_int_distribution<int> size(1, 8);
      Ast a = random_tree(rng, size(rng));
      in.push_back({"s" + std::to_string(i), a, {}});
      in.push_back({"t" + std::to_string(i), a, {}});
    }
    std::set<std::pair<std::vector<SemanticCategory>, std::set<AttentionSwitch>>> keys;
    for (const auto& s : augment_dataset(in, 4, static_cast<std::uint64_t>(round))) {
      if (!keys.insert({bfs_serialize(s.ast).categories, {s.switches.begin(), s.switches.end()}}).second) ++dupes;
    }
  }
  return {bad == 0 && dupes == 0, "1000 permutation trials, " + std::to_string(bad) + " violations; " +
                                      std::to_string(dupes) + " duplicate dedup keys"};
}

Outcome attention_export(const PlantedRun& run, const fs::path& dir) {
  auto eye = load_model(run_checkpoint_path(run.cfg, RunMode::eyetrans, {0, 0}, run.cfg.seeds.front()));
  auto base = load_model(run_checkpoint_path(run.cfg, RunMode::baseline, {0, 0}, run.cfg.seeds.front()));
  std::mt19937_64 rng(20);
  Ast a = random_tree(rng, 20).with_label(0);
  DatasetRow row = make_row("sample20", a, synthesize_gaze(a, GazeMode::markov, 20, 8), {});
  auto de = attention_dump(*eye.model, row, false);
  auto db = attention_dump(*base.model, row, true);
  fs::remove_all(dir);
  export_attention(dir / "eyetrans", de);
  export_attention(dir / "baseline", db);
  auto paired = export_paired(dir, de, db);

  bool ok = row.tokens.size() == 20 && de.heads.size() == 4;
  double worst = 0;
  for (std::size_t h = 0; h < de.heads.size(); ++h) {
    for (const char* side : {"eyetrans", "baseline"}) {
      for (const char* kind : {"pre", "post"}) {
        const fs::path stem = dir / side / ("head" + std::to_string(h) + "_" + kind);
        auto lines = split(slurp(stem.string() + ".csv"), '\n');
        ok = ok && lines.size() == 22;
        for (std::size_t i = 1; i < lines.size(); ++i) {
          auto cells = split(lines[i], ',');
          ok = ok && cells.size() == 22;
          if (std::string(kind) == "post") {
            double s = 0;
            for (std::size_t j = 1; j < cells.size(); ++j) s += std::stod(cells[j]);
            worst = std::max(worst, std::abs(s - 1));
          }
        }
        const auto pgm = pgm_without_comments(slurp(stem.string() + ".pgm"));
        ok = ok && pgm.rfind("P2\n21 21\n255\n", 0) == 0;
        std::istringstream px(pgm.substr(std::min(pgm.size(), std::string("P2\n21 21\n255\n").size())));
        int v = 0, n = 0;
        while (px >> v) n += (v >= 0 && v <= 255);
        ok = ok && n == 21 * 21;
        const auto svg = slurp(stem.string() + ".svg");
        ok = ok && svg.rfind("<svg", 0) == 0 && svg.find("</svg>") != std::string::npos;
      }
    }
    const fs::path diff = dir / ("diff_head" + std::to_string(h));
    for (const char* ext : {".csv", ".pgm", ".svg"}) ok = ok && fs::exists(diff.string() + ext);
  }
  const auto entropy = split(slurp(dir / "entropy.csv"), '\n');
  ok = ok && entropy.size() == 1 + 4 * 21 && worst <= 1e-6;
  return {ok, "20-token sample, 4 heads of 21x21 in CSV/PGM/SVG, max |row sum - 1| " + fmtd("%.2g", worst) +
                  ", difference maps and entropy.csv written to " + dir.string()};
}

int run_cli(const std::string& cmd) {
  return std::system((cmd + " > /dev/null 2>&1").c_str());
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

Outcome determinism(const std::string& cli, const fs::path& corpus, const fs::path& work) {
  if (cli.empty() || !fs::exists(cli)) return {false, "eyetrans binary not found; pass --cli"};
  std::vector<std::map<std::string, std::string>> trees;
  std::string failed;
  for (int pass = 0; pass < 2; ++pass) {
    const fs::path d = work / ("pass" + std::to_string(pass));
    fs::remove_all(d);
    fs::create_directories(d);
    json config = {{"format_version", 1},
                   {"task", "functional"},
                   {"dataset", "ds"},
                   {"output", "runs"},
                   {"seeds", {0, 1}},
                   {"modes", {"eyetrans", "baseline"}},
                   {"grid", "0,0;0.1,0.1"},
                   {"train", {{"epochs", 2}, {"batch", 16}}},
                   {"model", {{"width", 8}, {"heads", 2}, {"encoder_layers", 1}}}};
    std::ofstream(d / "config.json") << config.dump(2) << "\n";
    const std::vector<std::string> steps = {
        cli + " parse " + q(corpus) + " -o " + q(d / "asts.jsonl"),
        cli + " ingest " + q(d / "asts.jsonl") + " -o " + q(d / "asts_ingested.jsonl"),
        cli + " synth-gaze --asts " + q(d / "asts.jsonl") + " --participants 2 --seed 5 -o " + q(d / "trials.jsonl"),
        cli + " synth-gaze --mode planted --seed 5 -o " + q(d / "planted"),
        cli + " dataset --asts " + q(d / "asts.jsonl") + " --trials " + q(d / "trials.jsonl") + " -o " + q(d / "ds"),
        cli + " train --config " + q(d / "config.json"),
        cli + " eval --config " + q(d / "config.json") + " --baseline -o " + q(d / "eval.json"),
        cli + " attnmap --checkpoint " + q(d / "runs/eyetrans/ckpt/R0_N0_seed0.eytr") + " --dataset " + q(d / "ds") +
            " --paired " + q(d / "runs/baseline/ckpt/R0_N0_seed0.eytr") + " -o " + q(d / "maps"),
    };
    for (const auto& s : steps) {
      if (run_cli(s) != 0 && failed.empty()) failed = s;
    }
    trees.push_back(tree_bytes(d));
  }
  if (!failed.empty()) return {false, "command failed: " + failed};
  std::size_t differing = 0;
  for (const auto& [k, v] : trees[0]) {
    auto it = trees[1].find(k);
    if (it == trees[1].end() || it->second != v) ++differing;
  }
  if (trees[0].size() != trees[1].size()) ++differing;
  const bool has_ckpt = trees[0].count("runs/eyetrans/ckpt/R0.1_N0.1_seed1.eytr") == 1;
  return {differing == 0 && has_ckpt && trees[0].size() > 20,
          std::to_string(trees[0].size()) + " artifacts from parse/ingest/synth-gaze/dataset/train/eval/attnmap, " +
              std::to_string(differing) + " differ between two runs"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EyeTrans acceptance checks"};
  std::string cli, source_dir = EYETRANS_SOURCE_DIR;
  fs::path work = fs::temp_directory_path() / "eyetrans_acceptance";
  app.add_option("--cli", cli, "path to the eyetrans binary");
  app.add_option("--work", work, "scratch directory");
  app.add_option("--source-dir", source_dir, "repository root");
  std::vector<int> only;
  app.add_option("--only", only, "run only these criteria (4 is implied by 5, 10)");
  CLI11_PARSE(app, argc, argv);

  fs::create_directories(work);
  PlantedRun planted;
  const fs::path cfg_path = fs::path(source_dir) / "configs" / "planted.json";
  planted.cfg = experiment_from_json(json::parse(slurp(cfg_path)), cfg_path.parent_path());
  planted.cfg.output = work / "planted";
  planted.cfg.threads = std::max(planted.cfg.threads, env_threads());
  planted.n_classes = static_cast<int>(planted.cfg.planted->class_heights.size());
  fs::remove_all(planted.cfg.output);

  int failures = 0;
  auto wanted = [&](int id) {
    if (only.empty()) return true;
    for (int i : only)
      if (i == id || (id == 4 && (i == 5 || i == 10))) return true;
    return false;
  };
  auto report = [&](int id, const char* name, const std::function<Outcome()>& f) {
    if (!wanted(id)) return;
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << id << " " << name << ": " << o.detail << std::endl;
  };

  double planted_seconds = 0;
  report(1, "gradient correctness", gradient_correctness);
  report(2, "fusion identity suite", fusion_identity);
  report(3, "shared-component property", shared_component);
  report(4, "planted-signal separation", [&] { return planted_separation(planted, planted_seconds); });
  report(5, "robustness trend", [&] { return robustness_trend(planted); });
  if (wanted(5)) try {
    std::cout << "INFO 5 eval-only perturbation of the (0,0) models, mean accuracy (%): " << eval_only_trend(planted)
              << std::endl;
  } catch (const std::exception& e) {
    std::cout << "INFO 5 eval-only trend unavailable: " << e.what() << std::endl;
  }
  report(6, "overfit reachability", overfit);
  report(7, "I-VT oracle", ivt_oracle);
  report(8, "metric oracles", metric_oracles);
  report(9, "augmentation invariants", augmentation_invariants);
  report(10, "attention-map export", [&] { return attention_export(planted, work / "attnmap"); });
  report(11, "determinism", [&] {
    return determinism(cli, fs::path(source_dir) / "data" / "micro_corpus.json", work / "determinism");
  });
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
