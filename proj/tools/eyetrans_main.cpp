#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "eyetrans/ast_io.hpp"
#include "eyetrans/attnmap.hpp"
#include "eyetrans/augment.hpp"
#include "eyetrans/checkpoint.hpp"
#include "eyetrans/experiment.hpp"
#include "eyetrans/gaze.hpp"
#include "eyetrans/gradcheck.hpp"
#include "eyetrans/io.hpp"
#include "eyetrans/java_parser.hpp"
#include "eyetrans/planted.hpp"

using namespace eyetrans;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_file_atomic(out, text);
  }
}

Ast retag(const Ast& a, std::string id, std::optional<int> label, std::vector<std::string> summary) {
  std::vector<AstNode> nodes;
  for (const auto& [_, n] : a.nodes()) nodes.push_back(n);
  return Ast(std::move(id), a.root(), std::move(nodes), label, std::move(summary));
}

std::vector<Ast> read_asts(const fs::path& path) {
  if (!fs::exists(path)) throw MissingDataset("cannot open " + path.string());
  std::ifstream in(path);
  if (path.extension() == ".json") {
    json doc = json::parse(in);
    std::vector<Ast> out;
    if (doc.is_array()) {
      for (const auto& d : doc) out.push_back(ingest_ast(d));
    } else {
      out.push_back(ingest_ast(doc));
    }
    return out;
  }
  return read_ast_jsonl(in);
}

std::string asts_jsonl(const std::vector<Ast>& asts) {
  std::ostringstream os;
  write_ast_jsonl(os, asts);
  return os.str();
}

// Corpus entries: {"id", "source", "label"?, "summary"?}.
std::vector<Ast> parse_corpus(const json& corpus) {
  if (!corpus.is_array()) throw FormatError("corpus must be a JSON array");
  std::vector<Ast> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const json& e = corpus[i];
    const std::string id = e.value("id", "m" + std::to_string(i));
    try {
      Ast a = parse_java_method(e.at("source").get<std::string>()).ast;
      std::optional<int> label;
      if (e.contains("label") && !e["label"].is_null()) label = e["label"].get<int>();
      out.push_back(retag(a, id, label, tokenize_summary(e.value("summary", std::string{}))));
    } catch (const json::exception& ex) {
      throw FormatError(id + ": " + ex.what());
    } catch (const SyntaxError& ex) {
      throw FormatError(id + ": " + ex.what());
    }
  }
  return out;
}

std::map<std::pair<std::string, std::string>, QualityRating> read_ratings(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingDataset("cannot open " + path.string());
  std::map<std::pair<std::string, std::string>, QualityRating> out;
  for (const auto& r : read_ratings_csv(in)) out[{r.participant_id, r.method_id}] = r.rating;
  return out;
}

void apply_ratings(std::vector<TrialRecord>& trials, const fs::path& path) {
  const auto ratings = read_ratings(path);
  for (auto& t : trials) {
    if (auto it = ratings.find({t.participant_id, t.method_id}); it != ratings.end()) t.rating = it->second;
  }
}

ExperimentConfig load_experiment(const std::string& path) {
  if (path.empty()) throw ConfigError("--config is required");
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  ExperimentConfig c = experiment_from_json(j, fs::path(path).parent_path());
  c.threads = std::max(c.threads, env_threads());
  return c;
}

struct Overrides {
  std::string tier;
  std::vector<std::uint64_t> seeds;
  std::string grid;
  bool baseline = false;
  std::string output;
};

void apply(ExperimentConfig& c, const Overrides& o) {
  if (!o.tier.empty()) c.tier = std::string(tier_name(tier_from_name(o.tier)));
  if (!o.seeds.empty()) c.seeds = o.seeds;
  if (!o.grid.empty()) c.grid = parse_grid(o.grid);
  if (!o.output.empty()) c.output = o.output;
  if (o.baseline && std::find(c.modes.begin(), c.modes.end(), RunMode::baseline) == c.modes.end()) {
    c.modes.push_back(RunMode::baseline);
  }
}

DatasetRow pick_sample(const LoadedDataset& d, const std::string& sample) {
  for (const auto* split : {&d.test, &d.train})
    for (const auto& r : *split)
      if (r.id == sample) return r;
  char* end = nullptr;
  const long idx = std::strtol(sample.c_str(), &end, 10);
  if (!sample.empty() && *end == '\0' && idx >= 0 && static_cast<std::size_t>(idx) < d.test.size()) return d.test[idx];
  throw ConfigError("no sample '" + sample + "' in the dataset");
}

bool checkpoint_is_baseline(const Checkpoint& c) {
  const json& m = c.metadata;
  return m.contains("identity") && m["identity"].contains("run") && m["identity"]["run"].value("mode", "") == "baseline";
}

int run(int argc, char** argv) {
  CLI::App app{"EyeTrans: gaze-informed code summarization workbench"};
  app.require_subcommand(1);

  // parse
  std::string parse_in, parse_out, parse_id, parse_summary;
  std::optional<int> parse_label;
  auto* parse = app.add_subcommand("parse", "Parse Java source (a .java method or a JSON corpus) into ASTs");
  parse->add_option("input", parse_in, "method.java or corpus.json")->required()->check(CLI::ExistingFile);
  parse->add_option("-o,--output", parse_out, "output file (stdout by default)");
  parse->add_option("--method-id", parse_id, "method id for a single .java input");
  parse->add_option("--label", parse_label, "class label for a single .java input");
  parse->add_option("--summary", parse_summary, "summary text for a single .java input");

  // ingest
  std::string ingest_in, ingest_out;
  auto* ingest = app.add_subcommand("ingest", "Validate structured AST documents and normalize them to JSONL");
  ingest->add_option("input", ingest_in, "AST .json or .jsonl")->required()->check(CLI::ExistingFile);
  ingest->add_option("-o,--output", ingest_out, "output JSONL (stdout by default)");

  // gaze
  std::string gaze_samples, gaze_source, gaze_out, gaze_participant = "p0", gaze_method, gaze_ratings;
  double char_w = 10, char_h = 20, origin_x = 0, origin_y = 0;
  double threshold = kSaccadeThresholdPxPer100Ms, min_fix = kDefaultMinFixationMs;
  auto* gaze = app.add_subcommand("gaze", "Turn a raw gaze CSV over a method into fixations and switches");
  gaze->add_option("--samples", gaze_samples, "CSV with t_ms,x_px,y_px,valid")->required()->check(CLI::ExistingFile);
  gaze->add_option("--source", gaze_source, "Java method shown to the participant")->required()->check(CLI::ExistingFile);
  gaze->add_option("--participant", gaze_participant, "participant id");
  gaze->add_option("--method-id", gaze_method, "method id (defaults to the parsed method name)");
  gaze->add_option("--ratings", gaze_ratings, "ratings CSV participant_id,method_id,a,b,c,d")->check(CLI::ExistingFile);
  gaze->add_option("--char-width", char_w, "px per character");
  gaze->add_option("--line-height", char_h, "px per line");
  gaze->add_option("--origin-x", origin_x);
  gaze->add_option("--origin-y", origin_y);
  gaze->add_option("--threshold", threshold, "saccade velocity threshold, px per 100 ms");
  gaze->add_option("--min-fixation", min_fix, "minimum fixation duration, ms");
  gaze->add_option("-o,--output", gaze_out, "trial JSONL line (stdout by default)");

  // synth-gaze
  std::string synth_asts, synth_out, synth_mode = "markov", synth_ratings;
  int synth_participants = 3, synth_fixations = 12;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth-gaze", "Generate synthetic trials (markov) or the planted-signal dataset");
  synth->add_option("--asts", synth_asts, "AST JSONL (markov mode)")->check(CLI::ExistingFile);
  synth->add_option("--mode", synth_mode, "markov or planted")->check(CLI::IsMember({"markov", "planted"}));
  synth->add_option("--participants", synth_participants, "readers per method")->check(CLI::PositiveNumber);
  synth->add_option("--fixations", synth_fixations, "fixations per trial")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--ratings", synth_ratings, "ratings CSV; otherwise ratings are drawn from the seed")
      ->check(CLI::ExistingFile);
  synth->add_option("-o,--output", synth_out, "trials JSONL (markov) or dataset directory (planted)")->required();

  // dataset
  std::string ds_asts, ds_trials, ds_ratings, ds_out, ds_tier = "original";
  DatasetBuildConfig dcfg;
  bool no_paraphrase = false;
  auto* dataset = app.add_subcommand("dataset", "Augment, dedup, tier-filter and split into a dataset directory");
  dataset->add_option("--asts", ds_asts, "AST JSONL")->required()->check(CLI::ExistingFile);
  dataset->add_option("--trials", ds_trials, "trials JSONL")->required()->check(CLI::ExistingFile);
  dataset->add_option("--ratings", ds_ratings, "ratings CSV overriding the trial ratings")->check(CLI::ExistingFile);
  dataset->add_option("--tier", ds_tier, "original, filtered or strict");
  dataset->add_option("-k,--augment-k", dcfg.augment_k, "permuted variants per trial");
  dataset->add_option("--seed", dcfg.augment_seed, "augmentation seed");
  dataset->add_option("--split-seed", dcfg.split_seed, "train/test split seed");
  dataset->add_option("--train-fraction", dcfg.train_fraction);
  dataset->add_flag("--no-paraphrase", no_paraphrase, "keep summaries of permuted variants verbatim");
  dataset->add_option("-o,--output", ds_out, "dataset directory")->required();

  // train
  std::string train_cfg;
  Overrides train_ov;
  auto* trainc = app.add_subcommand("train", "Run the (mode x grid x seed) experiment described by a config");
  trainc->add_option("--config", train_cfg, "experiment JSON")->required()->check(CLI::ExistingFile);
  trainc->add_option("--tier", train_ov.tier, "only train on rows of this tier");
  trainc->add_option("--seed", train_ov.seeds, "replace the seed list (repeatable)");
  trainc->add_option("--grid", train_ov.grid, "R0,N0;R1,N1;...");
  trainc->add_flag("--baseline", train_ov.baseline, "also train the switch-free baseline");
  trainc->add_option("--output", train_ov.output, "output directory");

  // eval
  std::string eval_ckpt, eval_dataset, eval_cfg, eval_out, eval_grid, eval_tier;
  bool eval_baseline = false;
  Overrides eval_ov;
  auto* evalc = app.add_subcommand("eval", "Evaluate a checkpoint, or every run of an experiment config");
  evalc->add_option("--checkpoint", eval_ckpt, "model checkpoint")->check(CLI::ExistingFile);
  evalc->add_option("--dataset", eval_dataset, "dataset directory");
  evalc->add_option("--config", eval_cfg, "experiment JSON; evaluates each run's checkpoint")->check(CLI::ExistingFile);
  evalc->add_option("--grid", eval_grid, "perturbation cell R,N (or cells with --config)");
  evalc->add_option("--tier", eval_tier, "only evaluate rows of this tier");
  evalc->add_option("--seed", eval_ov.seeds, "seed list with --config (repeatable)");
  evalc->add_flag("--baseline", eval_baseline, "strip switches (with --config: also evaluate baseline runs)");
  evalc->add_option("-o,--output", eval_out, "metric report JSON (stdout by default)");

  // attnmap
  std::string am_ckpt, am_dataset, am_sample = "0", am_out, am_paired;
  bool am_baseline = false;
  auto* attn = app.add_subcommand("attnmap", "Export first-block attention maps as CSV, PGM and SVG");
  attn->add_option("--checkpoint", am_ckpt, "eyetrans checkpoint")->required()->check(CLI::ExistingFile);
  attn->add_option("--dataset", am_dataset, "dataset directory")->required();
  attn->add_option("--sample", am_sample, "row id, or index into the test split");
  attn->add_option("--paired", am_paired, "baseline checkpoint for difference and entropy maps")
      ->check(CLI::ExistingFile);
  attn->add_flag("--baseline", am_baseline, "strip switches for the main checkpoint");
  attn->add_option("-o,--output", am_out, "output directory")->required();

  // gradcheck
  bool mutate = false;
  double gc_threshold = 1e-3;
  auto* gradc = app.add_subcommand("gradcheck", "Finite-difference check of both models in 64-bit floats");
  gradc->add_flag("--mutate", mutate, "sign-flip the matmul gradient rule to confirm the checker fails");
  gradc->add_option("--threshold", gc_threshold, "maximum relative error");

  CLI11_PARSE(app, argc, argv);

  if (*parse) {
    std::vector<Ast> asts;
    if (fs::path(parse_in).extension() == ".json") {
      asts = parse_corpus(json::parse(read_file(parse_in)));
    } else {
      Ast a = parse_java_method(read_file(parse_in)).ast;
      asts.push_back(retag(a, parse_id.empty() ? a.method_id() : parse_id, parse_label, tokenize_summary(parse_summary)));
    }
    emit(parse_out, asts_jsonl(asts));
    std::cerr << "parsed " << asts.size() << " method(s)\n";
    return 0;
  }

  if (*ingest) {
    emit(ingest_out, asts_jsonl(read_asts(ingest_in)));
    return 0;
  }

  if (*gaze) {
    std::ifstream in(gaze_samples);
    const auto samples = read_gaze_csv(in);
    const std::string source = read_file(gaze_source);
    const auto parsed = parse_java_method(source);
    const auto boxes = layout_tokens(parsed.spans, char_w, char_h, {origin_x, origin_y});
    const auto proc = process_gaze(samples, boxes, threshold, min_fix);
    TrialRecord t{gaze_participant, gaze_method.empty() ? parsed.ast.method_id() : gaze_method, proc.switches, {}};
    if (!gaze_ratings.empty()) {
      std::vector<TrialRecord> ts{t};
      apply_ratings(ts, gaze_ratings);
      t = ts[0];
    }
    json j = trial_to_json(t);
    json fx = json::array();
    for (const auto& f : proc.fixations) {
      fx.push_back({{"x", f.x}, {"y", f.y}, {"start", f.start}, {"end", f.end}, {"duration", f.duration},
                    {"node_id", f.node_id ? json(*f.node_id) : json(nullptr)}});
    }
    j["fixations"] = fx;
    emit(gaze_out, j.dump() + "\n");
    std::cerr << proc.fixations.size() << " fixations, " << proc.switches.size() << " switches\n";
    return 0;
  }

  if (*synth) {
    if (synth_mode == "planted") {
      PlantedTaskConfig pc;
      pc.seed = synth_seed;
      auto task = make_planted_task(pc);
      BuiltDataset b;
      b.split = std::move(task.split);
      b.manifest = {{"format_version", kDatasetFormatVersion}, {"source", "planted"},   {"seed", synth_seed},
                    {"n_asts", pc.n_asts},                     {"n_classes", task.n_classes},
                    {"train_rows", b.split.train.size()},      {"test_rows", b.split.test.size()},
                    {"majority_rate", task.majority_rate}};
      write_dataset(synth_out, b);
      std::cout << b.manifest.dump(2) << "\n";
      return 0;
    }
    if (synth_asts.empty()) throw ConfigError("markov mode needs --asts");
    const auto asts = read_asts(synth_asts);
    std::vector<TrialRecord> trials;
    for (const auto& a : asts) {
      for (int p = 0; p < synth_participants; ++p) {
        TrialRecord t;
        t.participant_id = "s" + std::to_string(p);
        t.method_id = a.method_id();
        const std::uint64_t s = mix_seed(synth_seed, stable_hash(t.participant_id + "/" + t.method_id));
        t.switches = synthesize_gaze(a, GazeMode::markov, s, synth_fixations);
        std::mt19937_64 rng(mix_seed(s, 0x5241));
        std::uniform_int_distribution<int> score(1, 5);
        t.rating = {score(rng), score(rng), score(rng), score(rng)};
        trials.push_back(std::move(t));
      }
    }
    if (!synth_ratings.empty()) apply_ratings(trials, synth_ratings);
    emit(synth_out, trials_to_jsonl(trials));
    std::cerr << trials.size() << " trials\n";
    return 0;
  }

  if (*dataset) {
    dcfg.tier = tier_from_name(ds_tier);
    dcfg.paraphrase_variants = !no_paraphrase;
    const auto asts = read_asts(ds_asts);
    auto trials = read_trials_jsonl(ds_trials);
    if (!ds_ratings.empty()) apply_ratings(trials, ds_ratings);
    const auto built = build_dataset(asts, trials, dcfg);
    write_dataset(ds_out, built);
    std::cout << built.manifest.dump(2) << "\n";
    return 0;
  }

  if (*trainc) {
    ExperimentConfig c = load_experiment(train_cfg);
    apply(c, train_ov);
    const auto result = run_experiment(c);
    std::cout << report_csv(result.report);
    return 0;
  }

  if (*evalc) {
    if (!eval_cfg.empty()) {
      ExperimentConfig c = load_experiment(eval_cfg);
      eval_ov.tier = eval_tier;
      eval_ov.grid = eval_grid;
      eval_ov.baseline = eval_baseline;
      apply(c, eval_ov);
      std::vector<DatasetRow> test;
      if (c.planted) {
        test = make_planted_task(*c.planted).split.test;
      } else {
        test = select_tier(load_dataset(c.dataset).test, tier_from_name(c.tier));
      }
      std::vector<RunResult> runs;
      for (RunMode m : c.modes)
        for (const auto& cell : c.grid)
          for (auto seed : c.seeds) {
            RunResult r{m, cell, seed, {}, {}, run_checkpoint_path(c, m, cell, seed)};
            auto loaded = load_model(r.checkpoint);
            TrainConfig tc = c.train;
            tc.seed = seed;
            tc.baseline = m == RunMode::baseline;
            r.final_metrics = evaluate(*loaded.model, test, tc, {cell.drop_rate, cell.noise, c.apply_at}).metrics();
            runs.push_back(std::move(r));
          }
      const json report = build_report(c, runs);
      if (eval_out.empty()) {
        std::cout << report_csv(report);
      } else {
        write_file_atomic(eval_out, report.dump(2) + "\n");
      }
      return 0;
    }
    if (eval_ckpt.empty() || eval_dataset.empty()) throw ConfigError("eval needs --checkpoint and --dataset, or --config");
    auto loaded = load_model(eval_ckpt);
    auto data = load_dataset(eval_dataset);
    auto test = eval_tier.empty() ? data.test : select_tier(data.test, tier_from_name(eval_tier));
    GridCell cell;
    if (!eval_grid.empty()) {
      auto cells = parse_grid(eval_grid);
      if (cells.size() != 1) throw ConfigError("eval with --checkpoint takes a single grid cell");
      cell = cells[0];
    }
    TrainConfig tc;
    tc.seed = loaded.checkpoint.seed;
    tc.baseline = eval_baseline || checkpoint_is_baseline(loaded.checkpoint);
    const auto rep = evaluate(*loaded.model, test, tc, {cell.drop_rate, cell.noise, ApplyAt::both});
    json j = rep.to_json(&data.vocab);
    j["R"] = cell.drop_rate;
    j["N"] = cell.noise;
    j["baseline"] = tc.baseline;
    emit(eval_out, j.dump(2) + "\n");
    return 0;
  }

  if (*attn) {
    auto data = load_dataset(am_dataset);
    const DatasetRow row = pick_sample(data, am_sample);
    auto main_model = load_model(am_ckpt);
    const bool main_baseline = am_baseline || checkpoint_is_baseline(main_model.checkpoint);
    const auto dump = attention_dump(*main_model.model, row, main_baseline);
    auto written = export_attention(am_out, dump);
    if (!am_paired.empty()) {
      auto base_model = load_model(am_paired);
      const auto base = attention_dump(*base_model.model, row, true);
      auto more = export_attention(fs::path(am_out) / "baseline", base);
      written.insert(written.end(), more.begin(), more.end());
      more = export_paired(am_out, dump, base);
      written.insert(written.end(), more.begin(), more.end());
    }
    std::cout << "sample " << row.id << ": " << dump.labels.size() << "x" << dump.labels.size() << " per head\n";
    for (const auto& p : written) std::cout << p.string() << "\n";
    return 0;
  }

  if (*gradc) {
    const auto s = run_gradcheck(mutate, gc_threshold);
    std::cout << s.text();
    return s.pass ? 0 : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
