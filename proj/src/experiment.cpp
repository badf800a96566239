#include "eyetrans/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <set>
#include <sstream>
#include <thread>

#include "eyetrans/augment.hpp"
#include "eyetrans/checkpoint.hpp"
#include "eyetrans/io.hpp"

namespace eyetrans {

using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string cell_tag(const GridCell& c) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "R%g_N%g", c.drop_rate, c.noise);
  return buf;
}

void check_keys(const json& j, const std::set<std::string>& known, const std::string& prefix) {
  if (!j.is_object()) throw ConfigError(prefix.empty() ? "config must be an object" : prefix + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("unknown config key " + prefix + it.key());
  }
}

template <typename V>
V get(const json& j, const char* key, const std::string& prefix) {
  try {
    return j.at(key).get<V>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for " + prefix + key);
  }
}

RunMode mode_from_name(const std::string& s) {
  if (s == "eyetrans") return RunMode::eyetrans;
  if (s == "baseline") return RunMode::baseline;
  throw ConfigError("unknown mode '" + s + "'");
}

PlantedTaskConfig planted_from_json(const json& j) {
  check_keys(j, {"n_asts", "n_templates", "n_fixations", "seed", "class_weights", "class_heights"}, "planted.");
  PlantedTaskConfig p;
  if (j.contains("n_asts")) p.n_asts = get<int>(j, "n_asts", "planted.");
  if (j.contains("n_templates")) p.n_templates = get<int>(j, "n_templates", "planted.");
  if (j.contains("n_fixations")) p.n_fixations = get<int>(j, "n_fixations", "planted.");
  if (j.contains("seed")) p.seed = get<std::uint64_t>(j, "seed", "planted.");
  if (j.contains("class_weights")) p.class_weights = get<std::vector<double>>(j, "class_weights", "planted.");
  if (j.contains("class_heights")) {
    p.class_heights = get<std::vector<std::pair<int, int>>>(j, "class_heights", "planted.");
  }
  return p;
}

json planted_to_json(const PlantedTaskConfig& p) {
  return {{"n_asts", p.n_asts},         {"n_templates", p.n_templates},
          {"n_fixations", p.n_fixations}, {"seed", p.seed},
          {"class_weights", p.class_weights}, {"class_heights", p.class_heights}};
}

json log_json(const std::vector<EpochLog>& log) {
  json a = json::array();
  for (const auto& e : log) {
    json m = json::object();
    for (const auto& [k, v] : e.metrics) m[k] = v;
    a.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"metrics", m}});
  }
  return a;
}

std::vector<EpochLog> log_from_json(const json& a, TaskKind task) {
  std::vector<EpochLog> out;
  for (const auto& e : a) {
    EpochLog l;
    l.epoch = e.at("epoch").get<int>();
    l.loss = e.at("loss").get<double>();
    for (const auto& name : metric_names(task)) {
      if (e.at("metrics").contains(name)) l.metrics.emplace_back(name, e["metrics"][name].get<double>());
    }
    out.push_back(std::move(l));
  }
  return out;
}

struct Data {
  std::vector<DatasetRow> train, test;
  Vocabulary vocab;
  std::string fingerprint;  // content hash of a loaded dataset, empty for planted
};

Data load_data(const ExperimentConfig& cfg) {
  Data d;
  if (cfg.planted) {
    if (cfg.task != TaskKind::functional) throw ConfigError("the planted task is a classification task");
    auto t = make_planted_task(*cfg.planted);
    d.train = std::move(t.split.train);
    d.test = std::move(t.split.test);
    return d;
  }
  if (cfg.dataset.empty()) throw ConfigError("config needs dataset or planted");
  auto l = load_dataset(cfg.dataset);
  const Tier tier = tier_from_name(cfg.tier);
  d.train = select_tier(l.train, tier);
  d.test = select_tier(l.test, tier);
  if (d.train.empty()) throw EmptyTier("no training rows in tier " + cfg.tier);
  d.vocab = std::move(l.vocab);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(stable_hash(rows_to_jsonl(l.train) + rows_to_jsonl(l.test))));
  d.fingerprint = hex;
  return d;
}

// The dataset enters by content, so relocating it keeps checkpoints valid and
// byte-identical.
json run_identity(const ExperimentConfig& cfg, const Data& data, RunMode mode, const GridCell& cell,
                  std::uint64_t seed) {
  json j = experiment_to_json(cfg);
  for (const char* k : {"output", "threads", "resume", "seeds", "modes", "grid", "save_checkpoints"}) j.erase(k);
  if (j.contains("dataset")) j["dataset"] = data.fingerprint;
  j["run"] = {{"mode", mode_name(mode)}, {"R", cell.drop_rate}, {"N", cell.noise}, {"seed", seed}};
  return j;
}

RunResult execute(const ExperimentConfig& cfg, const Data& data, const ModelConfig& mc, RunMode mode,
                  const GridCell& cell, std::uint64_t seed) {
  RunResult r;
  r.mode = mode;
  r.cell = cell;
  r.seed = seed;
  r.checkpoint = run_checkpoint_path(cfg, mode, cell, seed);

  TaskModel model(cfg.task, mc);
  model.init(seed);
  TrainState state;
  const json identity = run_identity(cfg, data, mode, cell, seed);
  if (cfg.resume && std::filesystem::exists(r.checkpoint)) {
    Checkpoint c = load_checkpoint(r.checkpoint);
    if (c.metadata.value("identity", json()) == identity) {
      restore_checkpoint(c, model, state);
      r.log = log_from_json(c.metadata.value("history", json::array()), cfg.task);
    }
  }

  TrainConfig tc = cfg.train;
  tc.seed = seed;
  tc.baseline = mode == RunMode::baseline;
  PerturbConfig pc{cell.drop_rate, cell.noise, cfg.apply_at};
  auto save = [&](const TrainState& st) {
    if (!cfg.save_checkpoints) return;
    json meta = {{"identity", identity}, {"history", log_json(r.log)}};
    save_checkpoint(r.checkpoint, make_checkpoint(model, st, seed, std::move(meta)));
  };
  train(model, state, data.train, data.test, tc, pc, [&](const EpochLog& e, const TrainState& st) {
    r.log.push_back(e);
    save(st);
  });
  if (!r.log.empty() && !r.log.back().metrics.empty()) {
    r.final_metrics = r.log.back().metrics;
  } else if (!data.test.empty()) {
    r.final_metrics = evaluate(model, data.test, tc, pc).metrics();
  }
  return r;
}

std::string log_csv(const ExperimentConfig& cfg, const std::vector<RunResult>& runs, RunMode mode) {
  std::string out = "epoch,seed,tier,R,N,loss";
  for (const auto& m : metric_names(cfg.task)) out += "," + m;
  out += '\n';
  for (const auto& r : runs) {
    if (r.mode != mode) continue;
    for (const auto& e : r.log) {
      out += std::to_string(e.epoch) + "," + std::to_string(r.seed) + "," + cfg.tier + "," + num(r.cell.drop_rate) +
             "," + num(r.cell.noise) + "," + num(e.loss);
      for (const auto& name : metric_names(cfg.task)) {
        out += ",";
        for (const auto& [k, v] : e.metrics)
          if (k == name) out += num(v);
      }
      out += '\n';
    }
  }
  return out;
}

}  // namespace

std::vector<GridCell> parse_grid(const std::string& text) {
  std::vector<GridCell> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ';')) {
    if (cell.find_first_not_of(' ') == std::string::npos) continue;
    const auto comma = cell.find(',');
    if (comma == std::string::npos) throw ConfigError("grid cell '" + cell + "' is not R,N");
    try {
      std::size_t used = 0;
      GridCell g;
      const std::string r = cell.substr(0, comma), n = cell.substr(comma + 1);
      g.drop_rate = std::stod(r, &used);
      if (r.find_first_not_of(' ', used) != std::string::npos) throw std::invalid_argument(r);
      g.noise = std::stod(n, &used);
      if (n.find_first_not_of(' ', used) != std::string::npos) throw std::invalid_argument(n);
      PerturbConfig{g.drop_rate, g.noise}.validate();
      out.push_back(g);
    } catch (const std::invalid_argument&) {
      throw ConfigError("grid cell '" + cell + "' is not numeric");
    } catch (const std::out_of_range&) {
      throw ConfigError("grid cell '" + cell + "' is out of range");
    }
  }
  if (out.empty()) throw ConfigError("empty grid");
  return out;
}

std::string_view mode_name(RunMode m) { return m == RunMode::eyetrans ? "eyetrans" : "baseline"; }

int env_threads() {
  const char* v = std::getenv("EYETRANS_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1 || n > 256) throw ConfigError("EYETRANS_THREADS must be an integer in [1, 256]");
  return static_cast<int>(n);
}

ExperimentConfig experiment_from_json(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j,
             {"format_version", "task", "dataset", "planted", "output", "tier", "seeds", "modes", "grid", "apply_at",
              "train", "model", "fusion", "save_checkpoints", "resume", "threads"},
             "");
  if (j.contains("format_version") && j["format_version"] != 1) throw ConfigError("unsupported format_version");
  ExperimentConfig c;
  auto rel = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  if (j.contains("task")) c.task = task_from_name(get<std::string>(j, "task", ""));
  if (j.contains("dataset")) c.dataset = rel(get<std::string>(j, "dataset", ""));
  if (j.contains("planted")) c.planted = planted_from_json(j["planted"]);
  if (j.contains("output")) c.output = rel(get<std::string>(j, "output", ""));
  if (j.contains("tier")) c.tier = std::string(tier_name(tier_from_name(get<std::string>(j, "tier", ""))));
  if (j.contains("seeds")) c.seeds = get<std::vector<std::uint64_t>>(j, "seeds", "");
  if (c.seeds.empty()) throw ConfigError("seeds must not be empty");
  if (j.contains("modes")) {
    c.modes.clear();
    for (const auto& m : get<std::vector<std::string>>(j, "modes", "")) c.modes.push_back(mode_from_name(m));
    if (c.modes.empty()) throw ConfigError("modes must not be empty");
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    if (g.is_string()) {
      c.grid = parse_grid(g.get<std::string>());
    } else {
      c.grid.clear();
      for (const auto& cell : g) {
        if (!cell.is_array() || cell.size() != 2) throw ConfigError("grid entries are [R, N]");
        GridCell gc{cell[0].get<double>(), cell[1].get<double>()};
        PerturbConfig{gc.drop_rate, gc.noise}.validate();
        c.grid.push_back(gc);
      }
      if (c.grid.empty()) throw ConfigError("empty grid");
    }
  }
  if (j.contains("apply_at")) c.apply_at = apply_at_from_name(get<std::string>(j, "apply_at", ""));
  if (j.contains("train")) {
    const json& t = j["train"];
    check_keys(t, {"epochs", "lr", "batch", "eval_each_epoch"}, "train.");
    if (t.contains("epochs")) c.train.epochs = get<int>(t, "epochs", "train.");
    if (t.contains("lr")) c.train.lr = get<double>(t, "lr", "train.");
    if (t.contains("batch")) c.train.batch = get<int>(t, "batch", "train.");
    if (t.contains("eval_each_epoch")) c.train.eval_each_epoch = get<bool>(t, "eval_each_epoch", "train.");
    if (c.train.epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (c.train.batch < 1) throw ConfigError("train.batch must be >= 1");
    if (!(c.train.lr > 0)) throw ConfigError("train.lr must be > 0");
  }
  if (j.contains("model")) c.model = model_config_from_json(j["model"], c.model);
  if (j.contains("fusion")) c.model = model_config_from_json(json{{"fusion", j["fusion"]}}, c.model);
  if (j.contains("save_checkpoints")) c.save_checkpoints = get<bool>(j, "save_checkpoints", "");
  if (j.contains("resume")) c.resume = get<bool>(j, "resume", "");
  if (j.contains("threads")) c.threads = get<int>(j, "threads", "");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  return c;
}

json experiment_to_json(const ExperimentConfig& c) {
  json modes = json::array();
  for (auto m : c.modes) modes.push_back(mode_name(m));
  json grid = json::array();
  for (const auto& g : c.grid) grid.push_back({g.drop_rate, g.noise});
  json j = {{"format_version", 1},
            {"task", task_name(c.task)},
            {"output", c.output.string()},
            {"tier", c.tier},
            {"seeds", c.seeds},
            {"modes", modes},
            {"grid", grid},
            {"apply_at", apply_at_name(c.apply_at)},
            {"train",
             {{"epochs", c.train.epochs},
              {"lr", c.train.lr},
              {"batch", c.train.batch},
              {"eval_each_epoch", c.train.eval_each_epoch}}},
            {"model", model_config_to_json(c.model)},
            {"save_checkpoints", c.save_checkpoints},
            {"resume", c.resume},
            {"threads", c.threads}};
  if (c.planted) j["planted"] = planted_to_json(*c.planted);
  else j["dataset"] = c.dataset.string();
  return j;
}

std::filesystem::path run_checkpoint_path(const ExperimentConfig& c, RunMode mode, const GridCell& cell,
                                          std::uint64_t seed) {
  return c.output / std::string(mode_name(mode)) / "ckpt" / (cell_tag(cell) + "_seed" + std::to_string(seed) + ".eytr");
}

json build_report(const ExperimentConfig& cfg, const std::vector<RunResult>& runs) {
  const auto names = metric_names(cfg.task);
  json rows = json::array();
  std::map<std::pair<int, std::size_t>, std::vector<double>> means;  // (mode, cell) -> metric means
  for (RunMode mode : cfg.modes) {
    for (std::size_t ci = 0; ci < cfg.grid.size(); ++ci) {
      const GridCell& cell = cfg.grid[ci];
      std::vector<double> sum(names.size(), 0);
      int count = 0;
      for (const auto& r : runs) {
        if (r.mode != mode || !(r.cell == cell)) continue;
        json row = {{"mode", mode_name(mode)}, {"R", cell.drop_rate}, {"N", cell.noise}, {"seed", r.seed}};
        for (std::size_t k = 0; k < names.size(); ++k) {
          double v = std::nan("");
          for (const auto& [n, x] : r.final_metrics)
            if (n == names[k]) v = x;
          row[names[k]] = v;
          sum[k] += v;
        }
        ++count;
        rows.push_back(std::move(row));
      }
      json mean = {{"mode", mode_name(mode)}, {"R", cell.drop_rate}, {"N", cell.noise}, {"seed", "mean"}};
      for (std::size_t k = 0; k < names.size(); ++k) {
        sum[k] = count ? sum[k] / count : std::nan("");
        mean[names[k]] = sum[k];
      }
      rows.push_back(std::move(mean));
      means[{static_cast<int>(mode), ci}] = sum;
    }
  }
  json improvement = json::array();
  const bool paired = std::find(cfg.modes.begin(), cfg.modes.end(), RunMode::eyetrans) != cfg.modes.end() &&
                      std::find(cfg.modes.begin(), cfg.modes.end(), RunMode::baseline) != cfg.modes.end();
  if (paired) {
    for (std::size_t ci = 0; ci < cfg.grid.size(); ++ci) {
      const auto& e = means[{static_cast<int>(RunMode::eyetrans), ci}];
      const auto& b = means[{static_cast<int>(RunMode::baseline), ci}];
      json row = {{"R", cfg.grid[ci].drop_rate}, {"N", cfg.grid[ci].noise}};
      for (std::size_t k = 0; k < names.size(); ++k) {
        row[names[k]] = b[k] != 0 ? 100.0 * (e[k] - b[k]) / b[k] : std::nan("");
      }
      improvement.push_back(std::move(row));
    }
  }
  return {{"format_version", 1}, {"task", task_name(cfg.task)}, {"tier", cfg.tier}, {"metrics", names},
          {"rows", rows},         {"improvement_pct", improvement}};
}

std::string report_csv(const json& report) {
  const auto names = report.at("metrics").get<std::vector<std::string>>();
  auto value = [](const json& v) { return v.is_number() ? num(v.get<double>()) : std::string("nan"); };
  std::string out = "mode,R,N,seed";
  for (const auto& n : names) out += "," + n;
  out += '\n';
  for (const auto& r : report.at("rows")) {
    const std::string seed = r["seed"].is_string() ? r["seed"].get<std::string>() : std::to_string(r["seed"].get<std::uint64_t>());
    out += r["mode"].get<std::string>() + "," + num(r["R"].get<double>()) + "," + num(r["N"].get<double>()) + "," + seed;
    for (const auto& n : names) out += "," + value(r[n]);
    out += '\n';
  }
  for (const auto& r : report.at("improvement_pct")) {
    out += "improvement_pct," + num(r["R"].get<double>()) + "," + num(r["N"].get<double>()) + ",";
    for (const auto& n : names) out += "," + value(r[n]);
    out += '\n';
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const Data data = load_data(cfg);
  const ModelConfig mc = derive_model_config(cfg.task, cfg.model, data.train, data.test, data.vocab);
  mc.validate(cfg.task);
  check_rows(cfg.task, mc, data.train);

  struct Job {
    RunMode mode;
    GridCell cell;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (RunMode m : cfg.modes)
    for (const auto& c : cfg.grid)
      for (auto s : cfg.seeds) jobs.push_back({m, c, s});

  ExperimentResult result;
  result.runs.resize(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        result.runs[i] = execute(cfg, data, mc, jobs[i].mode, jobs[i].cell, jobs[i].seed);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(cfg.threads, static_cast<int>(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (RunMode m : cfg.modes) {
    write_file_atomic(cfg.output / std::string(mode_name(m)) / "log.csv", log_csv(cfg, result.runs, m));
  }
  result.report = build_report(cfg, result.runs);
  write_file_atomic(cfg.output / "report.json", result.report.dump(2) + "\n");
  write_file_atomic(cfg.output / "report.csv", report_csv(result.report));
  return result;
}

}  // namespace eyetrans
