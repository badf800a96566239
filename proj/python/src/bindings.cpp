#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "eyetrans/ast_io.hpp"
#include "eyetrans/attnmap.hpp"
#include "eyetrans/augment.hpp"
#include "eyetrans/checkpoint.hpp"
#include "eyetrans/dataset.hpp"
#include "eyetrans/embedding.hpp"
#include "eyetrans/experiment.hpp"
#include "eyetrans/gaze.hpp"
#include "eyetrans/gradcheck.hpp"
#include "eyetrans/java_parser.hpp"
#include "eyetrans/metrics.hpp"

namespace py = pybind11;
using namespace eyetrans;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; the Python side sees plain dicts.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }
json from_py(const py::object& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

Ast ast_arg(const py::object& o) { return ingest_ast(from_py(o)); }

std::vector<AttentionSwitch> switches_arg(const std::vector<std::tuple<int, NodeId, NodeId>>& s) {
  std::vector<AttentionSwitch> out;
  for (const auto& [k, a, b] : s) out.push_back({k, a, b});
  return out;
}

py::list switches_out(const std::vector<AttentionSwitch>& s) {
  py::list out;
  for (const auto& x : s) out.append(py::make_tuple(x.ordinal, x.src, x.dst));
  return out;
}

json prf(const Prf& p) { return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gaze-augmented code summarization core";

  py::register_exception<Error>(m, "EyeTransError", PyExc_ValueError);

  m.def("parse_java",
        [](const std::string& source, std::optional<std::string> method_id, std::optional<int> label,
           std::optional<std::string> summary) {
          Ast a = parse_java_method(source).ast;
          if (!method_id && !label && !summary) return to_py(export_ast(a));
          std::vector<AstNode> nodes;
          for (const auto& [_, n] : a.nodes()) nodes.push_back(n);
          Ast tagged(method_id.value_or(a.method_id()), a.root(), std::move(nodes), label,
                     summary ? tokenize_summary(*summary) : a.summary());
          return to_py(export_ast(tagged));
        },
        py::arg("source"), py::arg("method_id") = py::none(), py::arg("label") = py::none(),
        py::arg("summary") = py::none(), "Parse one Java method into a literal-free AST document.");
  m.def("ingest_ast", [](const py::object& doc) { return to_py(export_ast(ast_arg(doc))); }, py::arg("document"),
        "Validate an AST document and return its normalized form.");
  m.def("bfs_serialize",
        [](const py::object& doc) {
          auto seq = bfs_serialize(ast_arg(doc));
          std::vector<std::string> cats;
          for (auto c : seq.categories) cats.emplace_back(category_name(c));
          return py::dict(py::arg("node_ids") = seq.node_ids, py::arg("categories") = cats,
                          py::arg("heights") = seq.heights);
        },
        py::arg("ast"));
  m.def("permute_ast", [](const py::object& doc, std::uint64_t seed) { return to_py(export_ast(permute_ast(ast_arg(doc), seed))); },
        py::arg("ast"), py::arg("seed"));
  m.def("remap_switches",
        [](const std::vector<std::tuple<int, NodeId, NodeId>>& s, const py::object& doc) {
          return switches_out(remap_switches(switches_arg(s), ast_arg(doc)));
        },
        py::arg("switches"), py::arg("ast"));

  m.def("classify_ivt",
        [](const std::vector<std::tuple<double, double, double, bool>>& samples, double threshold, double min_fix) {
          std::vector<GazeSample> in;
          for (const auto& [t, x, y, v] : samples) in.push_back({x, y, t, v});
          py::list out;
          for (const auto& f : classify_ivt(in, threshold, min_fix)) {
            out.append(py::dict(py::arg("x") = f.x, py::arg("y") = f.y, py::arg("start") = f.start,
                                py::arg("end") = f.end, py::arg("duration") = f.duration));
          }
          return out;
        },
        py::arg("samples"), py::arg("threshold") = kSaccadeThresholdPxPer100Ms,
        py::arg("min_fixation_ms") = kDefaultMinFixationMs,
        "Samples are (t_ms, x_px, y_px, valid) tuples.");
  m.def("extract_switches",
        [](const std::vector<std::optional<NodeId>>& nodes) {
          std::vector<Fixation> fx(nodes.size());
          for (std::size_t i = 0; i < nodes.size(); ++i) fx[i].node_id = nodes[i];
          return switches_out(extract_switches(fx));
        },
        py::arg("fixated_nodes"));
  m.def("passes_tier",
        [](std::tuple<int, int, int, int> r, const std::string& tier) {
          auto [a, b, c, d] = r;
          return passes_tier({a, b, c, d}, tier_from_name(tier));
        },
        py::arg("rating"), py::arg("tier"));
  m.def("synthesize_gaze",
        [](const py::object& doc, const std::string& mode, std::uint64_t seed, int n) {
          return switches_out(
              synthesize_gaze(ast_arg(doc), mode == "planted" ? GazeMode::planted : GazeMode::markov, seed, n));
        },
        py::arg("ast"), py::arg("mode") = "markov", py::arg("seed") = 0, py::arg("n_fixations") = 12);

  m.def("fuse",
        [](const py::object& doc, const std::vector<std::tuple<int, NodeId, NodeId>>& s, std::uint64_t seed, int width,
           const std::string& ablation) {
          EmbeddingTables<float> t(width);
          std::mt19937_64 rng(seed);
          t.init(rng);
          auto out = fuse_values(bfs_serialize(ast_arg(doc)), switches_arg(s), t, ablate(ablation_from_name(ablation)));
          py::array_t<float> arr({out.rows(), out.cols()});
          std::copy(out.data.begin(), out.data.end(), arr.mutable_data());
          return arr;
        },
        py::arg("ast"), py::arg("switches"), py::arg("seed") = 0, py::arg("width") = kDefaultWidth,
        py::arg("ablation") = "none", "Fused embeddings with the CLS row first, tables drawn from `seed`.");

  m.def("rouge",
        [](const std::vector<std::string>& cand, const std::vector<std::string>& ref, int max_skip) {
          auto r = rouge_all<std::string>(cand, ref, max_skip);
          return to_py({{"rouge1", prf(r.rouge1)},
                        {"rouge2", prf(r.rouge2)},
                        {"rougeL", prf(r.rougeL)},
                        {"rougeS", prf(r.rougeS)},
                        {"rougeSU", prf(r.rougeSU)}});
        },
        py::arg("candidate"), py::arg("reference"), py::arg("max_skip") = kDefaultMaxSkip);
  m.def("classification_report",
        [](const std::vector<int>& preds, const std::vector<int>& labels) {
          auto r = classification_report(preds, labels);
          return py::dict(py::arg("maf1") = r.maf1_at_1, py::arg("map") = r.map_at_1, py::arg("mar") = r.mar_at_1,
                          py::arg("accuracy") = r.accuracy);
        },
        py::arg("predictions"), py::arg("labels"));

  m.def("build_dataset",
        [](const std::vector<py::object>& asts, const std::vector<py::object>& trials, const std::string& out_dir,
           const std::string& tier, int k, std::uint64_t seed) {
          std::vector<Ast> a;
          for (const auto& d : asts) a.push_back(ast_arg(d));
          std::vector<TrialRecord> t;
          for (const auto& d : trials) t.push_back(trial_from_json(from_py(d)));
          DatasetBuildConfig cfg;
          cfg.tier = tier_from_name(tier);
          cfg.augment_k = k;
          cfg.augment_seed = seed;
          auto built = build_dataset(a, t, cfg);
          write_dataset(out_dir, built);
          return to_py(built.manifest);
        },
        py::arg("asts"), py::arg("trials"), py::arg("out_dir"), py::arg("tier") = "original", py::arg("augment_k") = 3,
        py::arg("seed") = 0, "Trials are dicts with participant_id, method_id, switches, rating.");
  m.def("run_experiment",
        [](const py::object& config, const std::string& base_dir) {
          auto cfg = experiment_from_json(from_py(config), base_dir);
          py::gil_scoped_release release;
          auto res = run_experiment(cfg);
          py::gil_scoped_acquire acquire;
          return to_py(res.report);
        },
        py::arg("config"), py::arg("base_dir") = "", "Runs an experiment config and returns its report.");
  m.def("attention_maps",
        [](const std::string& checkpoint, const std::string& dataset, std::size_t sample, const std::string& out) {
          auto lm = load_model(checkpoint);
          auto data = load_dataset(dataset);
          if (sample >= data.test.size()) throw ConfigError("sample index outside the test split");
          auto dump = attention_dump(*lm.model, data.test[sample], false);
          std::vector<std::string> paths;
          for (const auto& p : export_attention(out, dump)) paths.push_back(p.string());
          return paths;
        },
        py::arg("checkpoint"), py::arg("dataset"), py::arg("sample") = 0, py::arg("out_dir"));
  m.def("gradcheck",
        [](bool mutate, double threshold) {
          auto s = run_gradcheck(mutate, threshold);
          return py::dict(py::arg("pass") = s.pass, py::arg("max_relative_error") = s.max_relative_error,
                          py::arg("seconds") = s.seconds);
        },
        py::arg("mutate") = false, py::arg("threshold") = 1e-3);
}
