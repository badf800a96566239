#include "eyetrans/gradcheck.hpp"

#include <chrono>
#include <cstdio>

#include "eyetrans/models.hpp"

namespace eyetrans {

namespace {

DatasetRow probe_row() {
  DatasetRow row;
  row.id = "gradcheck";
  row.tokens = {category_id(SemanticCategory::method_declaration), category_id(SemanticCategory::parameter),
                category_id(SemanticCategory::variable_declaration), category_id(SemanticCategory::loop_statement),
                category_id(SemanticCategory::operator_), category_id(SemanticCategory::variable_use)};
  row.heights = {0, 1, 1, 1, 2, 3};
  row.switches = {{1, 0, 2}, {2, 2, 4}};
  row.label_class = 2;
  row.summary = {4, 5, 6};
  return row;
}

ModelConfig probe_config() {
  ModelConfig c;
  c.width = 8;
  c.heads = 4;
  c.encoder_layers = 2;
  c.decoder_layers = 2;
  c.n_classes = 5;
  c.vocab = 10;
  c.max_summary = 8;
  c.max_ordinal = 8;
  c.max_height = 6;
  return c;
}

// Moves every parameter off the tiny-init regime so that relu inputs sit
// away from zero and gradients are not dominated by rounding.
template <typename T>
void spread(const nn::ParamList<T>& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  for (auto* p : params)
    for (auto& v : p->value.data) v = static_cast<T>(v + u(rng));
}

std::string line(const char* name, const nn::GradCheckReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s max_rel_err=%.3e checked=%zu skipped_kinks=%zu worst=%s[%zu]\n", name,
                r.max_relative_error, r.checked, r.skipped_kinks, r.worst_parameter.c_str(), r.worst_index);
  return buf;
}

struct MutationGuard {
  explicit MutationGuard(bool on) { nn::g_mutate_matmul_grad.store(on); }
  ~MutationGuard() { nn::g_mutate_matmul_grad.store(false); }
};

}  // namespace

std::string GradCheckSummary::text() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "gradcheck max_rel_err=%.3e threshold=%.1e time=%.2fs %s\n", max_relative_error,
                threshold, seconds, pass ? "PASS" : "FAIL");
  return line("classifier", classifier) + line("seq2seq", seq2seq) + buf;
}

GradCheckSummary run_gradcheck(bool mutate, double threshold, double eps, std::size_t coords_per_param) {
  const auto t0 = std::chrono::steady_clock::now();
  MutationGuard guard(mutate);
  GradCheckSummary s;
  s.threshold = threshold;
  const DatasetRow row = probe_row();
  const ModelConfig cfg = probe_config();

  FunctionalModel<double> clf(cfg);
  clf.init(11);
  spread(clf.parameters(), 12);
  s.classifier = nn::grad_check<double>([&](nn::Tape<double>& t) { return clf.loss(t, row); }, clf.parameters(), eps,
                                        coords_per_param, 13);

  Seq2SeqModel<double> s2s(cfg);
  s2s.init(21);
  spread(s2s.parameters(), 22);
  s.seq2seq = nn::grad_check<double>([&](nn::Tape<double>& t) { return s2s.loss(t, row); }, s2s.parameters(), eps,
                                     coords_per_param, 23);

  s.max_relative_error = std::max(s.classifier.max_relative_error, s.seq2seq.max_relative_error);
  s.pass = s.max_relative_error <= threshold && s.classifier.checked > 0 && s.seq2seq.checked > 0;
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

}  // namespace eyetrans
