#include "eyetrans/metrics.hpp"

#include <set>

namespace eyetrans {

ClassReport classification_report(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) {
    throw LengthMismatch("classification_report: " + std::to_string(preds.size()) + " predictions vs " +
                         std::to_string(labels.size()) + " labels");
  }
  ClassReport report;
  if (labels.empty()) return report;
  std::map<int, int> tp, fp, fn;
  std::set<int> classes;
  int correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    classes.insert(preds[i]);
    classes.insert(labels[i]);
    if (preds[i] == labels[i]) {
      ++tp[labels[i]];
      ++correct;
    } else {
      ++fp[preds[i]];
      ++fn[labels[i]];
    }
  }
  double sp = 0, sr = 0, sf = 0;
  for (int c : classes) {
    ClassScores s;
    const double t = tp[c], p = t + fp[c], r = t + fn[c];
    s.precision = p > 0 ? t / p : 0;
    s.recall = r > 0 ? t / r : 0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0;
    s.support = static_cast<int>(r);
    sp += s.precision;
    sr += s.recall;
    sf += s.f1;
    report.per_class[c] = s;
  }
  const double k = static_cast<double>(classes.size());
  report.map_at_1 = 100.0 * sp / k;
  report.mar_at_1 = 100.0 * sr / k;
  report.maf1_at_1 = 100.0 * sf / k;
  report.accuracy = 100.0 * correct / static_cast<double>(labels.size());
  return report;
}

RougeReport mean_rouge(std::span<const RougeReport> reports) {
  RougeReport m;
  if (reports.empty()) return m;
  auto acc = [](Prf& into, const Prf& x) {
    into.precision += x.precision;
    into.recall += x.recall;
    into.f1 += x.f1;
  };
  for (const auto& r : reports) {
    acc(m.rouge1, r.rouge1);
    acc(m.rouge2, r.rouge2);
    acc(m.rougeL, r.rougeL);
    acc(m.rougeS, r.rougeS);
    acc(m.rougeSU, r.rougeSU);
  }
  const double n = static_cast<double>(reports.size());
  for (Prf* p : {&m.rouge1, &m.rouge2, &m.rougeL, &m.rougeS, &m.rougeSU}) {
    p->precision /= n;
    p->recall /= n;
    p->f1 /= n;
  }
  return m;
}

}  // namespace eyetrans
