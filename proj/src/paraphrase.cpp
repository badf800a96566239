#include "eyetrans/paraphrase.hpp"

#include <algorithm>
#include <random>

namespace eyetrans {

namespace {

using Phrase = std::vector<std::string>;

struct Rule {
  Phrase match;
  std::vector<Phrase> alternatives;
};

// Longer matches are listed first so they win over single words.
const std::vector<Rule>& rules() {
  static const std::vector<Rule> table = {
      {{"checks", "whether"}, {{"determines", "if"}, {"tests", "whether"}}},
      {{"checks", "if"}, {{"determines", "if"}, {"tests", "whether"}}},
      {{"the", "number", "of"}, {{"the", "count", "of"}}},
      {{"is", "empty"}, {{"has", "no", "elements"}}},
      {{"returns"}, {{"gives", "back"}}},
      {{"gets"}, {{"retrieves"}, {"fetches"}}},
      {{"computes"}, {{"calculates"}}},
      {{"calculates"}, {{"computes"}}},
      {{"finds"}, {{"locates"}, {"searches", "for"}}},
      {{"creates"}, {{"builds"}, {"constructs"}}},
      {{"removes"}, {{"deletes"}}},
      {{"adds"}, {{"appends"}, {"inserts"}}},
      {{"sets"}, {{"assigns"}}},
      {{"largest"}, {{"biggest"}, {"maximum"}}},
      {{"smallest"}, {{"minimum"}}},
      {{"sum"}, {{"total"}}},
      {{"list"}, {{"sequence"}}},
      {{"counts"}, {{"tallies"}}},
      {{"reverses"}, {{"inverts"}}},
  };
  return table;
}

}  // namespace

std::vector<std::string> label_paraphrase(const std::vector<std::string>& summary, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < summary.size()) {
    const Rule* hit = nullptr;
    for (const Rule& r : rules()) {
      if (i + r.match.size() > summary.size()) continue;
      if (std::equal(r.match.begin(), r.match.end(), summary.begin() + static_cast<std::ptrdiff_t>(i))) {
        hit = &r;
        break;
      }
    }
    if (!hit) {
      out.push_back(summary[i++]);
      continue;
    }
    const Phrase& alt = hit->alternatives[hit->alternatives.size() == 1 ? 0 : rng() % hit->alternatives.size()];
    out.insert(out.end(), alt.begin(), alt.end());
    i += hit->match.size();
  }
  return out;
}

}  // namespace eyetrans
