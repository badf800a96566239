#include "eyetrans/gaze.hpp"

#include <cmath>
#include <istream>
#include <random>
#include <sstream>

#include "eyetrans/augment.hpp"
#include "eyetrans/errors.hpp"

namespace eyetrans {

std::string_view tier_name(Tier t) {
  switch (t) {
    case Tier::original: return "original";
    case Tier::filtered: return "filtered";
    case Tier::strict: return "strict";
  }
  return "original";
}

Tier tier_from_name(std::string_view name) {
  if (name == "original") return Tier::original;
  if (name == "filtered") return Tier::filtered;
  if (name == "strict") return Tier::strict;
  throw ConfigError("unknown tier '" + std::string(name) + "'");
}

std::vector<LayoutBox> layout_tokens(const std::map<NodeId, TokenSpan>& spans, double char_w,
                                     double char_h, Point origin) {
  std::vector<LayoutBox> boxes;
  for (const auto& [id, span] : spans) {
    if (span.length <= 0) continue;
    LayoutBox b;
    b.node_id = id;
    b.x0 = origin.x + span.col * char_w;
    b.x1 = b.x0 + span.length * char_w;
    b.y0 = origin.y + span.row * char_h;
    b.y1 = b.y0 + char_h;
    boxes.push_back(b);
  }
  return boxes;
}

std::vector<LayoutBox> layout_tokens(std::string_view source, double char_w, double char_h,
                                     Point origin) {
  return layout_tokens(parse_java_method(source).spans, char_w, char_h, origin);
}

namespace {

struct Labeled {
  const GazeSample* sample;
  bool saccadic;
  bool segment_start;
};

std::vector<Labeled> label(const std::vector<GazeSample>& samples, double threshold) {
  if (!(threshold > 0)) throw ConfigError("I-VT threshold must be positive");
  std::vector<Labeled> out;
  const GazeSample* prev = nullptr;
  for (const GazeSample& s : samples) {
    if (!s.valid) continue;
    if (prev && s.t < prev->t) throw ValidationError("gaze samples must be time-sorted");
    Labeled l{&s, false, true};
    if (prev) {
      const double dt = s.t - prev->t;
      if (dt <= kMaxSampleGapMs) {
        l.segment_start = false;
        const double dist = std::hypot(s.x - prev->x, s.y - prev->y);
        if (dt > 0) {
          l.saccadic = dist / dt * 100.0 > threshold;
        } else {
          l.saccadic = dist > 0;
        }
      }
    }
    out.push_back(l);
    prev = &s;
  }
  return out;
}

}  // namespace

std::vector<bool> label_saccades(const std::vector<GazeSample>& samples, double threshold) {
  std::vector<bool> flags;
  for (const Labeled& l : label(samples, threshold)) flags.push_back(l.saccadic);
  return flags;
}

std::vector<Fixation> classify_ivt(const std::vector<GazeSample>& samples, double threshold,
                                   double min_fixation_ms) {
  std::vector<Labeled> labeled = label(samples, threshold);
  if (labeled.empty()) throw EmptyStream("no valid gaze samples");
  std::vector<Fixation> out;
  std::size_t i = 0;
  while (i < labeled.size()) {
    if (labeled[i].saccadic) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < labeled.size() && !labeled[j].saccadic && !labeled[j].segment_start) ++j;
    const double start = labeled[i].sample->t;
    const double end = labeled[j - 1].sample->t;
    const double span = end - start;
    if (span > 0 && span >= min_fixation_ms) {
      Fixation f;
      for (std::size_t k = i; k < j; ++k) {
        f.x += labeled[k].sample->x;
        f.y += labeled[k].sample->y;
      }
      f.x /= static_cast<double>(j - i);
      f.y /= static_cast<double>(j - i);
      f.start = start;
      f.end = end;
      f.duration = span;
      out.push_back(f);
    }
    i = j;
  }
  return out;
}

std::vector<Fixation> map_fixations(std::vector<Fixation> fixations, const std::vector<LayoutBox>& boxes) {
  for (Fixation& f : fixations) {
    f.node_id.reset();
    for (const LayoutBox& b : boxes) {
      if (b.contains(f.x, f.y)) {
        f.node_id = b.node_id;
        break;
      }
    }
  }
  return fixations;
}

std::vector<AttentionSwitch> extract_switches(const std::vector<Fixation>& fixations) {
  std::vector<AttentionSwitch> out;
  std::optional<NodeId> last;
  for (const Fixation& f : fixations) {
    if (!f.node_id) continue;
    if (last && *last != *f.node_id) {
      out.push_back({static_cast<int>(out.size()) + 1, *last, *f.node_id});
    }
    last = f.node_id;
  }
  return out;
}

bool passes_tier(const QualityRating& r, Tier tier) {
  switch (tier) {
    case Tier::original:
      return true;
    case Tier::filtered:
      return r.accuracy >= 3 && r.english >= 3 && r.completeness <= 3 && r.verbosity <= 3;
    case Tier::strict:
      return r.accuracy > 3 && r.english > 3 && r.completeness < 3 && r.verbosity < 3;
  }
  return false;
}

std::vector<Trial> filter_by_quality(const std::vector<Trial>& trials, Tier tier) {
  std::vector<Trial> out;
  for (const Trial& t : trials) {
    if (passes_tier(t.rating, tier)) out.push_back(t);
  }
  return out;
}

double GazePrior::weight(SemanticCategory from, SemanticCategory to) const {
  auto it = weights.find({from, to});
  return it == weights.end() ? floor : it->second;
}

GazePrior GazePrior::human_reading() {
  using C = SemanticCategory;
  GazePrior p;
  p.weights = {
      {{C::method_declaration, C::variable_declaration}, 2593},
      {{C::variable_declaration, C::method_declaration}, 2533},
      {{C::conditional_statement, C::loop_body}, 2189},
      {{C::loop_body, C::conditional_statement}, 2179},
      {{C::conditional_statement, C::method_declaration}, 1615},
      {{C::method_declaration, C::conditional_statement}, 1588},
  };
  return p;
}

std::vector<AttentionSwitch> synthesize_gaze(const Ast& ast, GazeMode mode, std::uint64_t seed,
                                             int n_fixations, std::optional<PlantedEdge> planted,
                                             const GazePrior& prior) {
  if (n_fixations < 1) throw ConfigError("n_fixations must be >= 1");
  std::vector<AttentionSwitch> out;
  if (n_fixations == 1) return out;
  if (ast.size() < 2) throw NoEligibleNodes("tree has a single node; no switch is possible");

  std::vector<NodeId> ids;
  for (const auto& [id, n] : ast.nodes()) ids.push_back(id);
  std::mt19937_64 rng(mix_seed(seed, 0x5a17));

  NodeId current;
  if (mode == GazeMode::planted) {
    if (!planted) throw ConfigError("planted mode requires a planted edge");
    if (!ast.contains(planted->src) || !ast.contains(planted->dst)) {
      throw DanglingEndpoint("planted edge references an unknown node");
    }
    if (planted->src == planted->dst) throw ValidationError("planted edge is a self-switch");
    out.push_back({1, planted->src, planted->dst});
    current = planted->dst;
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
    current = ids[pick(rng)];
  }

  const int n_switches = n_fixations - 1;
  std::vector<double> w(ids.size());
  while (static_cast<int>(out.size()) < n_switches) {
    const SemanticCategory from = ast.node(current).category;
    double total = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      w[i] = ids[i] == current ? 0.0 : std::max(0.0, prior.weight(from, ast.node(ids[i]).category));
      total += w[i];
    }
    if (!(total > 0)) {  // every prior weight is zero here: walk uniformly
      for (std::size_t i = 0; i < ids.size(); ++i) w[i] = ids[i] == current ? 0.0 : 1.0;
    }
    std::discrete_distribution<std::size_t> step(w.begin(), w.end());
    NodeId next = ids[step(rng)];
    out.push_back({static_cast<int>(out.size()) + 1, current, next});
    current = next;
  }
  return out;
}

TrialProcessing process_gaze(const std::vector<GazeSample>& samples, const std::vector<LayoutBox>& boxes,
                             double threshold, double min_fixation_ms) {
  TrialProcessing out;
  out.fixations = map_fixations(classify_ivt(samples, threshold, min_fixation_ms), boxes);
  out.switches = extract_switches(out.fixations);
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  return cells;
}

void expect_header(std::istream& in, const std::vector<std::string>& header) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty CSV: missing header");
  if (split_csv_line(line) != header) {
    std::string want;
    for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
    throw FormatError("CSV header must be '" + want + "'");
  }
}

double parse_number(const std::string& s, int lineno) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("line " + std::to_string(lineno) + ": bad number '" + s + "'");
  }
}

}  // namespace

std::vector<GazeSample> read_gaze_csv(std::istream& in) {
  expect_header(in, {"t_ms", "x_px", "y_px", "valid"});
  std::vector<GazeSample> out;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \r") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != 4) throw FormatError("line " + std::to_string(lineno) + ": expected 4 columns");
    GazeSample s;
    s.t = parse_number(cells[0], lineno);
    s.x = parse_number(cells[1], lineno);
    s.y = parse_number(cells[2], lineno);
    s.valid = cells[3] == "1" || cells[3] == "true";
    out.push_back(s);
  }
  return out;
}

std::vector<RatingRow> read_ratings_csv(std::istream& in) {
  expect_header(in, {"participant_id", "method_id", "a", "b", "c", "d"});
  std::vector<RatingRow> out;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \r") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != 6) throw FormatError("line " + std::to_string(lineno) + ": expected 6 columns");
    RatingRow r{cells[0], cells[1], {}};
    int* fields[] = {&r.rating.accuracy, &r.rating.completeness, &r.rating.verbosity, &r.rating.english};
    for (int k = 0; k < 4; ++k) {
      double v = parse_number(cells[static_cast<std::size_t>(k) + 2], lineno);
      if (v < 1 || v > 5 || v != std::floor(v)) {
        throw FormatError("line " + std::to_string(lineno) + ": rating must be an integer in [1,5]");
      }
      *fields[k] = static_cast<int>(v);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace eyetrans
