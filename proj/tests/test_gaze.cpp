#include <set>
#include <sstream>

#include "doctest.h"
#include "eyetrans/errors.hpp"
#include "eyetrans/gaze.hpp"
#include "support.hpp"

using namespace eyetrans;
using SC = SemanticCategory;

namespace {

std::vector<GazeSample> still(double x, double y, double t0, double t1, int n) {
  std::vector<GazeSample> out;
  for (int i = 0; i < n; ++i) out.push_back({x, y, t0 + (t1 - t0) * i / (n - 1), true});
  return out;
}

Fixation at(NodeId id) {
  Fixation f;
  f.node_id = id;
  return f;
}

}  // namespace

TEST_CASE("layout_tokens box arithmetic") {
  std::map<NodeId, TokenSpan> spans{{1, {0, 0, 3}}, {2, {0, 4, 2}}, {3, {1, 2, 0}}};
  auto boxes = layout_tokens(spans, 10, 20, {0, 0});
  REQUIRE(boxes.size() == 2);  // zero-length token dropped
  CHECK(boxes[0] == LayoutBox{1, 0, 0, 30, 20});
  CHECK(boxes[1] == LayoutBox{2, 40, 0, 60, 20});
  CHECK(boxes[0].x1 <= boxes[1].x0);
  auto shifted = layout_tokens(spans, 8, 16, {100, 50});
  CHECK(shifted[1] == LayoutBox{2, 132, 50, 148, 66});
}

TEST_CASE("layout from source gives disjoint boxes") {
  auto boxes = layout_tokens("int f(int x) {\n  return x + 1;\n}", 10, 20, {0, 0});
  CHECK(boxes.size() >= 6);
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      const auto& a = boxes[i];
      const auto& b = boxes[j];
      const bool overlap = a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1;
      CHECK_FALSE(overlap);
    }
}

TEST_CASE("I-VT: a still trace is one fixation") {
  auto fx = classify_ivt(still(120, 40, 0, 300, 18), 400);
  REQUIRE(fx.size() == 1);
  CHECK(fx[0].duration == doctest::Approx(300));
  CHECK(fx[0].x == doctest::Approx(120));
  CHECK(fx[0].y == doctest::Approx(40));
}

TEST_CASE("I-VT: a 200 px jump in one 16.7 ms gap splits two fixations") {
  const double dt = 1000.0 / 60.0;
  std::vector<GazeSample> s;
  for (int i = 0; i < 12; ++i) s.push_back({100, 100, i * dt, true});
  for (int i = 12; i < 24; ++i) s.push_back({300, 100, i * dt, true});
  // 200 px over 16.67 ms = 1200 px / 100 ms
  CHECK(200.0 / dt * 100.0 == doctest::Approx(1200));
  auto fx = classify_ivt(s, kSaccadeThresholdPxPer100Ms);
  REQUIRE(fx.size() == 2);
  CHECK(fx[0].x == doctest::Approx(100));
  CHECK(fx[1].x == doctest::Approx(300));
  CHECK(fx[0].end < fx[1].start);
}

TEST_CASE("I-VT: constant drift of 10 px/ms has no fixation") {
  std::vector<GazeSample> s;
  const double dt = 1000.0 / 60.0;
  for (int i = 0; i < 60; ++i) s.push_back({10.0 * i * dt, 0, i * dt, true});
  CHECK(classify_ivt(s, 400).empty());
}

TEST_CASE("I-VT: threshold is 400 px per 100 ms") {
  CHECK(kSaccadeThresholdPxPer100Ms == 400.0);
  // 3.9 px/ms stays under, 4.1 px/ms crosses
  std::vector<GazeSample> slow{{0, 0, 0, true}, {39, 0, 10, true}};
  std::vector<GazeSample> fast{{0, 0, 0, true}, {41, 0, 10, true}};
  CHECK(label_saccades(slow, 400) == std::vector<bool>{false, false});
  CHECK(label_saccades(fast, 400) == std::vector<bool>{false, true});
}

TEST_CASE("I-VT: errors and edge cases") {
  CHECK_THROWS_AS(classify_ivt({}), EmptyStream);
  CHECK_THROWS_AS(classify_ivt({{0, 0, 0, false}, {1, 1, 10, false}}), EmptyStream);
  CHECK_THROWS_AS(classify_ivt(still(0, 0, 0, 100, 5), 0), ConfigError);
  // A run shorter than the minimum duration is no fixation.
  CHECK(classify_ivt(still(0, 0, 0, 80, 6)).empty());
  // A gap longer than 100 ms splits the stream.
  auto s = still(5, 5, 0, 150, 10);
  auto later = still(5, 5, 400, 550, 10);
  s.insert(s.end(), later.begin(), later.end());
  CHECK(classify_ivt(s).size() == 2);
  // Invalid samples are ignored.
  auto with_blink = still(7, 7, 0, 300, 18);
  with_blink[5].valid = false;
  with_blink[5].x = 5000;
  CHECK(classify_ivt(with_blink).size() == 1);
}

TEST_CASE("map_fixations uses half-open boxes") {
  std::vector<LayoutBox> boxes{{7, 0, 0, 30, 20}};
  Fixation inside, outside, edge;
  inside.x = 5, inside.y = 5;
  outside.x = 100, outside.y = 5;
  edge.x = 30, edge.y = 5;
  auto m = map_fixations({inside, outside, edge}, boxes);
  CHECK(m[0].node_id == std::optional<NodeId>(7));
  CHECK_FALSE(m[1].node_id);
  CHECK_FALSE(m[2].node_id);
  CHECK(extract_switches(m).empty());
}

TEST_CASE("extract_switches examples") {
  const NodeId a = 0, c = 2, e = 4;
  auto s1 = extract_switches({at(a), at(a), at(e)});
  CHECK(s1 == std::vector<AttentionSwitch>{{1, a, e}});
  CHECK(extract_switches({at(a)}).empty());
  auto s2 = extract_switches({at(a), at(e), at(c)});
  CHECK(s2 == std::vector<AttentionSwitch>{{1, a, e}, {2, e, c}});
  Fixation off;
  auto s3 = extract_switches({at(a), off, at(a), at(c)});
  CHECK(s3 == std::vector<AttentionSwitch>{{1, a, c}});
}

TEST_CASE("quality tiers") {
  auto tiers = [](QualityRating r) {
    return std::vector<bool>{passes_tier(r, Tier::original), passes_tier(r, Tier::filtered),
                             passes_tier(r, Tier::strict)};
  };
  CHECK(tiers({3, 3, 3, 3}) == std::vector<bool>{true, true, false});
  CHECK(tiers({5, 1, 1, 5}) == std::vector<bool>{true, true, true});
  CHECK(tiers({2, 1, 1, 5})[1] == false);
  // the second bound applies to verbosity (c)
  CHECK(tiers({3, 3, 4, 3})[1] == false);
  CHECK(tiers({3, 3, 3, 2})[1] == false);
  CHECK(tier_from_name("strict") == Tier::strict);
  CHECK(tier_name(Tier::filtered) == "filtered");
  CHECK_THROWS_AS(tier_from_name("gold"), ConfigError);
}

TEST_CASE("property: strict within filtered within original") {
  std::vector<Trial> trials;
  for (int a = 1; a <= 5; ++a)
    for (int b = 1; b <= 5; ++b)
      for (int c = 1; c <= 5; ++c)
        for (int d = 1; d <= 5; ++d) {
          Trial t;
          t.method_id = std::to_string(a) + std::to_string(b) + std::to_string(c) + std::to_string(d);
          t.rating = {a, b, c, d};
          trials.push_back(t);
        }
  auto ids = [](const std::vector<Trial>& ts) {
    std::set<std::string> s;
    for (const auto& t : ts) s.insert(t.method_id);
    return s;
  };
  auto o = ids(filter_by_quality(trials, Tier::original));
  auto f = ids(filter_by_quality(trials, Tier::filtered));
  auto s = ids(filter_by_quality(trials, Tier::strict));
  CHECK(o.size() == 625);
  CHECK(std::includes(o.begin(), o.end(), f.begin(), f.end()));
  CHECK(std::includes(f.begin(), f.end(), s.begin(), s.end()));
  CHECK(f.size() == 3 * 3 * 3 * 3);
  CHECK(s.size() == 2 * 2 * 2 * 2);
}

TEST_CASE("property: fixations ordered, disjoint, within the stream span") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<GazeSample> s;
    double t = 0, x = 200, y = 200;
    std::uniform_real_distribution<double> u(0, 1);
    const int n = 50 + static_cast<int>(u(rng) * 200);
    for (int i = 0; i < n; ++i) {
      t += u(rng) < 0.03 ? 150 : 1000.0 / 60.0;
      if (u(rng) < 0.1) {
        x += (u(rng) - 0.5) * 600;
        y += (u(rng) - 0.5) * 300;
      } else {
        x += (u(rng) - 0.5) * 4;
        y += (u(rng) - 0.5) * 4;
      }
      s.push_back({x, y, t, u(rng) > 0.02});
    }
    std::vector<Fixation> fx;
    try {
      fx = classify_ivt(s);
    } catch (const EmptyStream&) {
      continue;
    }
    double total = 0;
    for (std::size_t i = 0; i < fx.size(); ++i) {
      CHECK(fx[i].duration > 0);
      CHECK(fx[i].duration >= kDefaultMinFixationMs);
      CHECK(fx[i].end - fx[i].start == doctest::Approx(fx[i].duration));
      if (i > 0) CHECK(fx[i].start > fx[i - 1].end);
      total += fx[i].duration;
    }
    CHECK(total <= s.back().t - s.front().t + 1e-9);

    // Lowering the threshold never adds non-saccadic samples.
    std::size_t prev = SIZE_MAX;
    for (double th : {2000.0, 800.0, 400.0, 200.0, 50.0, 5.0}) {
      auto flags = label_saccades(s, th);
      const auto still_count = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), false));
      CHECK(still_count <= prev);
      prev = still_count;
    }

    // Switches from random node attribution
    std::uniform_int_distribution<int> node(0, 4);
    for (auto& f : fx) f.node_id = node(rng);
    auto sw = extract_switches(fx);
    for (std::size_t k = 0; k < sw.size(); ++k) {
      CHECK(sw[k].src != sw[k].dst);
      CHECK(sw[k].ordinal == static_cast<int>(k) + 1);
    }
  }
}

TEST_CASE("synthetic gaze: priors, determinism, planted edge") {
  auto prior = GazePrior::human_reading();
  CHECK(prior.weight(SC::method_declaration, SC::variable_declaration) == 2593);
  CHECK(prior.weight(SC::variable_declaration, SC::method_declaration) == 2533);
  CHECK(prior.weight(SC::conditional_statement, SC::loop_body) == 2189);
  CHECK(prior.weight(SC::loop_body, SC::conditional_statement) == 2179);
  CHECK(prior.weight(SC::conditional_statement, SC::method_declaration) == 1615);
  CHECK(prior.weight(SC::method_declaration, SC::conditional_statement) == 1588);
  CHECK(prior.weight(SC::operator_, SC::argument) == prior.floor);

  std::mt19937_64 rng(1);
  Ast a = testing::random_tree(rng, 30);
  auto s1 = synthesize_gaze(a, GazeMode::markov, 42, 20);
  auto s2 = synthesize_gaze(a, GazeMode::markov, 42, 20);
  CHECK(s1 == s2);
  CHECK(s1.size() == 19);
  validate_switches(s1, a);
  CHECK(synthesize_gaze(a, GazeMode::markov, 43, 20) != s1);

  const auto ids = bfs_serialize(a).node_ids;
  PlantedEdge edge{ids[3], ids[7]};
  auto p = synthesize_gaze(a, GazeMode::planted, 9, 5, edge);
  REQUIRE(p.size() == 4);
  CHECK(p[0] == AttentionSwitch{1, ids[3], ids[7]});
  CHECK(p[1].src == ids[7]);
  validate_switches(p, a);

  Ast lone = testing::make_tree({{0, {}}});
  CHECK(synthesize_gaze(lone, GazeMode::markov, 0, 1).empty());
  CHECK_THROWS_AS(synthesize_gaze(lone, GazeMode::markov, 0, 3), NoEligibleNodes);
  CHECK_THROWS_AS(synthesize_gaze(a, GazeMode::markov, 0, 0), ConfigError);
}

TEST_CASE("synthetic gaze follows the prior") {
  // Two method_declaration / variable_declaration pairs and filler leaves.
  Ast a = testing::make_tree({{0, {1, 2, 3, 4}}},
                             {{0, SC::method_declaration}, {1, SC::variable_declaration},
                              {2, SC::operator_}, {3, SC::operator_}, {4, SC::operator_}});
  int to_decl = 0, from_method = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    for (const auto& s : synthesize_gaze(a, GazeMode::markov, seed, 10)) {
      if (s.src != 0) continue;
      ++from_method;
      if (s.dst == 1) ++to_decl;
    }
  }
  // weight 2593 against three floors of 100
  REQUIRE(from_method > 100);
  CHECK(static_cast<double>(to_decl) / from_method > 0.8);
}

TEST_CASE("process_gaze end to end and CSV readers") {
  const std::string src = "int f(int x) {\n  return x;\n}";
  auto pm = parse_java_method(src);
  auto boxes = layout_tokens(pm.spans, 10, 20, {0, 0});
  // Fixate the method name, then the returned variable.
  const auto& name = pm.spans.at(pm.ast.root());
  NodeId ret_var = -1;
  for (const auto& [id, span] : pm.spans)
    if (span.row == 1 && pm.ast.node(id).category == SC::variable_use) ret_var = id;
  REQUIRE(ret_var >= 0);
  const auto& rv = pm.spans.at(ret_var);
  std::ostringstream csv;
  csv << "t_ms,x_px,y_px,valid\n";
  for (int i = 0; i < 12; ++i) csv << i * 16.7 << "," << name.col * 10 + 5 << "," << 10 << ",1\n";
  // the hop is short, so a tracking gap separates the two fixations
  for (int i = 12; i < 24; ++i) csv << 150 + i * 16.7 << "," << rv.col * 10 + 5 << "," << 30 << ",1\n";
  std::istringstream in(csv.str());
  auto samples = read_gaze_csv(in);
  CHECK(samples.size() == 24);
  auto proc = process_gaze(samples, boxes);
  REQUIRE(proc.fixations.size() == 2);
  CHECK(proc.switches == std::vector<AttentionSwitch>{{1, pm.ast.root(), ret_var}});

  std::istringstream bad("time,x,y\n1,2,3\n");
  CHECK_THROWS_AS(read_gaze_csv(bad), FormatError);
  std::istringstream ratings("participant_id,method_id,a,b,c,d\np1,m1,5,1,1,5\n");
  auto rows = read_ratings_csv(ratings);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].rating.accuracy == 5);
  CHECK(rows[0].rating.english == 5);
  std::istringstream out_of_range("participant_id,method_id,a,b,c,d\np1,m1,6,1,1,5\n");
  CHECK_THROWS_AS(read_ratings_csv(out_of_range), FormatError);
}
