#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eyetrans/ast.hpp"
#include "eyetrans/attention_switch.hpp"
#include "eyetrans/java_parser.hpp"

namespace eyetrans {

struct GazeSample {
  double x = 0;  // px
  double y = 0;  // px
  double t = 0;  // ms, non-decreasing
  bool valid = true;
};

// Half-open on the right and bottom edges: [x0, x1) x [y0, y1).
struct LayoutBox {
  NodeId node_id = 0;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool contains(double x, double y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  bool operator==(const LayoutBox&) const = default;
};

struct Fixation {
  double x = 0;  // centroid
  double y = 0;
  double start = 0;  // ms
  double end = 0;
  double duration = 0;
  std::optional<NodeId> node_id;
};

struct QualityRating {
  int accuracy = 3;      // a
  int completeness = 3;  // b
  int verbosity = 3;     // c
  int english = 3;       // d
};

enum class Tier { original, filtered, strict };

std::string_view tier_name(Tier t);
Tier tier_from_name(std::string_view name);

struct Trial {
  std::string participant_id;
  std::string method_id;
  std::vector<GazeSample> samples;
  std::vector<Fixation> fixations;
  std::vector<AttentionSwitch> switches;
  QualityRating rating;
};

struct Point {
  double x = 0;
  double y = 0;
};

inline constexpr double kSaccadeThresholdPxPer100Ms = 400.0;
inline constexpr double kDefaultMinFixationMs = 100.0;
inline constexpr double kMaxSampleGapMs = 100.0;

// One box per token with nonzero length, in node-id order.
std::vector<LayoutBox> layout_tokens(const std::map<NodeId, TokenSpan>& spans, double char_w,
                                     double char_h, Point origin);
std::vector<LayoutBox> layout_tokens(std::string_view source, double char_w, double char_h,
                                     Point origin);

// Per-sample saccade flags over the valid samples, in order. A sample is
// saccadic when the velocity from its predecessor exceeds the threshold (in
// px per 100 ms); the first sample after a stream gap never is.
std::vector<bool> label_saccades(const std::vector<GazeSample>& samples, double threshold);

// Velocity-threshold identification. Maximal runs of non-saccadic samples
// spanning at least min_fixation_ms become fixations. Throws EmptyStream
// when no sample is valid.
std::vector<Fixation> classify_ivt(const std::vector<GazeSample>& samples,
                                   double threshold = kSaccadeThresholdPxPer100Ms,
                                   double min_fixation_ms = kDefaultMinFixationMs);

std::vector<Fixation> map_fixations(std::vector<Fixation> fixations, const std::vector<LayoutBox>& boxes);

// Fixations without a node are skipped; repeated nodes collapse.
std::vector<AttentionSwitch> extract_switches(const std::vector<Fixation>& fixations);

bool passes_tier(const QualityRating& r, Tier tier);
std::vector<Trial> filter_by_quality(const std::vector<Trial>& trials, Tier tier);

// Category-pair transition weights for the synthetic reader.
struct GazePrior {
  std::map<std::pair<SemanticCategory, SemanticCategory>, double> weights;
  double floor = 100.0;

  double weight(SemanticCategory from, SemanticCategory to) const;
  // The six most frequent human switch pairs, weighted by their counts.
  static GazePrior human_reading();
};

enum class GazeMode { markov, planted };

struct PlantedEdge {
  NodeId src = 0;
  NodeId dst = 0;
};

// markov: a seeded walk of n_fixations distinct-consecutive nodes weighted by
// the prior. planted: switch 1 is `planted`, the walk continues from its
// destination. Throws NoEligibleNodes when the tree has fewer than two nodes
// and at least one switch is requested.
std::vector<AttentionSwitch> synthesize_gaze(const Ast& ast, GazeMode mode, std::uint64_t seed,
                                             int n_fixations,
                                             std::optional<PlantedEdge> planted = std::nullopt,
                                             const GazePrior& prior = GazePrior::human_reading());

// Raw samples -> fixations (node-attributed) -> switches.
struct TrialProcessing {
  std::vector<Fixation> fixations;
  std::vector<AttentionSwitch> switches;
};
TrialProcessing process_gaze(const std::vector<GazeSample>& samples, const std::vector<LayoutBox>& boxes,
                             double threshold = kSaccadeThresholdPxPer100Ms,
                             double min_fixation_ms = kDefaultMinFixationMs);

// CSV header `t_ms,x_px,y_px,valid`.
std::vector<GazeSample> read_gaze_csv(std::istream& in);

struct RatingRow {
  std::string participant_id;
  std::string method_id;
  QualityRating rating;
};
// CSV header `participant_id,method_id,a,b,c,d`.
std::vector<RatingRow> read_ratings_csv(std::istream& in);

}  // namespace eyetrans
