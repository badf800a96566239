#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eyetrans/ast.hpp"
#include "eyetrans/attention_switch.hpp"
#include "eyetrans/embedding.hpp"
#include "eyetrans/gaze.hpp"
#include "json.hpp"

namespace eyetrans {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr int kMaxClasses = 300;
inline constexpr int kMaxVocab = 2000;
inline constexpr int kMaxSummaryLength = 30;
inline constexpr std::uint64_t kSplitSeed = 42;

struct TierFlags {
  bool original = true;
  bool filtered = false;
  bool strict = false;

  bool has(Tier t) const;
  static TierFlags from_rating(const QualityRating& r);
  bool operator==(const TierFlags&) const = default;
};

// One model input: BFS categories and heights plus switches indexed into the
// sequence, with a class label or a summary (token ids).
struct DatasetRow {
  std::string id;
  std::vector<int> tokens;
  std::vector<int> heights;
  std::vector<IndexedSwitch> switches;
  std::optional<int> label_class;
  std::vector<int> summary;
  TierFlags tiers;

  bool operator==(const DatasetRow&) const = default;
};

// Throws ValidationError on unequal lists, out-of-range indices or
// non-consecutive ordinals.
void validate_row(const DatasetRow& row);
nlohmann::json row_to_json(const DatasetRow& row);
DatasetRow row_from_json(const nlohmann::json& j);
std::string rows_to_jsonl(const std::vector<DatasetRow>& rows);
std::vector<DatasetRow> read_rows_jsonl(const std::filesystem::path& path);

// Word vocabulary for summaries. Ids 0..3 are reserved.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  Vocabulary();
  // Most frequent words first (ties alphabetical), capped at `cap` ids
  // including the reserved ones.
  static Vocabulary build(const std::vector<std::vector<std::string>>& summaries, int cap = kMaxVocab);

  int size() const { return static_cast<int>(words_.size()); }
  int id(const std::string& word) const;
  const std::string& word(int id) const;
  std::vector<int> encode(const std::vector<std::string>& words) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> index_;
};

DatasetRow make_row(std::string id, const Ast& ast, const std::vector<AttentionSwitch>& switches, TierFlags tiers,
                    const Vocabulary* vocab = nullptr);

struct Split {
  std::vector<DatasetRow> train;
  std::vector<DatasetRow> test;
};

// Seeded shuffle of 0..n-1; the first floor(fraction * n) indices train.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double train_fraction = 0.8,
                                                                            std::uint64_t seed = kSplitSeed);
Split split_rows(const std::vector<DatasetRow>& rows, double train_fraction = 0.8, std::uint64_t seed = kSplitSeed);

std::vector<DatasetRow> select_tier(const std::vector<DatasetRow>& rows, Tier tier);

// Switches of one participant reading one method.
struct TrialRecord {
  std::string participant_id;
  std::string method_id;
  std::vector<AttentionSwitch> switches;
  QualityRating rating;
};

// {"format_version", participant_id, method_id, switches: [[k, src, dst]],
// rating: {a, b, c, d}}; switch endpoints are node ids.
nlohmann::json trial_to_json(const TrialRecord& t);
TrialRecord trial_from_json(const nlohmann::json& j);
std::string trials_to_jsonl(const std::vector<TrialRecord>& trials);
std::vector<TrialRecord> read_trials_jsonl(const std::filesystem::path& path);

// Lowercase words split on anything that is not a letter or digit.
std::vector<std::string> tokenize_summary(std::string_view text);

struct DatasetBuildConfig {
  Tier tier = Tier::original;
  int augment_k = 3;
  std::uint64_t augment_seed = 0;
  std::uint64_t split_seed = kSplitSeed;
  double train_fraction = 0.8;
  int vocab_cap = kMaxVocab;
  bool paraphrase_variants = true;
};

struct BuiltDataset {
  Split split;
  Vocabulary vocab;
  nlohmann::json manifest;
};

// Augments every trial, dedups, tags tier membership, keeps the requested
// tier and splits. Throws EmptyTier when nothing survives the filter.
BuiltDataset build_dataset(const std::vector<Ast>& asts, const std::vector<TrialRecord>& trials,
                           const DatasetBuildConfig& cfg);

// train.jsonl, test.jsonl, vocab.json, manifest.json.
void write_dataset(const std::filesystem::path& dir, const BuiltDataset& data);

struct LoadedDataset {
  std::vector<DatasetRow> train;
  std::vector<DatasetRow> test;
  Vocabulary vocab;
  nlohmann::json manifest;
};
// Throws MissingDataset if the split files are absent.
LoadedDataset load_dataset(const std::filesystem::path& dir);

}  // namespace eyetrans
