#include "eyetrans/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "eyetrans/augment.hpp"
#include "eyetrans/errors.hpp"
#include "eyetrans/io.hpp"
#include "eyetrans/paraphrase.hpp"

namespace eyetrans {

using nlohmann::json;

bool TierFlags::has(Tier t) const {
  switch (t) {
    case Tier::original:
      return original;
    case Tier::filtered:
      return filtered;
    case Tier::strict:
      return strict;
  }
  return false;
}

TierFlags TierFlags::from_rating(const QualityRating& r) {
  return {passes_tier(r, Tier::original), passes_tier(r, Tier::filtered), passes_tier(r, Tier::strict)};
}

void validate_row(const DatasetRow& row) {
  const std::size_t n = row.tokens.size();
  if (n == 0) throw ValidationError(row.id + ": empty token list");
  if (row.heights.size() != n) throw ValidationError(row.id + ": tokens and heights differ in length");
  if (n > static_cast<std::size_t>(kMaxTokens)) throw TooLarge(row.id + ": more than 200 tokens");
  for (std::size_t i = 0; i < n; ++i) {
    if (row.tokens[i] < 0 || row.tokens[i] >= kNumCategories) throw ValidationError(row.id + ": category id out of range");
    if (row.heights[i] < 0 || row.heights[i] > kMaxHeight) throw ValidationError(row.id + ": height out of range");
  }
  for (std::size_t i = 0; i < row.switches.size(); ++i) {
    const IndexedSwitch& s = row.switches[i];
    if (s.ordinal != static_cast<int>(i) + 1) throw ValidationError(row.id + ": switch ordinals must be 1..K");
    if (s.src >= n || s.dst >= n) throw ValidationError(row.id + ": switch index out of range");
    if (s.src == s.dst) throw ValidationError(row.id + ": self-switch");
  }
  if (row.label_class && (*row.label_class < 0 || *row.label_class >= kMaxClasses)) {
    throw ValidationError(row.id + ": label_class outside [0, 300)");
  }
}

json row_to_json(const DatasetRow& row) {
  json j;
  j["format_version"] = kDatasetFormatVersion;
  j["id"] = row.id;
  j["tokens"] = row.tokens;
  j["heights"] = row.heights;
  json sw = json::array();
  for (const IndexedSwitch& s : row.switches) sw.push_back({s.ordinal, s.src, s.dst});
  j["switches"] = std::move(sw);
  if (row.label_class) j["label_class"] = *row.label_class;
  if (!row.summary.empty()) j["summary"] = row.summary;
  j["tiers"] = {{"original", row.tiers.original}, {"filtered", row.tiers.filtered}, {"strict", row.tiers.strict}};
  return j;
}

DatasetRow row_from_json(const json& j) {
  try {
    if (j.contains("format_version") && j.at("format_version").get<int>() != kDatasetFormatVersion) {
      throw FormatError("unsupported dataset format_version");
    }
    DatasetRow row;
    row.id = j.at("id").get<std::string>();
    row.tokens = j.at("tokens").get<std::vector<int>>();
    row.heights = j.at("heights").get<std::vector<int>>();
    for (const json& s : j.at("switches")) {
      if (!s.is_array() || s.size() != 3) throw FormatError("switch entries are [ordinal, src, dst]");
      row.switches.push_back({s[0].get<int>(), s[1].get<std::size_t>(), s[2].get<std::size_t>()});
    }
    if (j.contains("label_class") && !j["label_class"].is_null()) row.label_class = j["label_class"].get<int>();
    if (j.contains("summary")) row.summary = j["summary"].get<std::vector<int>>();
    if (j.contains("tiers")) {
      const json& t = j["tiers"];
      row.tiers = {t.value("original", true), t.value("filtered", false), t.value("strict", false)};
    }
    validate_row(row);
    return row;
  } catch (const json::exception& e) {
    throw FormatError(std::string("dataset row: ") + e.what());
  }
}

std::string rows_to_jsonl(const std::vector<DatasetRow>& rows) {
  std::string out;
  for (const DatasetRow& r : rows) {
    out += row_to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<DatasetRow> read_rows_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingDataset("cannot open " + path.string());
  std::vector<DatasetRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(row_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw FormatError(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw FormatError(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<std::string> tokenize_summary(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

json trial_to_json(const TrialRecord& t) {
  json sw = json::array();
  for (const auto& s : t.switches) sw.push_back({s.ordinal, s.src, s.dst});
  return {{"format_version", kDatasetFormatVersion},
          {"participant_id", t.participant_id},
          {"method_id", t.method_id},
          {"switches", sw},
          {"rating",
           {{"a", t.rating.accuracy}, {"b", t.rating.completeness}, {"c", t.rating.verbosity}, {"d", t.rating.english}}}};
}

TrialRecord trial_from_json(const json& j) {
  try {
    if (j.contains("format_version") && j["format_version"] != kDatasetFormatVersion) {
      throw FormatError("unsupported trial format_version");
    }
    TrialRecord t;
    t.participant_id = j.at("participant_id").get<std::string>();
    t.method_id = j.at("method_id").get<std::string>();
    for (const auto& s : j.at("switches")) {
      if (!s.is_array() || s.size() != 3) throw FormatError("switches are [ordinal, src, dst]");
      t.switches.push_back({s[0].get<int>(), s[1].get<NodeId>(), s[2].get<NodeId>()});
    }
    if (j.contains("rating")) {
      const json& r = j["rating"];
      t.rating = {r.at("a").get<int>(), r.at("b").get<int>(), r.at("c").get<int>(), r.at("d").get<int>()};
    }
    return t;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad trial record: ") + e.what());
  }
}

std::string trials_to_jsonl(const std::vector<TrialRecord>& trials) {
  std::string out;
  for (const auto& t : trials) out += trial_to_json(t).dump() + "\n";
  return out;
}

std::vector<TrialRecord> read_trials_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingDataset("cannot open " + path.string());
  std::vector<TrialRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(trial_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw FormatError(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw FormatError(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

Vocabulary::Vocabulary() : words_{"<pad>", "<bos>", "<eos>", "<unk>"} {
  for (int i = 0; i < size(); ++i) index_[words_[i]] = i;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& summaries, int cap) {
  if (cap < 4) throw ConfigError("vocabulary cap must leave room for the reserved ids");
  std::map<std::string, int> counts;
  for (const auto& s : summaries)
    for (const auto& w : s) ++counts[w];
  std::vector<std::pair<std::string, int>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [w, c] : ranked) {
    if (v.size() >= cap) break;
    if (v.index_.count(w)) continue;
    v.index_[w] = v.size();
    v.words_.push_back(w);
  }
  return v;
}

int Vocabulary::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::word(int id) const {
  if (id < 0 || id >= size()) return words_[kUnk];
  return words_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& words) const {
  std::vector<int> out;
  for (const auto& w : words) out.push_back(id(w));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  for (int i : ids) {
    if (i == kEos) break;
    if (i == kPad || i == kBos) continue;
    out.push_back(word(i));
  }
  return out;
}

json Vocabulary::to_json() const { return {{"format_version", kDatasetFormatVersion}, {"words", words_}}; }

Vocabulary Vocabulary::from_json(const json& j) {
  auto words = j.at("words").get<std::vector<std::string>>();
  Vocabulary base;
  if (words.size() < 4 || !std::equal(base.words_.begin(), base.words_.end(), words.begin())) {
    throw FormatError("vocabulary must start with the reserved tokens");
  }
  Vocabulary v;
  v.words_ = std::move(words);
  v.index_.clear();
  for (int i = 0; i < v.size(); ++i) {
    if (!v.index_.emplace(v.words_[static_cast<std::size_t>(i)], i).second) throw FormatError("duplicate vocabulary word");
  }
  return v;
}

DatasetRow make_row(std::string id, const Ast& ast, const std::vector<AttentionSwitch>& switches, TierFlags tiers,
                    const Vocabulary* vocab) {
  const TokenSequence seq = bfs_serialize(ast);
  DatasetRow row;
  row.id = std::move(id);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    row.tokens.push_back(category_id(seq.categories[i]));
    row.heights.push_back(seq.heights[i]);
  }
  row.switches = index_switches(seq, switches);
  row.label_class = ast.label_class();
  if (vocab && !ast.summary().empty()) {
    row.summary = vocab->encode(ast.summary());
    if (row.summary.size() > static_cast<std::size_t>(kMaxSummaryLength)) row.summary.resize(kMaxSummaryLength);
  }
  row.tiers = tiers;
  validate_row(row);
  return row;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double train_fraction,
                                                                            std::uint64_t seed) {
  if (train_fraction < 0 || train_fraction > 1) throw ConfigError("train_fraction must lie in [0,1]");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto cut = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
  return {std::vector<std::size_t>(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut)),
          std::vector<std::size_t>(idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end())};
}

Split split_rows(const std::vector<DatasetRow>& rows, double train_fraction, std::uint64_t seed) {
  auto [tr, te] = split_indices(rows.size(), train_fraction, seed);
  Split s;
  for (auto i : tr) s.train.push_back(rows[i]);
  for (auto i : te) s.test.push_back(rows[i]);
  return s;
}

std::vector<DatasetRow> select_tier(const std::vector<DatasetRow>& rows, Tier tier) {
  std::vector<DatasetRow> out;
  for (const auto& r : rows)
    if (r.tiers.has(tier)) out.push_back(r);
  return out;
}

namespace {

int tier_rank(const TierFlags& f) { return f.strict ? 0 : f.filtered ? 1 : 2; }

struct PendingRow {
  DatasetRow row;
  std::vector<std::string> words;
};

}  // namespace

BuiltDataset build_dataset(const std::vector<Ast>& asts, const std::vector<TrialRecord>& trials,
                           const DatasetBuildConfig& cfg) {
  std::map<std::string, const Ast*> by_id;
  for (const Ast& a : asts) {
    if (!by_id.emplace(a.method_id(), &a).second) throw ValidationError("duplicate method_id " + a.method_id());
  }

  // Higher tiers first so that when two trials produce the same key the
  // retained copy keeps the stricter membership.
  std::vector<std::size_t> order(trials.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<TierFlags> flags;
  for (const auto& t : trials) flags.push_back(TierFlags::from_rating(t.rating));
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return tier_rank(flags[a]) < tier_rank(flags[b]); });

  std::vector<AugmentInput> inputs;
  std::map<std::string, TierFlags> sample_tiers;
  std::map<std::string, int> trial_counts{{"original", 0}, {"filtered", 0}, {"strict", 0}};
  for (std::size_t i : order) {
    const TrialRecord& t = trials[i];
    const std::string where = "trial " + t.participant_id + "/" + t.method_id;
    auto it = by_id.find(t.method_id);
    if (it == by_id.end()) throw ValidationError(where + ": unknown method_id");
    try {
      validate_switches(t.switches, *it->second);
    } catch (const DanglingEndpoint& e) {
      throw DanglingEndpoint(where + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (!sample_tiers.emplace(t.method_id + '\x1f' + t.participant_id, flags[i]).second) {
      throw ValidationError(where + ": duplicate trial");
    }
    for (Tier tier : {Tier::original, Tier::filtered, Tier::strict}) {
      if (flags[i].has(tier)) ++trial_counts[std::string(tier_name(tier))];
    }
    inputs.push_back({t.participant_id, *it->second, t.switches});
  }

  const auto samples = augment_dataset(inputs, cfg.augment_k, cfg.augment_seed);
  std::vector<PendingRow> all;
  for (const AugmentedSample& s : samples) {
    const TierFlags tf = sample_tiers.at(s.base_method_id + '\x1f' + s.sample_id);
    std::string id = s.base_method_id + "/" + s.sample_id + "/v" + std::to_string(s.variant_index);
    PendingRow p{make_row(std::move(id), s.ast, s.switches, tf), s.ast.summary()};
    if (s.variant_index > 0 && cfg.paraphrase_variants) p.words = label_paraphrase(p.words, s.provenance_seed);
    all.push_back(std::move(p));
  }

  std::map<std::string, int> row_counts{{"original", 0}, {"filtered", 0}, {"strict", 0}};
  std::vector<PendingRow> selected;
  for (auto& p : all) {
    for (Tier tier : {Tier::original, Tier::filtered, Tier::strict}) {
      if (p.row.tiers.has(tier)) ++row_counts[std::string(tier_name(tier))];
    }
    if (p.row.tiers.has(cfg.tier)) selected.push_back(std::move(p));
  }
  if (selected.empty()) throw EmptyTier("no rows pass the " + std::string(tier_name(cfg.tier)) + " tier");

  auto [tr, te] = split_indices(selected.size(), cfg.train_fraction, cfg.split_seed);
  std::vector<std::vector<std::string>> train_words;
  for (auto i : tr) train_words.push_back(selected[i].words);
  BuiltDataset out;
  out.vocab = Vocabulary::build(train_words, cfg.vocab_cap);
  auto finish = [&](PendingRow& p) {
    if (!p.words.empty()) {
      p.row.summary = out.vocab.encode(p.words);
      if (p.row.summary.size() > static_cast<std::size_t>(kMaxSummaryLength)) p.row.summary.resize(kMaxSummaryLength);
    }
    return p.row;
  };
  for (auto i : tr) out.split.train.push_back(finish(selected[i]));
  for (auto i : te) out.split.test.push_back(finish(selected[i]));

  out.manifest = {{"format_version", kDatasetFormatVersion},
                  {"tier", tier_name(cfg.tier)},
                  {"augment_k", cfg.augment_k},
                  {"augment_seed", cfg.augment_seed},
                  {"split_seed", cfg.split_seed},
                  {"train_fraction", cfg.train_fraction},
                  {"methods", asts.size()},
                  {"trials", trial_counts},
                  {"rows", row_counts},
                  {"selected_rows", selected.size()},
                  {"train_rows", out.split.train.size()},
                  {"test_rows", out.split.test.size()},
                  {"vocab_size", out.vocab.size()}};
  return out;
}

void write_dataset(const std::filesystem::path& dir, const BuiltDataset& data) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "train.jsonl", rows_to_jsonl(data.split.train));
  write_file_atomic(dir / "test.jsonl", rows_to_jsonl(data.split.test));
  write_file_atomic(dir / "vocab.json", data.vocab.to_json().dump(2) + "\n");
  write_file_atomic(dir / "manifest.json", data.manifest.dump(2) + "\n");
}

LoadedDataset load_dataset(const std::filesystem::path& dir) {
  for (const char* f : {"train.jsonl", "test.jsonl"}) {
    if (!std::filesystem::exists(dir / f)) throw MissingDataset("missing " + (dir / f).string());
  }
  LoadedDataset d;
  d.train = read_rows_jsonl(dir / "train.jsonl");
  d.test = read_rows_jsonl(dir / "test.jsonl");
  if (std::filesystem::exists(dir / "vocab.json")) d.vocab = Vocabulary::from_json(json::parse(read_file(dir / "vocab.json")));
  if (std::filesystem::exists(dir / "manifest.json")) d.manifest = json::parse(read_file(dir / "manifest.json"));
  return d;
}

}  // namespace eyetrans
