#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eyetrans/errors.hpp"

namespace eyetrans {

struct ClassScores {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  int support = 0;  // label count
};

// Macro averages over every class that occurs in the labels or the
// predictions, in percent.
struct ClassReport {
  std::map<int, ClassScores> per_class;
  double map_at_1 = 0;
  double mar_at_1 = 0;
  double maf1_at_1 = 0;
  double accuracy = 0;  // percent
};

ClassReport classification_report(std::span<const int> preds, std::span<const int> labels);

// Precision, recall and F1 in [0, 1].
struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

namespace detail {

inline Prf prf_from_counts(double overlap, double cand_total, double ref_total) {
  if (cand_total == 0 && ref_total == 0) return {1, 1, 1};
  if (cand_total == 0 || ref_total == 0) return {0, 0, 0};
  Prf r;
  r.precision = overlap / cand_total;
  r.recall = overlap / ref_total;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0;
  return r;
}

template <typename Key>
double clipped_overlap(const std::map<Key, int>& cand, const std::map<Key, int>& ref) {
  double overlap = 0;
  for (const auto& [k, c] : cand) {
    auto it = ref.find(k);
    if (it != ref.end()) overlap += std::min(c, it->second);
  }
  return overlap;
}

template <typename Token>
std::map<std::vector<Token>, int> ngram_counts(std::span<const Token> seq, std::size_t n) {
  std::map<std::vector<Token>, int> counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) ++counts[std::vector<Token>(seq.begin() + i, seq.begin() + i + n)];
  return counts;
}

template <typename Token>
std::map<std::pair<Token, Token>, int> skip_bigrams(std::span<const Token> seq, int max_skip) {
  std::map<std::pair<Token, Token>, int> counts;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    for (std::size_t j = i + 1; j < seq.size() && static_cast<int>(j - i - 1) <= max_skip; ++j) {
      ++counts[{seq[i], seq[j]}];
    }
  }
  return counts;
}

template <typename Token>
double total(const std::map<Token, int>& m) {
  double s = 0;
  for (const auto& [k, c] : m) s += c;
  return s;
}

}  // namespace detail

// Clipped n-gram overlap. Empty-vs-empty scores 1; empty-vs-nonempty 0.
template <typename Token>
Prf rouge_n(std::span<const Token> candidate, std::span<const Token> reference, std::size_t n) {
  if (n < 1) throw ConfigError("rouge_n needs n >= 1");
  auto c = detail::ngram_counts(candidate, n);
  auto r = detail::ngram_counts(reference, n);
  return detail::prf_from_counts(detail::clipped_overlap(c, r), detail::total(c), detail::total(r));
}

template <typename Token>
std::size_t lcs_length(std::span<const Token> a, std::span<const Token> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

template <typename Token>
Prf rouge_l(std::span<const Token> candidate, std::span<const Token> reference) {
  return detail::prf_from_counts(static_cast<double>(lcs_length(candidate, reference)),
                                 static_cast<double>(candidate.size()), static_cast<double>(reference.size()));
}

inline constexpr int kDefaultMaxSkip = 4;

// Ordered token pairs with at most max_skip tokens between them.
template <typename Token>
Prf rouge_s(std::span<const Token> candidate, std::span<const Token> reference, int max_skip = kDefaultMaxSkip) {
  if (max_skip < 1) throw ConfigError("rouge_s needs max_skip >= 1");
  auto c = detail::skip_bigrams(candidate, max_skip);
  auto r = detail::skip_bigrams(reference, max_skip);
  return detail::prf_from_counts(detail::clipped_overlap(c, r), detail::total(c), detail::total(r));
}

// Skip-bigrams plus unigrams, as if each sequence began with a marker token
// paired with every word.
template <typename Token>
Prf rouge_su(std::span<const Token> candidate, std::span<const Token> reference, int max_skip = kDefaultMaxSkip) {
  if (max_skip < 1) throw ConfigError("rouge_su needs max_skip >= 1");
  auto cs = detail::skip_bigrams(candidate, max_skip);
  auto rs = detail::skip_bigrams(reference, max_skip);
  auto cu = detail::ngram_counts(candidate, 1);
  auto ru = detail::ngram_counts(reference, 1);
  const double overlap = detail::clipped_overlap(cs, rs) + detail::clipped_overlap(cu, ru);
  return detail::prf_from_counts(overlap, detail::total(cs) + detail::total(cu), detail::total(rs) + detail::total(ru));
}

struct RougeReport {
  Prf rouge1, rouge2, rougeL, rougeS, rougeSU;
};

template <typename Token>
RougeReport rouge_all(std::span<const Token> candidate, std::span<const Token> reference, int max_skip = kDefaultMaxSkip) {
  return {rouge_n(candidate, reference, 1), rouge_n(candidate, reference, 2), rouge_l(candidate, reference),
          rouge_s(candidate, reference, max_skip), rouge_su(candidate, reference, max_skip)};
}

// Per-field arithmetic mean of sample reports.
RougeReport mean_rouge(std::span<const RougeReport> reports);

}  // namespace eyetrans
