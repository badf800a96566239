#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace eyetrans {

// Deterministic rule-based rewording of a summary: phrase synonyms first,
// then single-word synonyms. Where a rule offers several alternatives the
// seed picks one. Words without a rule pass through unchanged.
std::vector<std::string> label_paraphrase(const std::vector<std::string>& summary, std::uint64_t seed);

}  // namespace eyetrans
