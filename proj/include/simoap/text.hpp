#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace simoap {

// Lowercase, split on whitespace, strip leading/trailing ASCII punctuation
// from each token and drop tokens left empty. No stemming or stop-words.
std::vector<std::string> tokenize(std::string_view text);

// Trimmed, single-spaced form used for sentence-level comparisons.
std::string normalize_sentence(std::string_view text);

}  // namespace simoap
