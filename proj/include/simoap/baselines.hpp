#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simoap/backend.hpp"
#include "simoap/core.hpp"

namespace simoap {

/// Backward-model query for MMI: log P(source | response), where the source
/// is the persona sentences followed by the history utterances.
struct BackwardQuery {
  std::string response_text;
  std::string source_text;

  static BackwardQuery make(const DialogueInstance& instance, const std::string& response);
};

using RankedScores = std::vector<std::pair<std::size_t, double>>;

// Sorts by score descending, ties by ascending candidate index.
void sort_ranked(RankedScores& ranked);

struct MmiResult {
  RankedScores ranking;
  // candidate index -> error message for candidates whose query failed.
  std::vector<std::pair<std::size_t, std::string>> failures;
};

/// Reranks by the backward scorer's (unnormalized) total loglik. A failed
/// query drops that candidate and is reported; if every query fails the
/// whole instance fails.
MmiResult mmi_rerank(Backend& backward_scorer, const DialogueInstance& instance, std::span<const Candidate> candidates);

/// Length-normalized loglikelihood, natural log.
double lls_score(double total_loglik, std::size_t token_count);

// Zero-token candidates score -inf.
RankedScores lls_rerank(std::span<const Candidate> candidates);

}  // namespace simoap
