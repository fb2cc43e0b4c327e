#include "simoap/baselines.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "simoap/error.hpp"

namespace simoap {

BackwardQuery BackwardQuery::make(const DialogueInstance& instance, const std::string& response) {
  std::vector<std::string> source = instance.persona;
  source.insert(source.end(), instance.history.begin(), instance.history.end());
  return {response, join(source)};
}

void sort_ranked(RankedScores& ranked) {
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
}

MmiResult mmi_rerank(Backend& backward_scorer, const DialogueInstance& instance, std::span<const Candidate> candidates) {
  if (candidates.empty()) throw ValidationError("mmi_rerank: candidate list is empty");
  MmiResult result;
  for (const auto& candidate : candidates) {
    const auto query = BackwardQuery::make(instance, candidate.text);
    try {
      const auto scored = backward_scorer.loglikelihood(query.response_text, query.source_text);
      result.ranking.emplace_back(candidate.index, scored.total_loglik);
    } catch (const TransportError& e) {
      result.failures.emplace_back(candidate.index, e.what());
    } catch (const ProtocolError& e) {
      result.failures.emplace_back(candidate.index, e.what());
    }
  }
  if (result.ranking.empty())
    throw TransportError("mmi_rerank: every backward query failed for instance '" + instance.id + "'", 1);
  sort_ranked(result.ranking);
  return result;
}

double lls_score(double total_loglik, std::size_t token_count) {
  if (token_count == 0) throw ValidationError("lls_score: token_count must be >= 1");
  return total_loglik / static_cast<double>(token_count);
}

RankedScores lls_rerank(std::span<const Candidate> candidates) {
  RankedScores ranked;
  ranked.reserve(candidates.size());
  for (const auto& candidate : candidates) {
    if (!candidate.token_logprobs)
      throw ValidationError("lls_rerank: candidate " + std::to_string(candidate.index) + " has no token_logprobs");
    const auto& lps = *candidate.token_logprobs;
    const double total = std::accumulate(lps.begin(), lps.end(), 0.0);
    // An immediately-terminated response has no defined LLS; it ranks last.
    ranked.emplace_back(candidate.index, lps.empty() ? -std::numeric_limits<double>::infinity()
                                                     : lls_score(total, lps.size()));
  }
  sort_ranked(ranked);
  return ranked;
}

}  // namespace simoap
