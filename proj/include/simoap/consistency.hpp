#pragma once

#include <span>
#include <string>
#include <vector>

#include "simoap/backend.hpp"
#include "simoap/core.hpp"

namespace simoap {

struct PersonaEntailment {
  double entailment_prob = 0.0;
  NliLabel label = NliLabel::neutral;
};

/// Scores `candidate_text` (hypothesis) against every persona sentence
/// (premise) and aggregates the entailment probabilities. The label comes
/// from the judgment of the sentence with maximal entailment, for both
/// aggregations.
PersonaEntailment persona_entailment(Backend& scorer, const std::vector<std::string>& persona,
                                     const std::string& candidate_text,
                                     PersonaAggregation aggregation = PersonaAggregation::max);

PersonaEntailment aggregate_judgments(std::span<const NliJudgment> judgments, PersonaAggregation aggregation);

/// Index of the record with the highest entailment probability; ties go to
/// the higher coherence similarity, then the lower candidate index.
/// Records without an entailment probability are skipped.
std::size_t select_final(std::span<const ScoreRecord> scored);

}  // namespace simoap
