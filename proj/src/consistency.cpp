#include "simoap/consistency.hpp"

#include <limits>

#include "simoap/error.hpp"

namespace simoap {

PersonaEntailment aggregate_judgments(std::span<const NliJudgment> judgments, PersonaAggregation aggregation) {
  if (judgments.empty()) throw ValidationError("persona_entailment: persona is empty");
  std::size_t best = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < judgments.size(); ++i) {
    sum += judgments[i].entailment;
    if (judgments[i].entailment > judgments[best].entailment) best = i;
  }
  const double prob = aggregation == PersonaAggregation::max ? judgments[best].entailment
                                                             : sum / static_cast<double>(judgments.size());
  return {prob, judgments[best].argmax()};
}

PersonaEntailment persona_entailment(Backend& scorer, const std::vector<std::string>& persona,
                                     const std::string& candidate_text, PersonaAggregation aggregation) {
  if (persona.empty()) throw ValidationError("persona_entailment: persona is empty");
  std::vector<NliJudgment> judgments;
  judgments.reserve(persona.size());
  for (const auto& sentence : persona) {
    auto judgment = scorer.nli(sentence, candidate_text);
    validate(judgment);
    judgments.push_back(judgment);
  }
  return aggregate_judgments(judgments, aggregation);
}

std::size_t select_final(std::span<const ScoreRecord> scored) {
  const ScoreRecord* best = nullptr;
  const auto sim = [](const ScoreRecord& r) {
    return r.coherence_sim.value_or(-std::numeric_limits<double>::infinity());
  };
  for (const auto& record : scored) {
    if (!record.entailment_prob) continue;
    if (!best) {
      best = &record;
      continue;
    }
    const double p = *record.entailment_prob, q = *best->entailment_prob;
    if (p != q) {
      if (p > q) best = &record;
    } else if (sim(record) != sim(*best)) {
      if (sim(record) > sim(*best)) best = &record;
    } else if (record.candidate_index < best->candidate_index) {
      best = &record;
    }
  }
  if (!best) throw ValidationError("select_final: no scored candidates");
  return best->candidate_index;
}

}  // namespace simoap
