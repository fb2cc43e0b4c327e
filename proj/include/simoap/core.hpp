#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace simoap {

using json = nlohmann::json;

/// One persona-grounded dialogue example: persona sentences, history
/// utterances and the gold response.
struct DialogueInstance {
  std::string id;
  std::vector<std::string> persona;
  std::vector<std::string> history;
  std::string gold;

  bool operator==(const DialogueInstance&) const = default;
};

/// A sampled response. `index` is the position in sampling order and
/// `token_logprobs` (natural log) is present when the sampler saw the
/// distribution it drew from.
struct Candidate {
  std::string text;
  std::size_t index = 0;
  std::size_t token_count = 0;
  std::optional<std::vector<double>> token_logprobs;
  std::uint64_t seed_stream = 0;

  bool operator==(const Candidate&) const = default;
};

enum class NliLabel { entailment, neutral, contradiction };

std::string to_string(NliLabel label);
NliLabel parse_nli_label(const std::string& name);

/// Per-candidate stage scores. Absent fields were not computed for this
/// candidate (e.g. entailment for candidates dropped by the coherence filter).
struct ScoreRecord {
  std::size_t candidate_index = 0;
  std::optional<double> coherence_sim;
  std::optional<double> entailment_prob;
  std::optional<NliLabel> nli_label;
  std::optional<double> backward_loglik;
  std::optional<double> lls;
  std::optional<std::string> error;

  bool operator==(const ScoreRecord&) const = default;
};

enum class CoherenceContext { full_history, last_two };
enum class PersonaAggregation { max, mean };

struct PipelineConfig {
  int k = 100;
  int s = 2000;
  int c = 100;
  CoherenceContext coherence_context = CoherenceContext::full_history;
  std::uint64_t master_seed = 0;
  PersonaAggregation persona_aggregation = PersonaAggregation::max;
  int max_tokens = 32;
  // Disabling the consistency stage makes the coherence top-1 the final response.
  bool consistency_enabled = true;

  void validate() const;
};

// Validates field invariants; throws ValidationError.
void validate(const DialogueInstance& instance, bool require_gold = false);
void validate(const Candidate& candidate);
void validate(const ScoreRecord& record);

std::vector<DialogueInstance> load_dataset(const std::filesystem::path& path);
std::vector<DialogueInstance> parse_dataset(std::istream& in);
void write_dataset(std::ostream& out, const std::vector<DialogueInstance>& instances);

std::string coherence_context(const DialogueInstance& instance, CoherenceContext mode);

std::string join(const std::vector<std::string>& parts, std::string_view separator = " ");

void to_json(json& j, const DialogueInstance& v);
void from_json(const json& j, DialogueInstance& v);
void to_json(json& j, const Candidate& v);
void from_json(const json& j, Candidate& v);
void to_json(json& j, const ScoreRecord& v);
void from_json(const json& j, ScoreRecord& v);
void to_json(json& j, const PipelineConfig& v);
void from_json(const json& j, PipelineConfig& v);

NLOHMANN_JSON_SERIALIZE_ENUM(CoherenceContext, {{CoherenceContext::full_history, "full_history"},
                                                {CoherenceContext::last_two, "last_two"}})
NLOHMANN_JSON_SERIALIZE_ENUM(PersonaAggregation,
                             {{PersonaAggregation::max, "max"}, {PersonaAggregation::mean, "mean"}})

}  // namespace simoap
