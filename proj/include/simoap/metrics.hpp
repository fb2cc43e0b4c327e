#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simoap/core.hpp"

namespace simoap {

/// Corpus-level distinct-n: unique n-grams over all responses divided by
/// the total n-gram count; 0 when no response has n tokens.
double distinct_n(std::span<const std::string> responses, int n);

/// Fraction of responses that duplicate another response (after trimming and
/// collapsing whitespace) while differing from their own gold.
double repetition_rate(std::span<const std::string> responses, std::span<const std::string> golds);

inline constexpr double kMaskedLmPplFilter = 10000.0;

/// Mean PPL after dropping entries above `filter_threshold` when set.
double ppl_aggregate(std::span<const double> per_response_ppl, std::optional<double> filter_threshold = {});

// exp(-total_loglik / token_count)
double perplexity(double total_loglik, std::size_t token_count);

int consistency_score(NliLabel label);
int consistency_score(const std::string& label);
double c_mean(std::span<const NliLabel> labels);

enum class Grouping { per_block, global };

NLOHMANN_JSON_SERIALIZE_ENUM(Grouping, {{Grouping::per_block, "per_block"}, {Grouping::global, "global"}})

/// One row of the system comparison table. `block` groups systems that
/// share a backbone; ppl_a is the masked-LM channel, ppl_b the causal-LM one.
struct SystemResults {
  std::string system_name;
  std::string block = "default";
  std::vector<std::pair<std::string, std::string>> responses;  // (instance_id, text)
  double ppl_a = 0.0;
  double ppl_b = 0.0;
  double dis1 = 0.0;
  double dis2 = 0.0;
  double c_score = 0.0;
  double rep = 0.0;
  double generation_seconds = 0.0;
  double evaluation_seconds = 0.0;
};

void to_json(json& j, const SystemResults& v);
void from_json(const json& j, SystemResults& v);

struct NormalizedScores {
  double avg = 0.0;
  double avg_r = 0.0;
};

/// Min-max normalizes each indicator within its group (negating both PPL
/// columns and Rep). Avg averages {-PPL_a, -PPL_b, Dis-1, Dis-2, C}; Avg-R
/// adds -Rep. A column constant within its group maps to 0.5.
std::vector<NormalizedScores> normalized_averages(std::span<const SystemResults> table,
                                                  Grouping grouping = Grouping::per_block);

struct MetricsReport {
  Grouping grouping = Grouping::per_block;
  std::vector<SystemResults> systems;
  std::vector<NormalizedScores> scores;
};

void to_json(json& j, const MetricsReport& v);

/// Aligned plain-text table, columns PPL_a PPL_b Dis-1 Dis-2 C Avg Rep Avg-R
/// followed by the timing columns.
std::string render_table(const MetricsReport& report);

}  // namespace simoap
