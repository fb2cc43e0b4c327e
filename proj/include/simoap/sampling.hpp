#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "simoap/backend.hpp"
#include "simoap/core.hpp"
#include "simoap/rng.hpp"

namespace simoap {

/// The candidate set R for one instance.
struct SamplingRun {
  std::string instance_id;
  std::vector<Candidate> candidates;
  int k = 0;
  std::uint64_t master_seed = 0;
  std::string backend_id;
  double wall_time_generation = 0.0;  // seconds
};

/// Keeps the k most probable entries (ties at the boundary go to the lower
/// token id) and renormalizes. Output is ordered by descending probability,
/// then ascending id.
TokenDistribution top_k_filter(const TokenDistribution& dist, int k);

/// Draws one position of `dist` by inverse CDF over its entry order.
std::size_t draw_index(const TokenDistribution& dist, CounterRng& rng);

using Stepper = std::function<TokenDistribution(const std::vector<std::int64_t>& generated)>;

/// Top-k sampling loop over an arbitrary next-token source. Stops at EOS or
/// after `max_tokens` tokens; the EOS token itself is not counted.
Candidate sample_with(const Stepper& step, int k, std::uint64_t stream_seed, int max_tokens);

/// Autoregressive top-k sampling against a step-wise backend. Stops at EOS
/// or after `max_tokens` tokens; the EOS token itself is not counted.
Candidate sample_sequence(Backend& backend, const std::string& context, int k, std::uint64_t stream_seed,
                          int max_tokens = 32);

/// Generates config.s candidates for `instance`. Candidate i draws from
/// stream hash64(master_seed, instance.id, i). Backends that only offer
/// batch_sample get a single request for all s samples instead.
SamplingRun oversample(Backend& backend, const DialogueInstance& instance, const PipelineConfig& config);

// Generation context sent to the backend: persona then history, one per line.
std::string generation_context(const DialogueInstance& instance);

void to_json(json& j, const SamplingRun& run);
void from_json(const json& j, SamplingRun& run);

}  // namespace simoap
