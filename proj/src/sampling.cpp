#include "simoap/sampling.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "simoap/error.hpp"

namespace simoap {

namespace {

double logsumexp(const std::vector<double>& xs) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : xs) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\n\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\n\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

TokenDistribution top_k_filter(const TokenDistribution& dist, int k) {
  if (k < 1) throw ValidationError("top_k_filter: k must be >= 1");
  const std::size_t n = dist.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(k), n);
  const auto more_likely = [&](std::size_t a, std::size_t b) {
    if (dist.logprobs[a] != dist.logprobs[b]) return dist.logprobs[a] > dist.logprobs[b];
    return dist.token_ids[a] < dist.token_ids[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), more_likely);
  order.resize(keep);

  TokenDistribution out;
  out.eos_token_id = dist.eos_token_id;
  const bool texts = dist.token_texts.size() == n;
  for (std::size_t i : order) {
    out.token_ids.push_back(dist.token_ids[i]);
    out.logprobs.push_back(dist.logprobs[i]);
    if (texts) out.token_texts.push_back(dist.token_texts[i]);
  }
  const double norm = logsumexp(out.logprobs);
  if (!std::isfinite(norm)) throw std::logic_error("top_k_filter: zero probability mass after filtering");
  for (double& lp : out.logprobs) lp -= norm;
  return out;
}

std::size_t draw_index(const TokenDistribution& dist, CounterRng& rng) {
  if (dist.size() == 0) throw std::logic_error("draw_index: empty distribution");
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t last_positive = dist.size();
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const double p = std::exp(dist.logprobs[i]);
    if (p > 0.0) last_positive = i;
    cumulative += p;
    if (u < cumulative) return i;
  }
  // Rounding left the total mass slightly below u.
  if (last_positive == dist.size()) throw std::logic_error("draw_index: zero probability mass");
  return last_positive;
}

Candidate sample_with(const Stepper& step, int k, std::uint64_t stream_seed, int max_tokens) {
  if (max_tokens < 1) throw ValidationError("sample_sequence: max_tokens must be >= 1");
  CounterRng rng(stream_seed);
  std::vector<std::int64_t> tokens;
  std::vector<double> logprobs;
  std::string text;
  for (int i = 0; i < max_tokens; ++i) {
    const TokenDistribution dist = step(tokens);
    validate(dist);
    if (dist.token_texts.size() != dist.size())
      throw ProtocolError("next_token_dist: token_texts required for step-wise sampling");
    const TokenDistribution filtered = top_k_filter(dist, k);
    const std::size_t pick = draw_index(filtered, rng);
    const std::int64_t token = filtered.token_ids[pick];
    if (dist.eos_token_id && token == *dist.eos_token_id) break;
    tokens.push_back(token);
    logprobs.push_back(filtered.logprobs[pick]);
    text += filtered.token_texts[pick];
  }

  Candidate candidate;
  candidate.text = trim(text);
  candidate.token_count = tokens.size();
  candidate.token_logprobs = std::move(logprobs);
  candidate.seed_stream = stream_seed;
  return candidate;
}

Candidate sample_sequence(Backend& backend, const std::string& context, int k, std::uint64_t stream_seed,
                          int max_tokens) {
  if (!backend.descriptor().has(Capability::next_token_dist))
    throw CapabilityError("backend '" + backend.descriptor().backend_id + "' lacks next_token_dist");
  return sample_with([&](const std::vector<std::int64_t>& generated) { return backend.next_token_dist(context, generated); },
                     k, stream_seed, max_tokens);
}

std::string generation_context(const DialogueInstance& instance) {
  std::vector<std::string> lines = instance.persona;
  lines.insert(lines.end(), instance.history.begin(), instance.history.end());
  return join(lines, "\n");
}

SamplingRun oversample(Backend& backend, const DialogueInstance& instance, const PipelineConfig& config) {
  config.validate();
  validate(instance);
  const auto& descriptor = backend.descriptor();
  const auto start = std::chrono::steady_clock::now();

  SamplingRun run;
  run.instance_id = instance.id;
  run.k = config.k;
  run.master_seed = config.master_seed;
  run.backend_id = descriptor.backend_id;
  const std::string context = generation_context(instance);

  if (descriptor.has(Capability::next_token_dist)) {
    run.candidates.reserve(static_cast<std::size_t>(config.s));
    for (int i = 0; i < config.s; ++i) {
      const auto seed = hash64(config.master_seed, instance.id, static_cast<std::uint64_t>(i));
      Candidate candidate = sample_sequence(backend, context, config.k, seed, config.max_tokens);
      candidate.index = static_cast<std::size_t>(i);
      run.candidates.push_back(std::move(candidate));
    }
  } else if (descriptor.has(Capability::batch_sample)) {
    run.candidates = backend.batch_sample(context, config.k, config.s, hash64(config.master_seed, instance.id, 0),
                                          config.max_tokens);
    if (run.candidates.size() != static_cast<std::size_t>(config.s))
      throw ProtocolError("batch_sample returned " + std::to_string(run.candidates.size()) + " of " +
                          std::to_string(config.s) + " candidates");
    for (std::size_t i = 0; i < run.candidates.size(); ++i) {
      if (run.candidates[i].index != i) throw ProtocolError("batch_sample candidate indices are not 0..n-1");
      validate(run.candidates[i]);
    }
  } else {
    throw CapabilityError("backend '" + descriptor.backend_id + "' supports neither next_token_dist nor batch_sample");
  }

  run.wall_time_generation = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

void to_json(json& j, const SamplingRun& run) {
  j = json{{"instance_id", run.instance_id}, {"backend_id", run.backend_id}, {"k", run.k},
           {"s", run.candidates.size()},     {"master_seed", run.master_seed}, {"candidates", run.candidates}};
}

void from_json(const json& j, SamplingRun& run) {
  j.at("instance_id").get_to(run.instance_id);
  j.at("backend_id").get_to(run.backend_id);
  j.at("k").get_to(run.k);
  j.at("master_seed").get_to(run.master_seed);
  j.at("candidates").get_to(run.candidates);
  run.wall_time_generation = j.value("wall_time_generation", 0.0);
}

}  // namespace simoap
