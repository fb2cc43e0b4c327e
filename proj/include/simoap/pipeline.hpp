#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simoap/backend.hpp"
#include "simoap/core.hpp"
#include "simoap/metrics.hpp"
#include "simoap/sampling.hpp"

namespace simoap {

enum class Reranker { simoap, simoap_q, mmi, lls, none };

std::string to_string(Reranker reranker);
Reranker parse_reranker(const std::string& name);

struct Backends {
  std::shared_ptr<Backend> generator;
  std::shared_ptr<Backend> nli;     // consistency stage
  std::shared_ptr<Backend> scorer;  // backward loglik for MMI
};

/// JSONL store of SamplingRuns keyed by (instance_id, backend_id, k, s,
/// master_seed). Safe for concurrent use; `flush` rewrites the file in key
/// order.
class CandidateCache {
 public:
  explicit CandidateCache(std::filesystem::path dir);

  std::optional<SamplingRun> find(const std::string& instance_id, const std::string& backend_id, int k, int s,
                                  std::uint64_t master_seed) const;
  void put(const SamplingRun& run);
  void flush() const;
  std::size_t size() const;

  static std::string key(const std::string& instance_id, const std::string& backend_id, int k, int s,
                         std::uint64_t master_seed);

 private:
  std::filesystem::path file_;
  mutable std::mutex mutex_;
  std::map<std::string, SamplingRun> runs_;
};

struct InstanceResult {
  std::string instance_id;
  SamplingRun run;
  std::vector<ScoreRecord> scores;  // one per candidate, candidate-index order
  std::optional<std::size_t> final_index;
  std::string final_text;
  // Stage boundaries share timestamps, so generation + evaluation == total.
  double generation_seconds = 0.0;
  double evaluation_seconds = 0.0;
  double total_seconds = 0.0;
  bool cache_hit = false;
  std::optional<std::string> error;
};

struct PipelineResult {
  std::vector<InstanceResult> instances;  // dataset order
  std::size_t failures() const;
};

struct RunOptions {
  Reranker reranker = Reranker::simoap;
  int workers = 1;
  CandidateCache* cache = nullptr;
};

/// Over-samples every instance, then applies the chosen reranker. For
/// simoap/simoap-q: coherence top-c, then persona entailment argmax (or the
/// coherence top-1 when the consistency stage is disabled). Per-instance
/// failures are captured, not thrown.
PipelineResult run_pipeline(std::span<const DialogueInstance> dataset, const PipelineConfig& config,
                            const Backends& backends, const RunOptions& options = {});

/// Post-evaluation of one already-sampled instance.
void rerank_instance(InstanceResult& result, const DialogueInstance& instance, const PipelineConfig& config,
                     const Backends& backends, Reranker reranker);

/// Writes candidates.jsonl, scores.jsonl, final.jsonl (deterministic given
/// the inputs) and timings.json.
void write_run(const std::filesystem::path& dir, const PipelineResult& result);

/// Final responses keyed by instance id from a final.jsonl file.
std::map<std::string, std::string> read_finals(const std::filesystem::path& final_jsonl);
std::vector<SamplingRun> read_candidates(const std::filesystem::path& candidates_jsonl);

// --- rank analysis -----------------------------------------------------------

struct RankCandidate {
  std::optional<double> ppl;
  double similarity = 0.0;  // TF-IDF cosine to the gold response
  double entailment = 0.0;  // persona entailment probability
};

struct RankInstance {
  std::vector<RankCandidate> candidates;
  std::size_t selected = 0;  // position in `candidates` of the pipeline's pick
};

struct RankThresholds {
  double similarity = 0.25;
  double entailment = 0.5;
};

struct RankAnalysis {
  std::vector<std::size_t> bucket_edges;  // bucket b covers PPL ranks [edges[b], edges[b+1])
  std::vector<double> good_ratio_per_bucket;
  std::vector<std::size_t> selected_rank_histogram;
  double mean_selected_rank = 0.0;  // 1-based
};

void to_json(json& j, const RankAnalysis& v);

/// Ranks each instance's candidates by ascending PPL (ties by position) and
/// reports the fraction of good candidates per rank bucket plus where the
/// selected response falls. Good means similarity > thresholds.similarity
/// and entailment > thresholds.entailment. Every instance must have the
/// same number of candidates.
RankAnalysis rank_analysis(std::span<const RankInstance> instances, RankThresholds thresholds, int bucket_count);

/// Scores every candidate of each run for rank analysis: PPL under `scorer`
/// (empty responses get +inf), TF-IDF similarity to the gold within
/// {gold} ∪ candidates, persona entailment under `nli`.
std::vector<RankInstance> build_rank_instances(std::span<const DialogueInstance> dataset,
                                               std::span<const SamplingRun> runs,
                                               const std::map<std::string, std::size_t>& selected, Backend& scorer,
                                               Backend& nli, PersonaAggregation aggregation);

// --- evaluation and comparison -----------------------------------------------

struct EvaluationBackends {
  Backend* masked_lm = nullptr;  // PPL_a channel, filtered at kMaskedLmPplFilter
  Backend* causal_lm = nullptr;  // PPL_b channel, unfiltered
  Backend* nli = nullptr;
};

/// Computes every automatic metric for one system's final responses.
/// Responses are taken in dataset order; empty responses are excluded from
/// PPL only.
SystemResults evaluate_system(const std::string& name, const std::string& block,
                              std::span<const DialogueInstance> dataset,
                              const std::map<std::string, std::string>& finals, const EvaluationBackends& backends,
                              PersonaAggregation aggregation = PersonaAggregation::max);

/// Builds the comparison table. All systems must cover the same instance ids.
MetricsReport compare_systems(std::vector<SystemResults> runs, Grouping grouping = Grouping::per_block);

}  // namespace simoap
