#include "simoap/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <thread>

#include "simoap/baselines.hpp"
#include "simoap/consistency.hpp"
#include "simoap/error.hpp"
#include "simoap/tfidf.hpp"

namespace simoap {

std::string to_string(Reranker reranker) {
  switch (reranker) {
    case Reranker::simoap:
      return "simoap";
    case Reranker::simoap_q:
      return "simoap-q";
    case Reranker::mmi:
      return "mmi";
    case Reranker::lls:
      return "lls";
    case Reranker::none:
      return "none";
  }
  return "?";
}

Reranker parse_reranker(const std::string& name) {
  for (auto r : {Reranker::simoap, Reranker::simoap_q, Reranker::mmi, Reranker::lls, Reranker::none})
    if (to_string(r) == name) return r;
  throw ValidationError("unknown reranker '" + name + "'");
}

// --- cache -------------------------------------------------------------------

CandidateCache::CandidateCache(std::filesystem::path dir) : file_(std::move(dir) / "candidate-cache.jsonl") {
  std::ifstream in(file_);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto run = json::parse(line).get<SamplingRun>();
      runs_[key(run.instance_id, run.backend_id, run.k, static_cast<int>(run.candidates.size()), run.master_seed)] =
          std::move(run);
    } catch (const json::exception& e) {
      throw ParseError(std::string("candidate cache: ") + e.what(), line_no);
    }
  }
}

std::string CandidateCache::key(const std::string& instance_id, const std::string& backend_id, int k, int s,
                                std::uint64_t master_seed) {
  return json{instance_id, backend_id, k, s, master_seed}.dump();
}

std::optional<SamplingRun> CandidateCache::find(const std::string& instance_id, const std::string& backend_id, int k,
                                                int s, std::uint64_t master_seed) const {
  std::lock_guard lock(mutex_);
  auto it = runs_.find(key(instance_id, backend_id, k, s, master_seed));
  if (it == runs_.end()) return std::nullopt;
  return it->second;
}

void CandidateCache::put(const SamplingRun& run) {
  std::lock_guard lock(mutex_);
  runs_[key(run.instance_id, run.backend_id, run.k, static_cast<int>(run.candidates.size()), run.master_seed)] = run;
}

void CandidateCache::flush() const {
  std::lock_guard lock(mutex_);
  std::filesystem::create_directories(file_.parent_path());
  const auto tmp = file_.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& [k, run] : runs_) out << json(run).dump() << '\n';
    if (!out) throw Error("cannot write candidate cache " + tmp);
  }
  std::filesystem::rename(tmp, file_);
}

std::size_t CandidateCache::size() const {
  std::lock_guard lock(mutex_);
  return runs_.size();
}

// --- pipeline ----------------------------------------------------------------

std::size_t PipelineResult::failures() const {
  return static_cast<std::size_t>(
      std::count_if(instances.begin(), instances.end(), [](const auto& r) { return r.error.has_value(); }));
}

namespace {

void simoap_rerank(InstanceResult& result, const DialogueInstance& instance, const PipelineConfig& config,
                   const Backends& backends, CoherenceContext context_mode) {
  const auto& candidates = result.run.candidates;
  const auto model = build_tfidf<double>(coherence_context(instance, context_mode), candidates);
  const auto sims = coherence_similarities(model);
  for (std::size_t j = 0; j < candidates.size(); ++j) result.scores[j].coherence_sim = sims[j];
  const auto ranked = coherence_rank(model, config.c);

  if (!config.consistency_enabled) {
    result.final_index = ranked.front().first;
    return;
  }
  if (!backends.nli) throw CapabilityError("consistency stage needs an NLI backend");

  std::vector<ScoreRecord> survivors;
  survivors.reserve(ranked.size());
  for (const auto& [index, sim] : ranked) {
    auto& record = result.scores[index];
    try {
      const auto scored =
          persona_entailment(*backends.nli, instance.persona, candidates[index].text, config.persona_aggregation);
      record.entailment_prob = scored.entailment_prob;
      record.nli_label = scored.label;
    } catch (const TransportError& e) {
      record.error = e.what();
    } catch (const ProtocolError& e) {
      record.error = e.what();
    }
    survivors.push_back(record);
  }
  result.final_index = select_final(survivors);
}

}  // namespace

void rerank_instance(InstanceResult& result, const DialogueInstance& instance, const PipelineConfig& config,
                     const Backends& backends, Reranker reranker) {
  const auto& candidates = result.run.candidates;
  if (candidates.empty()) throw ValidationError("instance '" + instance.id + "' has no candidates");
  result.scores.assign(candidates.size(), ScoreRecord{});
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    if (candidates[j].index != j) throw ValidationError("candidate indices must be 0..s-1");
    result.scores[j].candidate_index = j;
  }

  switch (reranker) {
    case Reranker::simoap:
      simoap_rerank(result, instance, config, backends, config.coherence_context);
      break;
    case Reranker::simoap_q:
      simoap_rerank(result, instance, config, backends, CoherenceContext::last_two);
      break;
    case Reranker::mmi: {
      if (!backends.scorer) throw CapabilityError("mmi needs a backward scorer backend");
      const auto mmi = mmi_rerank(*backends.scorer, instance, candidates);
      for (const auto& [index, loglik] : mmi.ranking) result.scores[index].backward_loglik = loglik;
      for (const auto& [index, message] : mmi.failures) result.scores[index].error = message;
      result.final_index = mmi.ranking.front().first;
      break;
    }
    case Reranker::lls: {
      const auto ranked = lls_rerank(candidates);
      for (const auto& [index, lls] : ranked)
        if (std::isfinite(lls)) result.scores[index].lls = lls;
      result.final_index = ranked.front().first;
      break;
    }
    case Reranker::none:
      result.final_index = 0;
      break;
  }
  result.final_text = candidates[*result.final_index].text;
}

PipelineResult run_pipeline(std::span<const DialogueInstance> dataset, const PipelineConfig& config,
                            const Backends& backends, const RunOptions& options) {
  config.validate();
  if (!backends.generator) throw CapabilityError("run_pipeline: no generation backend");
  PipelineResult result;
  result.instances.resize(dataset.size());

  const auto process = [&](std::size_t i) {
    const auto& instance = dataset[i];
    auto& out = result.instances[i];
    out.instance_id = instance.id;
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    auto t1 = t0;
    try {
      const auto& backend_id = backends.generator->descriptor().backend_id;
      std::optional<SamplingRun> cached;
      if (options.cache) cached = options.cache->find(instance.id, backend_id, config.k, config.s, config.master_seed);
      if (cached) {
        out.run = std::move(*cached);
        out.cache_hit = true;
      } else {
        out.run = oversample(*backends.generator, instance, config);
        if (options.cache) options.cache->put(out.run);
      }
      t1 = clock::now();
      rerank_instance(out, instance, config, backends, options.reranker);
    } catch (const std::exception& e) {
      if (t1 == t0) t1 = clock::now();
      out.error = e.what();
      out.final_index.reset();
    }
    const auto t2 = clock::now();
    out.generation_seconds = std::chrono::duration<double>(t1 - t0).count();
    out.evaluation_seconds = std::chrono::duration<double>(t2 - t1).count();
    out.total_seconds = std::chrono::duration<double>(t2 - t0).count();
    out.run.wall_time_generation = out.generation_seconds;
  };

  const auto workers = static_cast<std::size_t>(std::max(1, options.workers));
  if (workers == 1 || dataset.size() <= 1) {
    for (std::size_t i = 0; i < dataset.size(); ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, dataset.size()); ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < dataset.size(); i = next++) process(i);
      });
  }
  return result;
}

void write_run(const std::filesystem::path& dir, const PipelineResult& result) {
  std::filesystem::create_directories(dir);
  std::ofstream candidates(dir / "candidates.jsonl", std::ios::trunc);
  std::ofstream scores(dir / "scores.jsonl", std::ios::trunc);
  std::ofstream finals(dir / "final.jsonl", std::ios::trunc);
  json timings = json::array();
  for (const auto& r : result.instances) {
    if (!r.run.candidates.empty()) candidates << json(r.run).dump() << '\n';
    if (!r.scores.empty()) scores << json{{"instance_id", r.instance_id}, {"scores", r.scores}}.dump() << '\n';
    json line{{"instance_id", r.instance_id}};
    if (r.final_index) {
      line["candidate_index"] = *r.final_index;
      line["text"] = r.final_text;
    }
    if (r.error) line["error"] = *r.error;
    finals << line.dump() << '\n';
    timings.push_back({{"instance_id", r.instance_id},
                       {"generation_seconds", r.generation_seconds},
                       {"evaluation_seconds", r.evaluation_seconds},
                       {"total_seconds", r.total_seconds},
                       {"cache_hit", r.cache_hit}});
  }
  std::ofstream(dir / "timings.json", std::ios::trunc) << timings.dump(2) << '\n';
  if (!candidates || !scores || !finals) throw Error("failed writing run directory " + dir.string());
}

std::map<std::string, std::string> read_finals(const std::filesystem::path& final_jsonl) {
  std::ifstream in(final_jsonl);
  if (!in) throw ValidationError("cannot open " + final_jsonl.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      if (j.contains("text")) out[j.at("instance_id").get<std::string>()] = j["text"].get<std::string>();
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

std::vector<SamplingRun> read_candidates(const std::filesystem::path& candidates_jsonl) {
  std::ifstream in(candidates_jsonl);
  if (!in) throw ValidationError("cannot open " + candidates_jsonl.string());
  std::vector<SamplingRun> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line).get<SamplingRun>());
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

// --- rank analysis -----------------------------------------------------------

void to_json(json& j, const RankAnalysis& v) {
  j = json{{"bucket_edges", v.bucket_edges},
           {"good_ratio_per_bucket", v.good_ratio_per_bucket},
           {"selected_rank_histogram", v.selected_rank_histogram},
           {"mean_selected_rank", v.mean_selected_rank}};
}

RankAnalysis rank_analysis(std::span<const RankInstance> instances, RankThresholds thresholds, int bucket_count) {
  if (instances.empty()) throw ValidationError("rank_analysis: no instances");
  if (!(thresholds.similarity > 0.0 && thresholds.similarity < 1.0) ||
      !(thresholds.entailment > 0.0 && thresholds.entailment < 1.0))
    throw ValidationError("rank_analysis: thresholds must lie in (0, 1)");
  const std::size_t n = instances.front().candidates.size();
  if (bucket_count < 1 || static_cast<std::size_t>(bucket_count) > n)
    throw ValidationError("rank_analysis: bucket_count must lie in [1, candidates per instance]");
  const auto buckets = static_cast<std::size_t>(bucket_count);

  RankAnalysis out;
  for (std::size_t b = 0; b <= buckets; ++b) out.bucket_edges.push_back(b * n / buckets);
  const auto bucket_of = [&](std::size_t rank) {
    return static_cast<std::size_t>(std::upper_bound(out.bucket_edges.begin() + 1, out.bucket_edges.end(), rank) -
                                    (out.bucket_edges.begin() + 1));
  };

  std::vector<std::size_t> good(buckets, 0), total(buckets, 0);
  out.selected_rank_histogram.assign(buckets, 0);
  double rank_sum = 0.0;
  for (const auto& instance : instances) {
    if (instance.candidates.size() != n)
      throw ValidationError("rank_analysis: instances have differing candidate counts");
    if (instance.selected >= n) throw ValidationError("rank_analysis: selected candidate out of range");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (const auto& c : instance.candidates)
      if (!c.ppl) throw ValidationError("rank_analysis: candidate without PPL");
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return *instance.candidates[a].ppl < *instance.candidates[b].ppl; });
    for (std::size_t rank = 0; rank < n; ++rank) {
      const auto& c = instance.candidates[order[rank]];
      const auto b = bucket_of(rank);
      ++total[b];
      if (c.similarity > thresholds.similarity && c.entailment > thresholds.entailment) ++good[b];
      if (order[rank] == instance.selected) {
        ++out.selected_rank_histogram[b];
        rank_sum += static_cast<double>(rank + 1);
      }
    }
  }
  for (std::size_t b = 0; b < buckets; ++b)
    out.good_ratio_per_bucket.push_back(total[b] ? static_cast<double>(good[b]) / static_cast<double>(total[b]) : 0.0);
  out.mean_selected_rank = rank_sum / static_cast<double>(instances.size());
  return out;
}

std::vector<RankInstance> build_rank_instances(std::span<const DialogueInstance> dataset,
                                               std::span<const SamplingRun> runs,
                                               const std::map<std::string, std::size_t>& selected, Backend& scorer,
                                               Backend& nli, PersonaAggregation aggregation) {
  std::map<std::string, const DialogueInstance*> by_id;
  for (const auto& instance : dataset) by_id[instance.id] = &instance;
  std::vector<RankInstance> out;
  for (const auto& run : runs) {
    auto it = by_id.find(run.instance_id);
    if (it == by_id.end()) throw ValidationError("run for unknown instance '" + run.instance_id + "'");
    const auto& instance = *it->second;
    auto sel = selected.find(run.instance_id);
    if (sel == selected.end()) continue;
    RankInstance ri;
    ri.selected = sel->second;
    const auto sims = reference_similarities(instance.gold, run.candidates);
    for (std::size_t j = 0; j < run.candidates.size(); ++j) {
      const auto& text = run.candidates[j].text;
      RankCandidate rc;
      if (text.empty()) {
        rc.ppl = std::numeric_limits<double>::infinity();
      } else {
        const auto ll = scorer.loglikelihood("", text);
        rc.ppl = perplexity(ll.total_loglik, ll.token_count);
      }
      rc.similarity = sims[j];
      rc.entailment = persona_entailment(nli, instance.persona, text, aggregation).entailment_prob;
      ri.candidates.push_back(rc);
    }
    out.push_back(std::move(ri));
  }
  return out;
}

// --- evaluation ----------------------------------------------------------------

SystemResults evaluate_system(const std::string& name, const std::string& block,
                              std::span<const DialogueInstance> dataset,
                              const std::map<std::string, std::string>& finals, const EvaluationBackends& backends,
                              PersonaAggregation aggregation) {
  if (!backends.causal_lm || !backends.nli) throw CapabilityError("evaluate_system: scorer and NLI backends required");
  Backend& masked = backends.masked_lm ? *backends.masked_lm : *backends.causal_lm;
  const auto start = std::chrono::steady_clock::now();

  SystemResults out;
  out.system_name = name;
  out.block = block;
  std::vector<std::string> responses, golds;
  std::vector<double> ppl_a, ppl_b;
  std::vector<NliLabel> labels;
  for (const auto& instance : dataset) {
    auto it = finals.find(instance.id);
    if (it == finals.end()) continue;
    const auto& text = it->second;
    out.responses.emplace_back(instance.id, text);
    responses.push_back(text);
    golds.push_back(instance.gold);
    if (!text.empty()) {
      const auto a = masked.loglikelihood("", text);
      ppl_a.push_back(perplexity(a.total_loglik, a.token_count));
      const auto b = backends.causal_lm->loglikelihood("", text);
      ppl_b.push_back(perplexity(b.total_loglik, b.token_count));
    }
    labels.push_back(persona_entailment(*backends.nli, instance.persona, text, aggregation).label);
  }
  if (responses.empty()) throw ValidationError("evaluate_system: no final responses match the dataset");
  if (ppl_a.empty()) throw AggregationError("evaluate_system: every response is empty; PPL undefined");
  out.ppl_a = ppl_aggregate(ppl_a, kMaskedLmPplFilter);
  out.ppl_b = ppl_aggregate(ppl_b);
  out.dis1 = distinct_n(responses, 1);
  out.dis2 = distinct_n(responses, 2);
  out.c_score = c_mean(labels);
  out.rep = repetition_rate(responses, golds);
  out.evaluation_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

MetricsReport compare_systems(std::vector<SystemResults> runs, Grouping grouping) {
  if (runs.size() < 2) throw ValidationError("compare_systems: need at least 2 systems");
  const auto ids = [](const SystemResults& s) {
    std::set<std::string> out;
    for (const auto& [id, text] : s.responses) out.insert(id);
    return out;
  };
  const auto reference = ids(runs.front());
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const auto other = ids(runs[i]);
    if (other == reference) continue;
    std::vector<std::string> diff;
    std::set_symmetric_difference(reference.begin(), reference.end(), other.begin(), other.end(),
                                  std::back_inserter(diff));
    throw ValidationError("compare_systems: '" + runs.front().system_name + "' and '" + runs[i].system_name +
                          "' cover different instances: " + join(diff, ", "));
  }
  MetricsReport report;
  report.grouping = grouping;
  report.scores = normalized_averages(runs, grouping);
  report.systems = std::move(runs);
  return report;
}

}  // namespace simoap
