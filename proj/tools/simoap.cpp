// simoap: over-sample, rerank, evaluate and compare dialogue systems.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "simoap/backend.hpp"
#include "simoap/core.hpp"
#include "simoap/error.hpp"
#include "simoap/metrics.hpp"
#include "simoap/pipeline.hpp"

namespace fs = std::filesystem;
using namespace simoap;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitUsage = 2;

struct GenerationOptions {
  std::string dataset;
  std::string config;
  std::string backend;
  std::string nli_backend;
  std::string scorer_backend;
  std::optional<std::uint64_t> seed;
  std::optional<int> k, s, c;
  std::string aggregation;
  std::string coherence;
  int workers = 1;
  std::string cache_dir;
  std::string out = "run";
  bool no_nli = false;
  std::string rerank = "simoap";
};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

std::string backend_or_default(const std::string& spec) { return spec.empty() ? default_backend_spec() : spec; }

PipelineConfig build_config(const GenerationOptions& o, Reranker reranker) {
  PipelineConfig cfg;
  if (!o.config.empty()) cfg = read_json(o.config).get<PipelineConfig>();
  if (reranker == Reranker::lls && o.config.empty()) {
    cfg.k = 40;
    cfg.s = 20;
    cfg.c = 20;
  }
  if (o.seed) cfg.master_seed = *o.seed;
  if (o.k) cfg.k = *o.k;
  if (o.s) cfg.s = *o.s;
  if (o.c) cfg.c = *o.c;
  if (cfg.c > cfg.s) cfg.c = cfg.s;
  if (!o.aggregation.empty()) cfg.persona_aggregation = json(o.aggregation).get<PersonaAggregation>();
  if (!o.coherence.empty()) cfg.coherence_context = json(o.coherence).get<CoherenceContext>();
  if (reranker == Reranker::simoap_q) cfg.coherence_context = CoherenceContext::last_two;
  if (o.no_nli) cfg.consistency_enabled = false;
  cfg.validate();
  return cfg;
}

void add_generation_flags(CLI::App* cmd, GenerationOptions& o) {
  cmd->add_option("--dataset", o.dataset, "JSONL dataset")->required()->check(CLI::ExistingFile);
  cmd->add_option("--config", o.config, "JSON pipeline config")->check(CLI::ExistingFile);
  cmd->add_option("--backend", o.backend, "generator backend (URL or inprocess:<mock>)");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--k", o.k, "top-k")->check(CLI::PositiveNumber);
  cmd->add_option("--s", o.s, "candidates per instance")->check(CLI::PositiveNumber);
  cmd->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--cache-dir", o.cache_dir, "candidate cache directory");
  cmd->add_option("--out", o.out, "run directory");
}

int finish_run(const PipelineResult& result, const fs::path& out) {
  for (const auto& r : result.instances)
    if (r.error) std::cerr << r.instance_id << ": " << *r.error << "\n";
  std::cerr << result.instances.size() - result.failures() << "/" << result.instances.size()
            << " instances ok, output in " << out.string() << "\n";
  return result.failures() ? kExitPartial : kExitOk;
}

int cmd_sample(const GenerationOptions& o) {
  const auto data = load_dataset(o.dataset);
  const auto cfg = build_config(o, Reranker::none);
  auto gen = make_backend(backend_or_default(o.backend));
  std::optional<CandidateCache> cache;
  if (!o.cache_dir.empty()) cache.emplace(o.cache_dir);
  const auto result = run_pipeline(data, cfg, {gen, gen, gen}, {Reranker::none, o.workers, cache ? &*cache : nullptr});
  if (cache) cache->flush();
  fs::create_directories(o.out);
  std::ofstream out(fs::path(o.out) / "candidates.jsonl", std::ios::trunc);
  for (const auto& r : result.instances)
    if (!r.error) out << json(r.run).dump() << "\n";
  return finish_run(result, o.out);
}

int cmd_rerank(const GenerationOptions& o) {
  const auto reranker = parse_reranker(o.rerank);
  const auto data = load_dataset(o.dataset);
  const auto cfg = build_config(o, reranker);
  Backends backends;
  backends.generator = make_backend(backend_or_default(o.backend));
  backends.nli = o.nli_backend.empty() ? backends.generator : make_backend(o.nli_backend);
  backends.scorer = o.scorer_backend.empty() ? backends.generator : make_backend(o.scorer_backend);
  std::optional<CandidateCache> cache;
  if (!o.cache_dir.empty()) cache.emplace(o.cache_dir);
  const auto result = run_pipeline(data, cfg, backends, {reranker, o.workers, cache ? &*cache : nullptr});
  if (cache) cache->flush();
  write_run(o.out, result);
  write_text(fs::path(o.out) / "config.json", json(cfg).dump(2) + "\n");
  return finish_run(result, o.out);
}

struct EvaluateOptions {
  std::string dataset;
  std::string run;
  std::string name;
  std::string block = "default";
  std::string masked_lm_backend;
  std::string causal_lm_backend;
  std::string nli_backend;
  std::string aggregation = "max";
};

int cmd_evaluate(const EvaluateOptions& o) {
  const auto data = load_dataset(o.dataset);
  const fs::path run(o.run);
  const auto finals = read_finals(run / "final.jsonl");
  auto masked = make_backend(backend_or_default(o.masked_lm_backend));
  auto causal = o.causal_lm_backend.empty() ? masked : make_backend(o.causal_lm_backend);
  auto nli = o.nli_backend.empty() ? masked : make_backend(o.nli_backend);
  auto system = evaluate_system(o.name.empty() ? run.filename().string() : o.name, o.block, data, finals,
                                {masked.get(), causal.get(), nli.get()}, json(o.aggregation).get<PersonaAggregation>());
  if (fs::exists(run / "timings.json")) {
    for (const auto& t : read_json(run / "timings.json")) {
      system.generation_seconds += t.value("generation_seconds", 0.0);
      system.evaluation_seconds += t.value("evaluation_seconds", 0.0);
    }
  }
  write_text(run / "system.json", json(system).dump(2) + "\n");
  std::cerr << "wrote " << (run / "system.json").string() << "\n";
  return finals.size() == data.size() ? kExitOk : kExitPartial;
}

struct RanksOptions {
  std::string dataset;
  std::string run;
  std::string scorer_backend;
  std::string nli_backend;
  std::string aggregation = "max";
  double sim_threshold = 0.25;
  double entail_threshold = 0.5;
  int buckets = 10;
};

int cmd_analyze_ranks(const RanksOptions& o) {
  const auto data = load_dataset(o.dataset);
  const fs::path run(o.run);
  const auto runs = read_candidates(run / "candidates.jsonl");
  std::map<std::string, std::size_t> selected;
  std::ifstream finals(run / "final.jsonl");
  if (!finals) throw ValidationError("cannot open " + (run / "final.jsonl").string());
  for (std::string line; std::getline(finals, line);) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    if (j.contains("candidate_index")) selected[j.at("instance_id")] = j.at("candidate_index").get<std::size_t>();
  }
  auto scorer = make_backend(backend_or_default(o.scorer_backend));
  auto nli = o.nli_backend.empty() ? scorer : make_backend(o.nli_backend);
  const auto instances = build_rank_instances(data, runs, selected, *scorer, *nli,
                                              json(o.aggregation).get<PersonaAggregation>());
  const auto strict = rank_analysis(instances, {o.sim_threshold, o.entail_threshold}, o.buckets);
  json out = strict;
  out["thresholds"] = {{"similarity", o.sim_threshold}, {"entailment", o.entail_threshold}};
  out["instances"] = instances.size();
  write_text(run / "ranks.json", out.dump(2) + "\n");
  std::cerr << "wrote " << (run / "ranks.json").string() << ", mean selected rank " << strict.mean_selected_rank
            << "\n";
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& runs, const std::string& grouping, const std::string& out) {
  std::vector<SystemResults> systems;
  for (const auto& r : runs) {
    fs::path p(r);
    if (fs::is_directory(p)) p /= "system.json";
    systems.push_back(read_json(p).get<SystemResults>());
  }
  const auto report = compare_systems(systems, json(grouping).get<Grouping>());
  const fs::path dir(out);
  write_text(dir / "report.json", json(report).dump(2) + "\n");
  const auto table = render_table(report);
  write_text(dir / "report.txt", table);
  std::cout << table;
  return kExitOk;
}

std::atomic<ProtocolServer*> active_server{nullptr};

int cmd_serve_mock(const std::string& mock, const std::string& host, int port) {
  ProtocolServer server(make_backend("inprocess:" + mock));
  const int bound = server.bind(host, port);
  active_server = &server;
  std::signal(SIGINT, [](int) {
    if (auto* s = active_server.load()) s->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (auto* s = active_server.load()) s->stop();
  });
  std::cout << "http://" << host << ":" << bound << std::endl;
  server.listen();
  active_server = nullptr;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Over-sample and post-evaluate persona dialogue responses"};
  app.require_subcommand(1);

  GenerationOptions sample_opts;
  auto* sample = app.add_subcommand("sample", "generate candidate sets");
  add_generation_flags(sample, sample_opts);

  GenerationOptions rerank_opts;
  auto* rerank = app.add_subcommand("rerank", "generate and select final responses");
  add_generation_flags(rerank, rerank_opts);
  rerank->add_option("--rerank", rerank_opts.rerank, "simoap | simoap-q | mmi | lls | none")
      ->check(CLI::IsMember({"simoap", "simoap-q", "mmi", "lls", "none"}));
  rerank->add_option("--c", rerank_opts.c, "candidates kept by coherence")->check(CLI::PositiveNumber);
  rerank->add_option("--nli-backend", rerank_opts.nli_backend, "NLI backend for the consistency stage");
  rerank->add_option("--scorer-backend", rerank_opts.scorer_backend, "backward scorer for mmi");
  rerank->add_option("--aggregation", rerank_opts.aggregation, "persona aggregation")
      ->check(CLI::IsMember({"max", "mean"}));
  rerank->add_option("--coherence-context", rerank_opts.coherence, "full_history | last_two")
      ->check(CLI::IsMember({"full_history", "last_two"}));
  rerank->add_flag("--no-nli", rerank_opts.no_nli, "skip the consistency stage");

  EvaluateOptions eval_opts;
  auto* evaluate = app.add_subcommand("evaluate", "compute automatic metrics for a run");
  evaluate->add_option("--dataset", eval_opts.dataset, "JSONL dataset")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--run", eval_opts.run, "run directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--name", eval_opts.name, "system name");
  evaluate->add_option("--block", eval_opts.block, "comparison block");
  evaluate->add_option("--masked-lm-backend", eval_opts.masked_lm_backend, "PPL_a scorer");
  evaluate->add_option("--backend", eval_opts.causal_lm_backend, "PPL_b scorer");
  evaluate->add_option("--nli-backend", eval_opts.nli_backend, "NLI backend for C");
  evaluate->add_option("--aggregation", eval_opts.aggregation, "persona aggregation")
      ->check(CLI::IsMember({"max", "mean"}));

  RanksOptions rank_opts;
  auto* ranks = app.add_subcommand("analyze-ranks", "good-response ratio by PPL rank");
  ranks->add_option("--dataset", rank_opts.dataset, "JSONL dataset")->required()->check(CLI::ExistingFile);
  ranks->add_option("--run", rank_opts.run, "run directory")->required()->check(CLI::ExistingDirectory);
  ranks->add_option("--scorer-backend", rank_opts.scorer_backend, "PPL scorer");
  ranks->add_option("--nli-backend", rank_opts.nli_backend, "NLI backend");
  ranks->add_option("--aggregation", rank_opts.aggregation, "persona aggregation")
      ->check(CLI::IsMember({"max", "mean"}));
  ranks->add_option("--sim-threshold", rank_opts.sim_threshold, "similarity threshold");
  ranks->add_option("--entail-threshold", rank_opts.entail_threshold, "entailment threshold");
  ranks->add_option("--buckets", rank_opts.buckets, "rank buckets")->check(CLI::PositiveNumber);

  std::vector<std::string> compare_runs;
  std::string grouping = "per_block";
  std::string compare_out = ".";
  auto* compare = app.add_subcommand("compare", "build the comparison table");
  compare->add_option("--run", compare_runs, "run directories or system.json files")->required();
  compare->add_option("--grouping", grouping, "per_block | global")->check(CLI::IsMember({"per_block", "global"}));
  compare->add_option("--out", compare_out, "output directory");

  std::string mock = "bigram";
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve-mock", "serve an in-process mock over HTTP");
  serve->add_option("--mock", mock, "bigram | single | batch-bigram");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port, 0 for any");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sample) return cmd_sample(sample_opts);
    if (*rerank) return cmd_rerank(rerank_opts);
    if (*evaluate) return cmd_evaluate(eval_opts);
    if (*ranks) return cmd_analyze_ranks(rank_opts);
    if (*compare) return cmd_compare(compare_runs, grouping, compare_out);
    if (*serve) return cmd_serve_mock(mock, host, port);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CapabilityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPartial;
  }
  return kExitUsage;
}
