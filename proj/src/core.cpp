#include "simoap/core.hpp"

#include <fstream>
#include <unordered_set>

#include "simoap/error.hpp"

namespace simoap {

std::string to_string(NliLabel label) {
  switch (label) {
    case NliLabel::entailment:
      return "entailment";
    case NliLabel::neutral:
      return "neutral";
    case NliLabel::contradiction:
      return "contradiction";
  }
  throw ValidationError("unknown NLI label");
}

NliLabel parse_nli_label(const std::string& name) {
  if (name == "entailment") return NliLabel::entailment;
  if (name == "neutral") return NliLabel::neutral;
  if (name == "contradiction") return NliLabel::contradiction;
  throw ValidationError("unknown NLI label '" + name + "'");
}

void PipelineConfig::validate() const {
  if (k < 1) throw ValidationError("k must be >= 1");
  if (s < 1) throw ValidationError("s must be >= 1");
  if (c < 1 || c > s) throw ValidationError("c must satisfy 1 <= c <= s");
  if (max_tokens < 1) throw ValidationError("max_tokens must be >= 1");
}

void validate(const DialogueInstance& instance, bool require_gold) {
  if (instance.persona.empty())
    throw ValidationError("instance '" + instance.id + "': persona is empty");
  if (instance.history.empty())
    throw ValidationError("instance '" + instance.id + "': history is empty");
  if (require_gold && instance.gold.empty())
    throw ValidationError("instance '" + instance.id + "': gold is empty");
}

void validate(const Candidate& candidate) {
  if (!candidate.token_logprobs) return;
  if (candidate.token_logprobs->size() != candidate.token_count)
    throw ValidationError("candidate " + std::to_string(candidate.index) +
                          ": token_logprobs length differs from token_count");
  for (double lp : *candidate.token_logprobs)
    if (!(lp <= 0.0))
      throw ValidationError("candidate " + std::to_string(candidate.index) + ": positive token logprob");
}

void validate(const ScoreRecord& record) {
  if (record.coherence_sim && !(*record.coherence_sim >= -1.0 && *record.coherence_sim <= 1.0))
    throw ValidationError("coherence_sim outside [-1, 1]");
  if (record.entailment_prob && !(*record.entailment_prob >= 0.0 && *record.entailment_prob <= 1.0))
    throw ValidationError("entailment_prob outside [0, 1]");
  if (record.backward_loglik && !(*record.backward_loglik <= 0.0))
    throw ValidationError("backward_loglik must be <= 0");
}

std::vector<DialogueInstance> parse_dataset(std::istream& in) {
  std::vector<DialogueInstance> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    DialogueInstance instance;
    try {
      instance = json::parse(line).get<DialogueInstance>();
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
    validate(instance);
    if (!seen.insert(instance.id).second) throw ValidationError("duplicate instance id '" + instance.id + "'");
    out.push_back(std::move(instance));
  }
  return out;
}

std::vector<DialogueInstance> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset " + path.string());
  return parse_dataset(in);
}

void write_dataset(std::ostream& out, const std::vector<DialogueInstance>& instances) {
  for (const auto& instance : instances) out << json(instance).dump() << '\n';
}

std::string join(const std::vector<std::string>& parts, std::string_view separator) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += separator;
    out += parts[i];
  }
  return out;
}

std::string coherence_context(const DialogueInstance& instance, CoherenceContext mode) {
  const auto& h = instance.history;
  if (h.empty()) throw ValidationError("instance '" + instance.id + "': history is empty");
  if (mode == CoherenceContext::full_history) return join(h);
  const std::size_t keep = std::min<std::size_t>(2, h.size());
  return join(std::vector<std::string>(h.end() - static_cast<std::ptrdiff_t>(keep), h.end()));
}

void to_json(json& j, const DialogueInstance& v) {
  j = json{{"id", v.id}, {"persona", v.persona}, {"history", v.history}, {"gold", v.gold}};
}

void from_json(const json& j, DialogueInstance& v) {
  j.at("id").get_to(v.id);
  j.at("persona").get_to(v.persona);
  j.at("history").get_to(v.history);
  j.at("gold").get_to(v.gold);
}

void to_json(json& j, const Candidate& v) {
  j = json{{"index", v.index}, {"text", v.text}, {"token_count", v.token_count}, {"seed_stream", v.seed_stream}};
  if (v.token_logprobs) j["token_logprobs"] = *v.token_logprobs;
}

void from_json(const json& j, Candidate& v) {
  j.at("text").get_to(v.text);
  j.at("index").get_to(v.index);
  j.at("token_count").get_to(v.token_count);
  v.seed_stream = j.value<std::uint64_t>("seed_stream", 0);
  if (j.contains("token_logprobs") && !j["token_logprobs"].is_null())
    v.token_logprobs = j["token_logprobs"].get<std::vector<double>>();
  else
    v.token_logprobs.reset();
}

void to_json(json& j, const ScoreRecord& v) {
  j = json{{"candidate_index", v.candidate_index}};
  if (v.coherence_sim) j["coherence_sim"] = *v.coherence_sim;
  if (v.entailment_prob) j["entailment_prob"] = *v.entailment_prob;
  if (v.nli_label) j["nli_label"] = to_string(*v.nli_label);
  if (v.backward_loglik) j["backward_loglik"] = *v.backward_loglik;
  if (v.lls) j["lls"] = *v.lls;
  if (v.error) j["error"] = *v.error;
}

void from_json(const json& j, ScoreRecord& v) {
  v = ScoreRecord{};
  j.at("candidate_index").get_to(v.candidate_index);
  if (j.contains("coherence_sim")) v.coherence_sim = j["coherence_sim"].get<double>();
  if (j.contains("entailment_prob")) v.entailment_prob = j["entailment_prob"].get<double>();
  if (j.contains("nli_label")) v.nli_label = parse_nli_label(j["nli_label"].get<std::string>());
  if (j.contains("backward_loglik")) v.backward_loglik = j["backward_loglik"].get<double>();
  if (j.contains("lls")) v.lls = j["lls"].get<double>();
  if (j.contains("error")) v.error = j["error"].get<std::string>();
}

void to_json(json& j, const PipelineConfig& v) {
  j = json{{"k", v.k},
           {"s", v.s},
           {"c", v.c},
           {"coherence_context", v.coherence_context},
           {"master_seed", v.master_seed},
           {"persona_aggregation", v.persona_aggregation},
           {"max_tokens", v.max_tokens},
           {"consistency_enabled", v.consistency_enabled}};
}

void from_json(const json& j, PipelineConfig& v) {
  PipelineConfig d;
  v.k = j.value("k", d.k);
  v.s = j.value("s", d.s);
  v.c = j.value("c", d.c);
  v.coherence_context = j.value("coherence_context", d.coherence_context);
  v.master_seed = j.value("master_seed", d.master_seed);
  v.persona_aggregation = j.value("persona_aggregation", d.persona_aggregation);
  v.max_tokens = j.value("max_tokens", d.max_tokens);
  v.consistency_enabled = j.value("consistency_enabled", d.consistency_enabled);
}

}  // namespace simoap
