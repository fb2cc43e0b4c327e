#include "simoap/backend.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <unordered_set>

#include <httplib.h>

#include "simoap/error.hpp"
#include "simoap/rng.hpp"
#include "simoap/sampling.hpp"
#include "simoap/text.hpp"

namespace simoap {

// --- validation ------------------------------------------------------------

void validate(const TokenDistribution& dist, double tolerance) {
  const std::size_t n = dist.token_ids.size();
  if (n == 0) throw ProtocolError("token distribution is empty");
  if (dist.logprobs.size() != n) throw ProtocolError("token distribution: token_ids/logprobs length mismatch");
  if (!dist.token_texts.empty() && dist.token_texts.size() != n)
    throw ProtocolError("token distribution: token_ids/token_texts length mismatch");
  std::unordered_set<std::int64_t> ids(dist.token_ids.begin(), dist.token_ids.end());
  if (ids.size() != n) throw ProtocolError("token distribution: duplicate token id");
  double mass = 0.0;
  for (double lp : dist.logprobs) {
    if (std::isnan(lp) || lp > 0.0 || lp == std::numeric_limits<double>::infinity())
      throw ProtocolError("token distribution: logprob outside (-inf, 0]");
    mass += std::exp(lp);
  }
  if (std::abs(mass - 1.0) > tolerance)
    throw ProtocolError("token distribution: probabilities sum to " + std::to_string(mass));
}

NliLabel NliJudgment::argmax() const {
  if (entailment >= neutral && entailment >= contradiction) return NliLabel::entailment;
  if (neutral >= contradiction) return NliLabel::neutral;
  return NliLabel::contradiction;
}

void validate(const NliJudgment& judgment, double tolerance) {
  for (double p : {judgment.entailment, judgment.neutral, judgment.contradiction})
    if (!(p >= 0.0 && p <= 1.0)) throw ProtocolError("NLI judgment: probability outside [0, 1]");
  const double sum = judgment.entailment + judgment.neutral + judgment.contradiction;
  if (std::abs(sum - 1.0) > tolerance) throw ProtocolError("NLI judgment: probabilities sum to " + std::to_string(sum));
}

std::string to_string(Capability capability) {
  switch (capability) {
    case Capability::next_token_dist:
      return "next_token_dist";
    case Capability::batch_sample:
      return "batch_sample";
    case Capability::loglikelihood:
      return "loglikelihood";
    case Capability::nli:
      return "nli";
  }
  return "?";
}

Capability parse_capability(const std::string& name) {
  for (auto c : {Capability::next_token_dist, Capability::batch_sample, Capability::loglikelihood, Capability::nli})
    if (to_string(c) == name) return c;
  throw ValidationError("unknown capability '" + name + "'");
}

void BackendDescriptor::validate() const {
  if (capabilities.empty()) throw ValidationError("backend '" + backend_id + "': no capabilities");
  if (timeout.count() <= 0) throw ValidationError("backend '" + backend_id + "': timeout must be positive");
  if (max_retries < 0) throw ValidationError("backend '" + backend_id + "': max_retries must be >= 0");
}

void Backend::require(Capability capability) const {
  if (!descriptor().has(capability))
    throw CapabilityError("backend '" + descriptor().backend_id + "' lacks capability " + to_string(capability));
}

// --- wire payloads -----------------------------------------------------------

namespace {

template <typename T>
T field(const json& payload, const char* name) {
  if (!payload.is_object() || !payload.contains(name)) throw ProtocolError(std::string("payload missing '") + name + "'");
  try {
    return payload.at(name).get<T>();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("payload field '") + name + "': " + e.what());
  }
}

double logprob_field(const json& value) {
  // -inf is not representable in JSON; null stands for a zero-probability entry.
  if (value.is_null()) return -std::numeric_limits<double>::infinity();
  if (!value.is_number()) throw ProtocolError("logprob is not a number");
  return value.get<double>();
}

}  // namespace

TokenDistribution parse_token_distribution(const json& payload) {
  TokenDistribution dist;
  dist.token_ids = field<std::vector<std::int64_t>>(payload, "token_ids");
  const auto logprobs = field<json>(payload, "logprobs");
  if (!logprobs.is_array()) throw ProtocolError("'logprobs' is not an array");
  for (const auto& lp : logprobs) dist.logprobs.push_back(logprob_field(lp));
  if (payload.contains("token_texts")) dist.token_texts = field<std::vector<std::string>>(payload, "token_texts");
  if (payload.contains("eos_token_id") && !payload["eos_token_id"].is_null())
    dist.eos_token_id = field<std::int64_t>(payload, "eos_token_id");
  validate(dist);
  return dist;
}

NliJudgment parse_nli_judgment(const json& payload) {
  NliJudgment judgment{field<double>(payload, "entailment"), field<double>(payload, "neutral"),
                       field<double>(payload, "contradiction")};
  validate(judgment);
  return judgment;
}

LoglikResult parse_loglikelihood(const json& payload) {
  LoglikResult result{field<double>(payload, "total_loglik"), field<std::size_t>(payload, "token_count")};
  if (!(result.total_loglik <= 0.0)) throw ProtocolError("loglikelihood: total_loglik must be <= 0");
  if (result.token_count == 0) throw ProtocolError("loglikelihood: token_count must be >= 1");
  return result;
}

std::vector<Candidate> parse_batch_sample(const json& payload, int expected_n) {
  const auto items = field<json>(payload, "candidates");
  if (!items.is_array()) throw ProtocolError("'candidates' is not an array");
  if (items.size() != static_cast<std::size_t>(expected_n))
    throw ProtocolError("batch_sample: partial batch, got " + std::to_string(items.size()) + " of " +
                        std::to_string(expected_n));
  std::vector<Candidate> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    Candidate candidate;
    try {
      candidate = items[i].get<Candidate>();
      validate(candidate);
    } catch (const json::exception& e) {
      throw ProtocolError(std::string("batch_sample candidate: ") + e.what());
    } catch (const ValidationError& e) {
      throw ProtocolError(e.what());
    }
    if (candidate.index != i) throw ProtocolError("batch_sample: candidate indices are not 0..n-1");
    out.push_back(std::move(candidate));
  }
  return out;
}

json to_json(const TokenDistribution& dist) {
  json logprobs = json::array();
  for (double lp : dist.logprobs) logprobs.push_back(std::isinf(lp) ? json(nullptr) : json(lp));
  json j{{"token_ids", dist.token_ids}, {"logprobs", logprobs}, {"token_texts", dist.token_texts}};
  j["eos_token_id"] = dist.eos_token_id ? json(*dist.eos_token_id) : json(nullptr);
  return j;
}

json to_json(const NliJudgment& judgment) {
  return json{{"entailment", judgment.entailment},
              {"neutral", judgment.neutral},
              {"contradiction", judgment.contradiction}};
}

json to_json(const LoglikResult& result) {
  return json{{"total_loglik", result.total_loglik}, {"token_count", result.token_count}};
}

// --- mocks -------------------------------------------------------------------

MockBigramLM::MockBigramLM(std::map<std::string, Row> table, std::string eos_term, std::string bos_term)
    : table_(std::move(table)), eos_(std::move(eos_term)), bos_(std::move(bos_term)) {
  std::set<std::string> vocab;
  for (const auto& [from, row] : table_) {
    if (from != bos_) vocab.insert(from);
    double total = 0.0;
    for (const auto& [to, p] : row) {
      if (to != eos_) vocab.insert(to);
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError("mock bigram row '" + from + "' does not sum to 1");
  }
  terms_.push_back(eos_);
  terms_.insert(terms_.end(), vocab.begin(), vocab.end());
  for (std::size_t i = 0; i < terms_.size(); ++i) ids_[terms_[i]] = static_cast<std::int64_t>(i);
}

std::int64_t MockBigramLM::id_of(const std::string& term) const {
  auto it = ids_.find(term);
  if (it == ids_.end()) throw ValidationError("mock bigram: unknown term '" + term + "'");
  return it->second;
}

TokenDistribution MockBigramLM::next(const std::vector<std::int64_t>& context_tokens) const {
  std::string prev = bos_;
  if (!context_tokens.empty()) {
    const auto last = context_tokens.back();
    if (last < 0 || static_cast<std::size_t>(last) >= terms_.size())
      throw ValidationError("mock bigram: token id out of range");
    prev = terms_[static_cast<std::size_t>(last)];
  }
  TokenDistribution dist;
  dist.eos_token_id = eos_id();
  auto it = table_.find(prev);
  if (it == table_.end()) {
    dist.token_ids = {eos_id()};
    dist.logprobs = {0.0};
    dist.token_texts = {""};
    return dist;
  }
  for (const auto& [term, p] : it->second) {
    dist.token_ids.push_back(id_of(term));
    dist.logprobs.push_back(std::log(p));
    dist.token_texts.push_back(term == eos_ ? std::string() : " " + term);
  }
  return dist;
}

MockBigramLM MockBigramLM::persona_chat() {
  static const std::vector<std::string> words = {
      "i",     "love",  "to",    "play",  "the",     "piano",  "guitar", "my",     "dog",    "cat",
      "is",    "a",     "teacher", "nurse", "and",   "read",   "books",  "hike",   "like",   "you",
      "do",    "have",  "two",   "kids",  "we",      "live",   "in",     "city",   "farm",   "cook",
      "pizza", "swim",  "music", "work",  "at",      "school", "hospital", "what", "about",  "that",
      "great", "so",    "fun",   "also",  "really",  "enjoy",  "dance",  "travel"};
  constexpr int kSuccessors = 6;
  constexpr double kEos = 0.15;
  std::map<std::string, Row> table;
  for (std::size_t t = 0; t <= words.size(); ++t) {
    const std::string from = t == words.size() ? "<s>" : words[t];
    CounterRng rng(mix64(0x5eed0000ULL + t));
    std::vector<std::size_t> picks;
    while (picks.size() < kSuccessors) {
      const auto w = static_cast<std::size_t>(rng.next() % words.size());
      if (std::find(picks.begin(), picks.end(), w) == picks.end()) picks.push_back(w);
    }
    std::vector<double> weights;
    double total = 0.0;
    for (std::size_t i = 0; i < picks.size(); ++i) {
      weights.push_back(0.1 + rng.uniform());
      total += weights.back();
    }
    const double body = from == "<s>" ? 1.0 : 1.0 - kEos;
    Row row;
    for (std::size_t i = 0; i < picks.size(); ++i) row.emplace_back(words[picks[i]], body * weights[i] / total);
    if (from != "<s>") row.emplace_back("</s>", kEos);
    // Absorb rounding so the row sums to 1 within the table tolerance.
    double sum = 0.0;
    for (const auto& [term, p] : row) sum += p;
    row.front().second += 1.0 - sum;
    table.emplace(from, std::move(row));
  }
  return MockBigramLM(std::move(table));
}

MockBigramLM MockBigramLM::single_token(const std::string& token) {
  return MockBigramLM({{"<s>", {{token, 1.0}}}, {token, {{"</s>", 1.0}}}});
}

MockBackend::MockBackend(std::string name, MockBigramLM lm, std::set<Capability> capabilities)
    : lm_(std::move(lm)) {
  descriptor_.backend_id = "inprocess:" + name;
  descriptor_.base_url = "inprocess:" + name;
  descriptor_.capabilities = std::move(capabilities);
  descriptor_.max_retries = 0;
  descriptor_.validate();
}

TokenDistribution MockBackend::next_token_dist(const std::string&, const std::vector<std::int64_t>& context_tokens) {
  require(Capability::next_token_dist);
  return lm_.next(context_tokens);
}

std::vector<Candidate> MockBackend::batch_sample(const std::string&, int k, int n, std::uint64_t seed,
                                                 int max_tokens) {
  require(Capability::batch_sample);
  if (n < 1) throw ValidationError("batch_sample: n must be >= 1");
  std::vector<Candidate> out;
  out.reserve(static_cast<std::size_t>(n));
  const Stepper step = [this](const std::vector<std::int64_t>& generated) { return lm_.next(generated); };
  for (int i = 0; i < n; ++i) {
    Candidate candidate = sample_with(step, k, seed + static_cast<std::uint64_t>(i), max_tokens);
    candidate.index = static_cast<std::size_t>(i);
    out.push_back(std::move(candidate));
  }
  return out;
}

LoglikResult MockBackend::mock_loglikelihood(const std::string& continuation) {
  if (continuation.empty()) throw ValidationError("loglikelihood: continuation is empty");
  std::size_t words = 0;
  std::istringstream in(continuation);
  for (std::string w; in >> w;) ++words;
  return {-static_cast<double>(continuation.size()) / 4.0, std::max<std::size_t>(words, 1)};
}

LoglikResult MockBackend::loglikelihood(const std::string&, const std::string& continuation) {
  require(Capability::loglikelihood);
  return mock_loglikelihood(continuation);
}

NliJudgment MockBackend::mock_nli(const std::string& premise, const std::string& hypothesis) {
  const auto p = tokenize(premise);
  const auto h = tokenize(hypothesis);
  const std::set<std::string> premise_terms(p.begin(), p.end());
  const std::set<std::string> hypothesis_terms(h.begin(), h.end());
  double overlap = 0.0;
  if (!hypothesis_terms.empty()) {
    std::size_t shared = 0;
    for (const auto& t : hypothesis_terms) shared += premise_terms.count(t);
    overlap = static_cast<double>(shared) / static_cast<double>(hypothesis_terms.size());
  }
  const double rest = 1.0 - overlap;
  return {overlap, rest * 2.0 / 3.0, rest / 3.0};
}

NliJudgment MockBackend::nli(const std::string& premise, const std::string& hypothesis) {
  require(Capability::nli);
  return mock_nli(premise, hypothesis);
}

// --- HTTP client -------------------------------------------------------------

namespace {

struct Endpoint {
  std::string host;
  int port;
};

Endpoint parse_url(const std::string& url) {
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) throw ValidationError("unsupported backend URL '" + url + "' (expected http://)");
  std::string rest = url.substr(scheme.size());
  if (auto slash = rest.find('/'); slash != std::string::npos) rest = rest.substr(0, slash);
  Endpoint ep{rest, 80};
  if (auto colon = rest.rfind(':'); colon != std::string::npos) {
    ep.host = rest.substr(0, colon);
    try {
      ep.port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw ValidationError("bad port in backend URL '" + url + "'");
    }
  }
  if (ep.host.empty()) throw ValidationError("missing host in backend URL '" + url + "'");
  return ep;
}

void configure(httplib::Client& client, std::chrono::milliseconds timeout) {
  const auto sec = static_cast<time_t>(timeout.count() / 1000);
  const auto usec = static_cast<time_t>((timeout.count() % 1000) * 1000);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);
}

json get_health(const std::string& url, std::chrono::milliseconds timeout, int max_retries) {
  const auto ep = parse_url(url);
  std::string last_error;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    httplib::Client client(ep.host, ep.port);
    configure(client, timeout);
    auto res = client.Get("/v1/health");
    if (res && res->status == 200) {
      try {
        return json::parse(res->body);
      } catch (const json::exception& e) {
        throw ProtocolError(std::string("/v1/health: ") + e.what());
      }
    }
    last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    std::this_thread::sleep_for(std::chrono::milliseconds(50 << std::min(attempt, 4)));
  }
  throw TransportError("GET /v1/health on " + url + ": " + last_error, max_retries + 1);
}

}  // namespace

HttpBackend::HttpBackend(BackendDescriptor descriptor) : descriptor_(std::move(descriptor)) {
  descriptor_.validate();
  const auto ep = parse_url(descriptor_.base_url);
  host_ = ep.host;
  port_ = ep.port;
}

json HttpBackend::post(const std::string& endpoint, const json& body) const {
  const std::string payload = body.dump();
  std::string last_error;
  const int attempts = descriptor_.max_retries + 1;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50 << std::min(attempt - 1, 4)));
    httplib::Client client(host_, port_);
    configure(client, descriptor_.timeout);
    auto res = client.Post(endpoint, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw ProtocolError(endpoint + ": HTTP " + std::to_string(res->status) + " " + res->body);
    try {
      return json::parse(res->body);
    } catch (const json::exception& e) {
      throw ProtocolError(endpoint + ": malformed JSON: " + e.what());
    }
  }
  throw TransportError(endpoint + " on " + descriptor_.base_url + ": " + last_error, attempts);
}

TokenDistribution HttpBackend::next_token_dist(const std::string& context,
                                               const std::vector<std::int64_t>& context_tokens) {
  require(Capability::next_token_dist);
  return parse_token_distribution(post("/v1/next-token-dist", {{"context", context}, {"context_tokens", context_tokens}}));
}

std::vector<Candidate> HttpBackend::batch_sample(const std::string& context, int k, int n, std::uint64_t seed,
                                                 int max_tokens) {
  require(Capability::batch_sample);
  if (n < 1) throw ValidationError("batch_sample: n must be >= 1");
  // Same request id on every retry so the server can deduplicate.
  std::uint64_t h = hash64(seed, context, static_cast<std::uint64_t>(k));
  h = mix64(h ^ (static_cast<std::uint64_t>(n) << 32) ^ static_cast<std::uint64_t>(max_tokens));
  char request_id[17];
  std::snprintf(request_id, sizeof request_id, "%016llx", static_cast<unsigned long long>(h));
  const json body{{"request_id", request_id}, {"context", context}, {"k", k},
                  {"n", n},                   {"seed", seed},       {"max_tokens", max_tokens}};
  return parse_batch_sample(post("/v1/batch-sample", body), n);
}

LoglikResult HttpBackend::loglikelihood(const std::string& context, const std::string& continuation) {
  require(Capability::loglikelihood);
  if (continuation.empty()) throw ValidationError("loglikelihood: continuation is empty");
  return parse_loglikelihood(post("/v1/loglikelihood", {{"context", context}, {"continuation", continuation}}));
}

NliJudgment HttpBackend::nli(const std::string& premise, const std::string& hypothesis) {
  require(Capability::nli);
  return parse_nli_judgment(post("/v1/nli", {{"premise", premise}, {"hypothesis", hypothesis}}));
}

std::string default_backend_spec() {
  if (const char* url = std::getenv("SIMOAP_BACKEND_URL"); url && *url) return url;
  return "inprocess:bigram";
}

std::shared_ptr<Backend> make_backend(const std::string& spec, std::optional<std::set<Capability>> capabilities,
                                      int max_retries, std::chrono::milliseconds timeout) {
  const std::string prefix = "inprocess:";
  if (spec.rfind(prefix, 0) == 0) {
    const std::string name = spec.substr(prefix.size());
    std::set<Capability> all{Capability::next_token_dist, Capability::batch_sample, Capability::loglikelihood,
                             Capability::nli};
    auto caps = capabilities.value_or(all);
    if (name == "bigram") return std::make_shared<MockBackend>(name, MockBigramLM::persona_chat(), caps);
    if (name == "single") return std::make_shared<MockBackend>(name, MockBigramLM::single_token(), caps);
    if (name == "batch-bigram")
      return std::make_shared<MockBackend>(
          name, MockBigramLM::persona_chat(),
          capabilities.value_or(std::set<Capability>{Capability::batch_sample, Capability::loglikelihood, Capability::nli}));
    throw ValidationError("unknown in-process mock '" + name + "' (expected bigram, single or batch-bigram)");
  }

  BackendDescriptor descriptor;
  descriptor.base_url = spec;
  descriptor.backend_id = spec;
  descriptor.timeout = timeout;
  descriptor.max_retries = max_retries;
  if (capabilities) {
    descriptor.capabilities = *capabilities;
  } else {
    const json health = get_health(spec, timeout, max_retries);
    try {
      for (const auto& name : health.at("capabilities")) descriptor.capabilities.insert(parse_capability(name.get<std::string>()));
      if (health.contains("backend_id")) descriptor.backend_id = health["backend_id"].get<std::string>();
    } catch (const json::exception& e) {
      throw ProtocolError(std::string("/v1/health: ") + e.what());
    }
  }
  return std::make_shared<HttpBackend>(std::move(descriptor));
}

// --- server ------------------------------------------------------------------

struct ProtocolServer::Impl {
  std::shared_ptr<Backend> backend;
  httplib::Server server;
  std::mutex cache_mutex;
  std::map<std::string, std::string> batch_cache;  // request_id -> response body
  static constexpr int kMaxBatch = 100000;
  static constexpr std::size_t kCacheLimit = 1024;
};

namespace {

template <typename Handler>
void handle(const httplib::Request& req, httplib::Response& res, Handler&& handler) {
  try {
    const json body = json::parse(req.body);
    res.set_content(handler(body).dump(), "application/json");
  } catch (const json::exception& e) {
    res.status = 400;
    res.set_content(json{{"error", e.what()}}.dump(), "application/json");
  } catch (const ValidationError& e) {
    res.status = 400;
    res.set_content(json{{"error", e.what()}}.dump(), "application/json");
  } catch (const CapabilityError& e) {
    res.status = 400;
    res.set_content(json{{"error", e.what()}}.dump(), "application/json");
  } catch (const std::exception& e) {
    res.status = 500;
    res.set_content(json{{"error", e.what()}}.dump(), "application/json");
  }
}

}  // namespace

ProtocolServer::ProtocolServer(std::shared_ptr<Backend> backend) : impl_(std::make_unique<Impl>()) {
  impl_->backend = std::move(backend);
  auto* impl = impl_.get();
  auto& srv = impl->server;

  srv.Get("/v1/health", [impl](const httplib::Request&, httplib::Response& res) {
    const auto& d = impl->backend->descriptor();
    json caps = json::array();
    for (auto c : d.capabilities) caps.push_back(to_string(c));
    res.set_content(json{{"backend_id", d.backend_id}, {"capabilities", caps}}.dump(), "application/json");
  });
  srv.Post("/v1/next-token-dist", [impl](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [&](const json& body) {
      return to_json(impl->backend->next_token_dist(body.at("context").get<std::string>(),
                                                    body.value("context_tokens", std::vector<std::int64_t>{})));
    });
  });
  srv.Post("/v1/batch-sample", [impl](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [&](const json& body) -> json {
      const int n = body.at("n").get<int>();
      if (n > Impl::kMaxBatch) {
        res.status = 413;
        return json{{"error", "batch too large"}};
      }
      const std::string request_id = body.value("request_id", std::string());
      if (!request_id.empty()) {
        std::lock_guard lock(impl->cache_mutex);
        if (auto it = impl->batch_cache.find(request_id); it != impl->batch_cache.end()) return json::parse(it->second);
      }
      const auto candidates =
          impl->backend->batch_sample(body.at("context").get<std::string>(), body.at("k").get<int>(), n,
                                      body.at("seed").get<std::uint64_t>(), body.value("max_tokens", 32));
      json out{{"candidates", candidates}};
      if (!request_id.empty()) {
        std::lock_guard lock(impl->cache_mutex);
        if (impl->batch_cache.size() >= Impl::kCacheLimit) impl->batch_cache.clear();
        impl->batch_cache.emplace(request_id, out.dump());
      }
      return out;
    });
  });
  srv.Post("/v1/loglikelihood", [impl](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [&](const json& body) {
      return to_json(impl->backend->loglikelihood(body.value("context", std::string()),
                                                  body.at("continuation").get<std::string>()));
    });
  });
  srv.Post("/v1/nli", [impl](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [&](const json& body) {
      return to_json(
          impl->backend->nli(body.at("premise").get<std::string>(), body.at("hypothesis").get<std::string>()));
    });
  });
}

ProtocolServer::~ProtocolServer() { stop(); }

int ProtocolServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  if (!impl_->server.bind_to_port(host, port)) throw TransportError("cannot bind " + host + ":" + std::to_string(port), 1);
  return port;
}

void ProtocolServer::listen() { impl_->server.listen_after_bind(); }

void ProtocolServer::stop() {
  if (impl_) impl_->server.stop();
}

void ProtocolServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace simoap
