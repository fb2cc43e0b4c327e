#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "simoap/core.hpp"

namespace simoap {

/// Next-token distribution. Token ids are backend-local; `token_texts`
/// holds the surface piece appended to the response when a token is drawn.
struct TokenDistribution {
  std::vector<std::int64_t> token_ids;
  std::vector<double> logprobs;
  std::vector<std::string> token_texts;
  std::optional<std::int64_t> eos_token_id;

  std::size_t size() const { return token_ids.size(); }
};

// Throws ProtocolError unless lengths agree, ids are unique, every logprob is
// <= 0 (or -inf) and the probabilities sum to 1 within `tolerance`.
void validate(const TokenDistribution& dist, double tolerance = 1e-6);

struct NliJudgment {
  double entailment = 0.0;
  double neutral = 0.0;
  double contradiction = 0.0;

  NliLabel argmax() const;
};

void validate(const NliJudgment& judgment, double tolerance = 1e-6);

struct LoglikResult {
  double total_loglik = 0.0;
  std::size_t token_count = 0;
};

enum class Capability { next_token_dist, batch_sample, loglikelihood, nli };

std::string to_string(Capability capability);
Capability parse_capability(const std::string& name);

struct BackendDescriptor {
  std::string backend_id;
  std::string base_url;  // "http://host:port" or "inprocess:<mock-name>"
  std::set<Capability> capabilities;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;

  bool has(Capability capability) const { return capabilities.count(capability) > 0; }
  void validate() const;
};

/// Generation / scoring backend. Implementations must accept concurrent calls.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual const BackendDescriptor& descriptor() const = 0;

  // `context` is the dialogue prompt; `context_tokens` the ids generated so far.
  virtual TokenDistribution next_token_dist(const std::string& context,
                                            const std::vector<std::int64_t>& context_tokens) = 0;
  virtual std::vector<Candidate> batch_sample(const std::string& context, int k, int n, std::uint64_t seed,
                                              int max_tokens) = 0;
  virtual LoglikResult loglikelihood(const std::string& context, const std::string& continuation) = 0;
  virtual NliJudgment nli(const std::string& premise, const std::string& hypothesis) = 0;

 protected:
  void require(Capability capability) const;
};

// --- wire protocol -------------------------------------------------------

// Parsers validate before returning; any violation is a ProtocolError.
TokenDistribution parse_token_distribution(const json& payload);
NliJudgment parse_nli_judgment(const json& payload);
LoglikResult parse_loglikelihood(const json& payload);
std::vector<Candidate> parse_batch_sample(const json& payload, int expected_n);

json to_json(const TokenDistribution& dist);
json to_json(const NliJudgment& judgment);
json to_json(const LoglikResult& result);

// --- in-process mocks ----------------------------------------------------

/// Bigram LM: the next-token distribution depends only on the previous
/// term (or `bos_term` at the start). Ids are positions in `terms()`.
class MockBigramLM {
 public:
  using Row = std::vector<std::pair<std::string, double>>;

  MockBigramLM(std::map<std::string, Row> table, std::string eos_term = "</s>", std::string bos_term = "<s>");

  TokenDistribution next(const std::vector<std::int64_t>& context_tokens) const;
  const std::vector<std::string>& terms() const { return terms_; }
  std::int64_t id_of(const std::string& term) const;
  std::int64_t eos_id() const { return id_of(eos_); }

  // Persona-chat flavored table used by `inprocess:bigram`.
  static MockBigramLM persona_chat();
  // Always "yes" then EOS; used by `inprocess:single`.
  static MockBigramLM single_token(const std::string& token = "yes");

 private:
  std::map<std::string, Row> table_;
  std::string eos_;
  std::string bos_;
  std::vector<std::string> terms_;
  std::map<std::string, std::int64_t> ids_;
};

/// All-capability mock backend:
///  - generation from a MockBigramLM,
///  - batch_sample runs the in-core top-k sampler with stream seed + i,
///  - loglikelihood = -(characters in continuation) / 4, token_count = word count,
///  - nli: entailment = fraction of hypothesis tokens present in the premise,
///    remainder split 2:1 between neutral and contradiction.
class MockBackend final : public Backend {
 public:
  MockBackend(std::string name, MockBigramLM lm,
              std::set<Capability> capabilities = {Capability::next_token_dist, Capability::batch_sample,
                                                   Capability::loglikelihood, Capability::nli});

  const BackendDescriptor& descriptor() const override { return descriptor_; }
  TokenDistribution next_token_dist(const std::string& context,
                                    const std::vector<std::int64_t>& context_tokens) override;
  std::vector<Candidate> batch_sample(const std::string& context, int k, int n, std::uint64_t seed,
                                      int max_tokens) override;
  LoglikResult loglikelihood(const std::string& context, const std::string& continuation) override;
  NliJudgment nli(const std::string& premise, const std::string& hypothesis) override;

  static LoglikResult mock_loglikelihood(const std::string& continuation);
  static NliJudgment mock_nli(const std::string& premise, const std::string& hypothesis);

 private:
  BackendDescriptor descriptor_;
  MockBigramLM lm_;
};

/// HTTP client for the JSON protocol (POST /v1/next-token-dist,
/// /v1/batch-sample, /v1/loglikelihood, /v1/nli; GET /v1/health).
/// Transport failures and 5xx responses are retried up to max_retries.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendDescriptor descriptor);

  const BackendDescriptor& descriptor() const override { return descriptor_; }
  TokenDistribution next_token_dist(const std::string& context,
                                    const std::vector<std::int64_t>& context_tokens) override;
  std::vector<Candidate> batch_sample(const std::string& context, int k, int n, std::uint64_t seed,
                                      int max_tokens) override;
  LoglikResult loglikelihood(const std::string& context, const std::string& continuation) override;
  NliJudgment nli(const std::string& premise, const std::string& hypothesis) override;

  json post(const std::string& endpoint, const json& body) const;

 private:
  BackendDescriptor descriptor_;
  std::string host_;
  int port_ = 80;
};

/// Resolves "inprocess:<mock>" or an http(s) URL. For URLs the capability
/// set is taken from GET /v1/health unless `capabilities` is given.
std::shared_ptr<Backend> make_backend(const std::string& spec, std::optional<std::set<Capability>> capabilities = {},
                                      int max_retries = 3,
                                      std::chrono::milliseconds timeout = std::chrono::milliseconds(30000));

/// Default backend spec: $SIMOAP_BACKEND_URL if set, else "inprocess:bigram".
std::string default_backend_spec();

/// Blocking HTTP server exposing `backend` over the protocol. Stops when
/// `stop()` is called from another thread.
class ProtocolServer {
 public:
  explicit ProtocolServer(std::shared_ptr<Backend> backend);
  ~ProtocolServer();
  ProtocolServer(const ProtocolServer&) = delete;
  ProtocolServer& operator=(const ProtocolServer&) = delete;

  // Binds to port (0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  void listen();  // blocks
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace simoap
