#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "simoap/consistency.hpp"
#include "simoap/error.hpp"

using namespace simoap;

namespace {

/// Returns a fixed judgment per premise.
class TableNli final : public Backend {
 public:
  explicit TableNli(std::map<std::string, NliJudgment> table) : table_(std::move(table)) {
    descriptor_.backend_id = "table-nli";
    descriptor_.capabilities = {Capability::nli};
  }
  const BackendDescriptor& descriptor() const override { return descriptor_; }
  TokenDistribution next_token_dist(const std::string&, const std::vector<std::int64_t>&) override {
    throw CapabilityError("no");
  }
  std::vector<Candidate> batch_sample(const std::string&, int, int, std::uint64_t, int) override {
    throw CapabilityError("no");
  }
  LoglikResult loglikelihood(const std::string&, const std::string&) override { throw CapabilityError("no"); }
  NliJudgment nli(const std::string& premise, const std::string&) override { return table_.at(premise); }

 private:
  BackendDescriptor descriptor_;
  std::map<std::string, NliJudgment> table_;
};

ScoreRecord scored(std::size_t index, double prob, std::optional<double> sim = std::nullopt) {
  ScoreRecord r;
  r.candidate_index = index;
  r.entailment_prob = prob;
  r.coherence_sim = sim;
  return r;
}

}  // namespace

TEST_CASE("single persona sentence passes through") {
  TableNli nli({{"p1", {0.7, 0.2, 0.1}}});
  const auto r = persona_entailment(nli, {"p1"}, "cand");
  CHECK(r.entailment_prob == doctest::Approx(0.7));
  CHECK(r.label == NliLabel::entailment);
}

TEST_CASE("max and mean aggregation") {
  TableNli nli({{"p1", {0.2, 0.1, 0.7}}, {"p2", {0.9, 0.05, 0.05}}});
  CHECK(persona_entailment(nli, {"p1", "p2"}, "c", PersonaAggregation::max).entailment_prob == doctest::Approx(0.9));
  const auto mean = persona_entailment(nli, {"p1", "p2"}, "c", PersonaAggregation::mean);
  CHECK(mean.entailment_prob == doctest::Approx(0.55));
  CHECK(mean.label == NliLabel::entailment);  // from the max-entailment sentence
  CHECK_THROWS_AS(persona_entailment(nli, {}, "c"), ValidationError);
}

TEST_CASE("select_final argmax and tie-breaks") {
  std::vector<ScoreRecord> a{scored(0, 0.1), scored(1, 0.9), scored(2, 0.3)};
  CHECK(select_final(a) == 1);
  std::vector<ScoreRecord> b{scored(0, 0.5, 0.2), scored(1, 0.5, 0.8)};
  CHECK(select_final(b) == 1);
  std::vector<ScoreRecord> c{scored(4, 0.5, 0.3), scored(2, 0.5, 0.3)};
  CHECK(select_final(c) == 2);
  std::vector<ScoreRecord> single{scored(5, 0.0)};
  CHECK(select_final(single) == 5);
  CHECK_THROWS_AS(select_final(std::vector<ScoreRecord>{}), ValidationError);
}

TEST_CASE("property: strictly increasing transforms keep the selection") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ScoreRecord> records;
    const int n = 1 + static_cast<int>(rng() % 10);
    for (int i = 0; i < n; ++i) records.push_back(scored(static_cast<std::size_t>(i), std::round(u(rng) * 5) / 5, u(rng)));
    const auto base = select_final(records);
    for (auto& r : records) r.entailment_prob = std::sqrt(*r.entailment_prob) * 0.5 + 0.1;
    CHECK(select_final(records) == base);
  }
}

TEST_CASE("property: with max aggregation extra persona sentences never lower the score") {
  std::mt19937 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<std::string, NliJudgment> table;
    std::vector<std::string> persona;
    for (int i = 0; i < 5; ++i) {
      const double e = static_cast<double>(rng() % 100) / 100.0;
      table["p" + std::to_string(i)] = {e, (1 - e) / 2, (1 - e) / 2};
      persona.push_back("p" + std::to_string(i));
    }
    TableNli nli(table);
    double prev = -1;
    for (std::size_t m = 1; m <= persona.size(); ++m) {
      const std::vector<std::string> prefix(persona.begin(), persona.begin() + static_cast<std::ptrdiff_t>(m));
      const double now = persona_entailment(nli, prefix, "c").entailment_prob;
      CHECK(now >= prev);
      prev = now;
    }
  }
}
