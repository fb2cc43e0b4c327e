#include <doctest.h>

#include <random>
#include <sstream>

#include "simoap/core.hpp"
#include "simoap/error.hpp"

using namespace simoap;

TEST_CASE("load_dataset parses one well-formed line") {
  std::istringstream in(R"({"id":"d1","persona":["i like cats"],"history":["hi","hello"],"gold":"me too"})");
  const auto data = parse_dataset(in);
  REQUIRE(data.size() == 1);
  CHECK(data[0].id == "d1");
  CHECK(data[0].persona == std::vector<std::string>{"i like cats"});
  CHECK(data[0].history == std::vector<std::string>{"hi", "hello"});
  CHECK(data[0].gold == "me too");
}

TEST_CASE("load_dataset on an empty file") {
  std::istringstream in("");
  CHECK(parse_dataset(in).empty());
}

TEST_CASE("duplicate ids are rejected and named") {
  std::istringstream in(R"({"id":"d1","persona":["p"],"history":["h"],"gold":"g"}
{"id":"d1","persona":["q"],"history":["h"],"gold":"g"})");
  try {
    parse_dataset(in);
    FAIL("expected duplicate-id error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("d1") != std::string::npos);
  }
}

TEST_CASE("malformed line reports its line number") {
  std::istringstream in(R"({"id":"d1","persona":["p"],"history":["h"],"gold":"g"}
{"id": broken)");
  try {
    parse_dataset(in);
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("missing field and empty persona are rejected") {
  std::istringstream missing(R"({"id":"d1","persona":["p"],"history":["h"]})");
  CHECK_THROWS_AS(parse_dataset(missing), ParseError);
  std::istringstream empty_persona(R"({"id":"d1","persona":[],"history":["h"],"gold":"g"})");
  CHECK_THROWS_AS(parse_dataset(empty_persona), ValidationError);
}

TEST_CASE("coherence_context joins utterances") {
  DialogueInstance inst{"x", {"p"}, {"a", "b", "c"}, "g"};
  CHECK(coherence_context(inst, CoherenceContext::full_history) == "a b c");
  CHECK(coherence_context(inst, CoherenceContext::last_two) == "b c");
  inst.history = {"only"};
  CHECK(coherence_context(inst, CoherenceContext::last_two) == "only");
  inst.history.clear();
  CHECK_THROWS_AS(coherence_context(inst, CoherenceContext::full_history), ValidationError);
}

namespace {

std::string random_word(std::mt19937& rng) {
  static const char* words[] = {"i", "like", "dogs", "my", "job", "is", "fun", "\"quoted\"", "tab\tbed", "ünï"};
  return words[rng() % 10];
}

std::vector<DialogueInstance> random_dataset(std::mt19937& rng) {
  std::vector<DialogueInstance> out;
  const int n = static_cast<int>(rng() % 6);
  for (int i = 0; i < n; ++i) {
    DialogueInstance d;
    d.id = "id" + std::to_string(i);
    for (unsigned p = 0; p < 1 + rng() % 4; ++p) d.persona.push_back(random_word(rng) + " " + random_word(rng));
    for (unsigned h = 0; h < 1 + rng() % 5; ++h) d.history.push_back(random_word(rng));
    d.gold = rng() % 3 ? random_word(rng) : "";
    out.push_back(d);
  }
  return out;
}

}  // namespace

TEST_CASE("property: dataset serialize/load round-trip") {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const auto data = random_dataset(rng);
    std::stringstream buf;
    write_dataset(buf, data);
    CHECK(parse_dataset(buf) == data);
  }
}

TEST_CASE("property: last_two context is an utterance suffix of the full context") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    for (const auto& d : random_dataset(rng)) {
      const auto full = coherence_context(d, CoherenceContext::full_history);
      const auto tail = coherence_context(d, CoherenceContext::last_two);
      REQUIRE(full.size() >= tail.size());
      CHECK(full.compare(full.size() - tail.size(), tail.size(), tail) == 0);
      if (full.size() > tail.size()) CHECK(full[full.size() - tail.size() - 1] == ' ');
    }
  }
}

TEST_CASE("PipelineConfig defaults and invariants") {
  PipelineConfig cfg;
  CHECK(cfg.k == 100);
  CHECK(cfg.s == 2000);
  CHECK(cfg.c == 100);
  CHECK_NOTHROW(cfg.validate());
  cfg.c = cfg.s + 1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.c = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = PipelineConfig{};
  cfg.k = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);

  const PipelineConfig parsed = json::parse(R"({"k":5,"s":10,"c":3,"coherence_context":"last_two"})");
  CHECK(parsed.k == 5);
  CHECK(parsed.coherence_context == CoherenceContext::last_two);
  CHECK(parsed.persona_aggregation == PersonaAggregation::max);
}

TEST_CASE("Candidate and ScoreRecord invariants") {
  Candidate c{"hi", 0, 2, std::vector<double>{-0.1}, 0};
  CHECK_THROWS_AS(validate(c), ValidationError);
  c.token_logprobs = std::vector<double>{-0.1, 0.2};
  CHECK_THROWS_AS(validate(c), ValidationError);
  c.token_logprobs = std::vector<double>{-0.1, 0.0};
  CHECK_NOTHROW(validate(c));

  ScoreRecord r;
  r.entailment_prob = 1.2;
  CHECK_THROWS_AS(validate(r), ValidationError);
  r.entailment_prob = 0.4;
  r.coherence_sim = -1.5;
  CHECK_THROWS_AS(validate(r), ValidationError);
}

TEST_CASE("NLI label names") {
  CHECK(parse_nli_label("neutral") == NliLabel::neutral);
  CHECK(to_string(NliLabel::contradiction) == "contradiction");
  CHECK_THROWS_AS(parse_nli_label("maybe"), ValidationError);
}
