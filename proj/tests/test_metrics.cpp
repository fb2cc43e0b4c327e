#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "simoap/error.hpp"
#include "simoap/metrics.hpp"

using namespace simoap;

namespace {

using Strings = std::vector<std::string>;

SystemResults row(std::string name, std::string block, double ppl_a, double ppl_b, double d1, double d2, double c,
                  double rep) {
  SystemResults s;
  s.system_name = std::move(name);
  s.block = std::move(block);
  s.ppl_a = ppl_a;
  s.ppl_b = ppl_b;
  s.dis1 = d1;
  s.dis2 = d2;
  s.c_score = c;
  s.rep = rep;
  return s;
}

}  // namespace

TEST_CASE("distinct_n examples") {
  CHECK(distinct_n(Strings{"a b", "a b"}, 1) == 0.5);
  CHECK(distinct_n(Strings{"a b", "a b"}, 2) == 0.5);
  CHECK(distinct_n(Strings{"a"}, 2) == 0.0);
  CHECK(distinct_n(Strings{"a b c"}, 1) == 1.0);
  CHECK_THROWS_AS(distinct_n(Strings{"a"}, 0), ValidationError);
}

TEST_CASE("property: distinct_n lies in (0, 1] when n-grams exist") {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    Strings responses;
    for (unsigned i = 0; i < 1 + rng() % 5; ++i) {
      std::string r;
      for (unsigned t = 0; t < rng() % 6; ++t) r += std::string(1, static_cast<char>('a' + rng() % 4)) + " ";
      responses.push_back(r);
    }
    for (int n = 1; n <= 2; ++n) {
      const double d = distinct_n(responses, n);
      CHECK(d >= 0.0);
      CHECK(d <= 1.0);
    }
  }
}

TEST_CASE("repetition_rate examples") {
  CHECK(repetition_rate(Strings{"x", "x", "y"}, Strings{"x", "g", "g"}) == doctest::Approx(1.0 / 3.0));
  CHECK(repetition_rate(Strings{"a", "b", "c"}, Strings{"g", "g", "g"}) == 0.0);
  CHECK(repetition_rate(Strings{"a", "a"}, Strings{"b", "b"}) == 1.0);
  CHECK(repetition_rate(Strings{" a  b", "a b"}, Strings{"x", "y"}) == 1.0);
  CHECK_THROWS_AS(repetition_rate(Strings{"a"}, Strings{}), ValidationError);
}

TEST_CASE("property: repetition_rate is permutation invariant") {
  std::mt19937 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (unsigned i = 0; i < 1 + rng() % 8; ++i)
      pairs.emplace_back(std::string(1, static_cast<char>('a' + rng() % 3)), std::string(1, static_cast<char>('a' + rng() % 3)));
    const auto rate = [](const auto& ps) {
      Strings r, g;
      for (const auto& [a, b] : ps) {
        r.push_back(a);
        g.push_back(b);
      }
      return repetition_rate(r, g);
    };
    const double base = rate(pairs);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    CHECK(rate(pairs) == base);
  }
}

TEST_CASE("ppl_aggregate filtering") {
  CHECK(ppl_aggregate(std::vector<double>{50, 150}) == 100.0);
  CHECK(ppl_aggregate(std::vector<double>{50, 20000}, kMaskedLmPplFilter) == 50.0);
  CHECK(ppl_aggregate(std::vector<double>{50, 20000}) == 10025.0);
  CHECK_THROWS_AS(ppl_aggregate(std::vector<double>{20000}, 10000.0), AggregationError);
  CHECK_THROWS_AS(ppl_aggregate(std::vector<double>{}), ValidationError);
  CHECK(perplexity(-std::log(10.0) * 3, 3) == doctest::Approx(10.0));
}

TEST_CASE("consistency score mapping") {
  CHECK(consistency_score(NliLabel::entailment) == 1);
  CHECK(consistency_score(NliLabel::neutral) == 0);
  CHECK(consistency_score(NliLabel::contradiction) == -1);
  CHECK(consistency_score("contradiction") == -1);
  CHECK_THROWS_AS(consistency_score("unsure"), ValidationError);
  const std::vector<NliLabel> labels{NliLabel::entailment, NliLabel::neutral, NliLabel::contradiction,
                                     NliLabel::entailment};
  CHECK(c_mean(labels) == 0.25);
  CHECK(c_mean(std::vector<NliLabel>(7, NliLabel::entailment)) == 1.0);
}

TEST_CASE("normalized_averages endpoints and constant columns") {
  std::vector<SystemResults> dominate{row("good", "b", 1, 1, 0.9, 0.9, 1, 0.0), row("bad", "b", 9, 9, 0.1, 0.1, -1, 0.5)};
  auto n = normalized_averages(dominate);
  CHECK(n[0].avg == 1.0);
  CHECK(n[1].avg == 0.0);
  CHECK(n[0].avg_r == 1.0);
  CHECK(n[1].avg_r == 0.0);

  std::vector<SystemResults> same{row("a", "b", 5, 5, 0.5, 0.5, 0, 0.1), row("b", "b", 5, 5, 0.5, 0.5, 0, 0.1)};
  n = normalized_averages(same);
  CHECK(n[0].avg == 0.5);
  CHECK(n[1].avg_r == 0.5);

  std::vector<SystemResults> lonely{row("a", "x", 1, 1, 1, 1, 1, 1), row("b", "y", 1, 1, 1, 1, 1, 1)};
  CHECK_THROWS_AS(normalized_averages(lonely, Grouping::per_block), ValidationError);
  CHECK_NOTHROW(normalized_averages(lonely, Grouping::global));
}

TEST_CASE("property: affine rescaling of a raw column leaves Avg unchanged") {
  std::mt19937 rng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<SystemResults> table;
    for (int i = 0; i < 4; ++i)
      table.push_back(row("s" + std::to_string(i), "b", 10 + 50 * u(rng), 50 + 100 * u(rng), u(rng), u(rng),
                          2 * u(rng) - 1, u(rng)));
    const auto base = normalized_averages(table);
    auto scaled = table;
    for (auto& s : scaled) {
      s.ppl_a = 3.0 * s.ppl_a + 7.0;
      s.dis2 = 100.0 * s.dis2;
      s.rep = 0.5 * s.rep + 2.0;
    }
    const auto after = normalized_averages(scaled);
    for (std::size_t i = 0; i < table.size(); ++i) {
      CHECK(after[i].avg == doctest::Approx(base[i].avg).epsilon(1e-12));
      CHECK(after[i].avg_r == doctest::Approx(base[i].avg_r).epsilon(1e-12));
    }
  }
}

TEST_CASE("report rendering and JSON column order") {
  MetricsReport report;
  report.systems = {row("alpha", "b", 1, 2, 0.1, 0.2, 0.3, 0.4), row("beta", "b", 2, 3, 0.2, 0.3, 0.4, 0.5)};
  report.scores = normalized_averages(report.systems);
  const json j = report;
  CHECK(j["columns"] == json{"ppl_a", "ppl_b", "dis1", "dis2", "c_score", "avg", "rep", "avg_r"});
  CHECK(j["systems"].size() == 2);
  const auto text = render_table(report);
  CHECK(text.find("PPL_a") < text.find("Avg-R"));
  CHECK(text.find("alpha") != std::string::npos);

  const SystemResults round = json(report.systems[0]).get<SystemResults>();
  CHECK(round.system_name == "alpha");
  CHECK(round.rep == 0.4);
}

TEST_CASE("per-block grouping reproduces the published BoB averages") {
  const auto row = [](double pa, double pb, double d1, double d2, double c, double rep) {
    SystemResults s;
    s.block = "bob";
    s.ppl_a = pa;
    s.ppl_b = pb;
    s.dis1 = d1;
    s.dis2 = d2;
    s.c_score = c;
    s.rep = rep;
    return s;
  };
  const std::vector<SystemResults> bob = {row(42.47, 139.04, 5.62, 17.77, 0.114, 8.63),
                                          row(21.74, 108.04, 5.27, 20.22, 0.353, 3.55),
                                          row(19.34, 81.96, 5.20, 17.21, 0.048, 23.10),
                                          row(9.93, 68.43, 4.21, 18.78, 0.579, 0.65)};
  const double avg[] = {0.262, 0.680, 0.444, 0.704};
  const double avg_r[] = {0.326, 0.712, 0.370, 0.754};
  const auto scores = normalized_averages(bob, Grouping::per_block);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(scores[i].avg - avg[i]) <= 0.01);
    CHECK(std::abs(scores[i].avg_r - avg_r[i]) <= 0.01);
  }
}
