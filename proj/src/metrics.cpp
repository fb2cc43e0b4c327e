#include "simoap/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <Eigen/Dense>

#include "simoap/error.hpp"
#include "simoap/text.hpp"

namespace simoap {

double distinct_n(std::span<const std::string> responses, int n) {
  if (n < 1) throw ValidationError("distinct_n: n must be >= 1");
  std::set<std::vector<std::string>> unique;
  std::size_t total = 0;
  const auto width = static_cast<std::size_t>(n);
  for (const auto& response : responses) {
    const auto tokens = tokenize(response);
    if (tokens.size() < width) continue;
    for (std::size_t i = 0; i + width <= tokens.size(); ++i) {
      unique.emplace(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                     tokens.begin() + static_cast<std::ptrdiff_t>(i + width));
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(unique.size()) / static_cast<double>(total);
}

double repetition_rate(std::span<const std::string> responses, std::span<const std::string> golds) {
  if (responses.size() != golds.size()) throw ValidationError("repetition_rate: responses and golds differ in length");
  if (responses.empty()) throw ValidationError("repetition_rate: no responses");
  std::vector<std::string> normalized;
  normalized.reserve(responses.size());
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& r : responses) {
    normalized.push_back(normalize_sentence(r));
    ++counts[normalized.back()];
  }
  std::size_t repeated = 0;
  for (std::size_t i = 0; i < normalized.size(); ++i)
    if (counts[normalized[i]] > 1 && normalized[i] != normalize_sentence(golds[i])) ++repeated;
  return static_cast<double>(repeated) / static_cast<double>(responses.size());
}

double ppl_aggregate(std::span<const double> per_response_ppl, std::optional<double> filter_threshold) {
  if (per_response_ppl.empty()) throw ValidationError("ppl_aggregate: empty list");
  double sum = 0.0;
  std::size_t kept = 0;
  for (double ppl : per_response_ppl) {
    if (filter_threshold && ppl > *filter_threshold) continue;
    sum += ppl;
    ++kept;
  }
  if (kept == 0) {
    std::ostringstream msg;
    msg << "ppl_aggregate: every entry exceeds the filter threshold " << *filter_threshold;
    throw AggregationError(msg.str());
  }
  return sum / static_cast<double>(kept);
}

double perplexity(double total_loglik, std::size_t token_count) {
  if (token_count == 0) throw ValidationError("perplexity: token_count must be >= 1");
  return std::exp(-total_loglik / static_cast<double>(token_count));
}

int consistency_score(NliLabel label) {
  switch (label) {
    case NliLabel::entailment:
      return 1;
    case NliLabel::neutral:
      return 0;
    case NliLabel::contradiction:
      return -1;
  }
  throw ValidationError("consistency_score: unknown label");
}

int consistency_score(const std::string& label) { return consistency_score(parse_nli_label(label)); }

double c_mean(std::span<const NliLabel> labels) {
  if (labels.empty()) throw ValidationError("c_mean: no labels");
  double sum = 0.0;
  for (auto label : labels) sum += consistency_score(label);
  return sum / static_cast<double>(labels.size());
}

std::vector<NormalizedScores> normalized_averages(std::span<const SystemResults> table, Grouping grouping) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < table.size(); ++i)
    groups[grouping == Grouping::per_block ? table[i].block : std::string()].push_back(i);

  std::vector<NormalizedScores> out(table.size());
  for (const auto& [block, rows] : groups) {
    if (rows.size() < 2)
      throw ValidationError("normalized_averages: group '" + block + "' has fewer than 2 systems");
    // Columns oriented so that larger is better.
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), 6);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& s = table[rows[r]];
      x.row(static_cast<Eigen::Index>(r)) << -s.ppl_a, -s.ppl_b, s.dis1, s.dis2, s.c_score, -s.rep;
    }
    const Eigen::RowVectorXd lo = x.colwise().minCoeff();
    const Eigen::RowVectorXd range = x.colwise().maxCoeff() - lo;
    Eigen::MatrixXd normalized(x.rows(), x.cols());
    for (Eigen::Index col = 0; col < x.cols(); ++col) {
      if (range[col] == 0.0)
        normalized.col(col).setConstant(0.5);
      else
        normalized.col(col) = (x.col(col).array() - lo[col]) / range[col];
    }
    const Eigen::VectorXd avg = normalized.leftCols(5).rowwise().mean();
    const Eigen::VectorXd avg_r = normalized.rowwise().mean();
    for (std::size_t r = 0; r < rows.size(); ++r)
      out[rows[r]] = {avg[static_cast<Eigen::Index>(r)], avg_r[static_cast<Eigen::Index>(r)]};
  }
  return out;
}

void to_json(json& j, const SystemResults& v) {
  json responses = json::array();
  for (const auto& [id, text] : v.responses) responses.push_back({{"instance_id", id}, {"text", text}});
  j = json{{"system_name", v.system_name},
           {"block", v.block},
           {"ppl_a", v.ppl_a},
           {"ppl_b", v.ppl_b},
           {"dis1", v.dis1},
           {"dis2", v.dis2},
           {"c_score", v.c_score},
           {"rep", v.rep},
           {"generation_seconds", v.generation_seconds},
           {"evaluation_seconds", v.evaluation_seconds},
           {"responses", responses}};
}

void from_json(const json& j, SystemResults& v) {
  j.at("system_name").get_to(v.system_name);
  v.block = j.value("block", std::string("default"));
  j.at("ppl_a").get_to(v.ppl_a);
  j.at("ppl_b").get_to(v.ppl_b);
  j.at("dis1").get_to(v.dis1);
  j.at("dis2").get_to(v.dis2);
  j.at("c_score").get_to(v.c_score);
  j.at("rep").get_to(v.rep);
  v.generation_seconds = j.value("generation_seconds", 0.0);
  v.evaluation_seconds = j.value("evaluation_seconds", 0.0);
  v.responses.clear();
  for (const auto& r : j.value("responses", json::array()))
    v.responses.emplace_back(r.at("instance_id").get<std::string>(), r.at("text").get<std::string>());
}

void to_json(json& j, const MetricsReport& v) {
  json rows = json::array();
  for (std::size_t i = 0; i < v.systems.size(); ++i) {
    const auto& s = v.systems[i];
    rows.push_back({{"system_name", s.system_name},
                    {"block", s.block},
                    {"ppl_a", s.ppl_a},
                    {"ppl_b", s.ppl_b},
                    {"dis1", s.dis1},
                    {"dis2", s.dis2},
                    {"c_score", s.c_score},
                    {"avg", v.scores.at(i).avg},
                    {"rep", s.rep},
                    {"avg_r", v.scores.at(i).avg_r},
                    {"generation_seconds", s.generation_seconds},
                    {"evaluation_seconds", s.evaluation_seconds}});
  }
  j = json{{"grouping", v.grouping},
           {"columns", {"ppl_a", "ppl_b", "dis1", "dis2", "c_score", "avg", "rep", "avg_r"}},
           {"systems", rows}};
}

std::string render_table(const MetricsReport& report) {
  const std::vector<std::string> header = {"System", "Block", "PPL_a", "PPL_b", "Dis-1", "Dis-2", "C",
                                           "Avg",    "Rep",   "Avg-R", "Gen(s)", "Eval(s)"};
  std::vector<std::vector<std::string>> cells{header};
  const auto fmt = [](double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < report.systems.size(); ++i) {
    const auto& s = report.systems[i];
    cells.push_back({s.system_name, s.block, fmt(s.ppl_a, 2), fmt(s.ppl_b, 2), fmt(s.dis1, 4), fmt(s.dis2, 4),
                     fmt(s.c_score, 3), fmt(report.scores.at(i).avg, 3), fmt(s.rep, 4),
                     fmt(report.scores.at(i).avg_r, 3), fmt(s.generation_seconds, 3), fmt(s.evaluation_seconds, 3)});
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      if (c) out << "  ";
      const auto pad = std::string(width[c] - cells[r][c].size(), ' ');
      // Names left-aligned, numbers right-aligned.
      out << (c < 2 ? cells[r][c] + pad : pad + cells[r][c]);
    }
    out << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    }
  }
  return out.str();
}

}  // namespace simoap
