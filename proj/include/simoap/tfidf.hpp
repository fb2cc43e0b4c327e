#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "simoap/core.hpp"
#include "simoap/error.hpp"
#include "simoap/text.hpp"

namespace simoap {

enum class IdfBase { base10, natural };

/// TF-IDF representation of a corpus whose document 0 is the context
/// document and documents 1..n are candidates.
///
/// Row j of `doc_vectors` is the document vector V_j over `vocabulary`
/// (terms in order of first appearance). Weights follow
///   tf(i,j)  = n(i,j) / sum_k n(k,j)
///   idf(i)   = log(|D| / (1 + df(i)))
/// with no clamping, so a term present in nearly every document gets a
/// negative idf. Empty documents have all-zero rows.
template <typename Scalar = double>
struct TfidfModel {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

  std::vector<std::string> vocabulary;
  Vector idf;
  SparseMatrix doc_vectors;
  // candidate_indices[j - 1] is the Candidate::index of document j.
  std::vector<std::size_t> candidate_indices;

  std::size_t doc_count() const { return static_cast<std::size_t>(doc_vectors.rows()); }
  std::size_t term_count() const { return vocabulary.size(); }
  Vector dense_vector(std::size_t doc) const { return Vector(doc_vectors.row(static_cast<Eigen::Index>(doc)).transpose()); }
};

/// Cosine similarity; 0 when either vector has zero norm.
template <typename U, typename V>
auto cosine(const U& u, const V& v) {
  using Scalar = typename U::Scalar;
  if (u.size() != v.size()) throw ValidationError("cosine: vector length mismatch");
  const Scalar nu = u.norm();
  const Scalar nv = v.norm();
  if (nu == Scalar(0) || nv == Scalar(0)) return Scalar(0);
  const Scalar sim = u.dot(v) / (nu * nv);
  return std::clamp(sim, Scalar(-1), Scalar(1));
}

template <typename Scalar = double>
TfidfModel<Scalar> build_tfidf_from_tokens(const std::vector<std::vector<std::string>>& documents,
                                           IdfBase base = IdfBase::base10) {
  if (documents.empty()) throw ValidationError("build_tfidf: empty corpus");
  TfidfModel<Scalar> model;
  std::unordered_map<std::string, Eigen::Index> term_ids;
  std::vector<std::unordered_map<Eigen::Index, Eigen::Index>> counts(documents.size());
  for (std::size_t j = 0; j < documents.size(); ++j) {
    for (const auto& term : documents[j]) {
      auto [it, fresh] = term_ids.try_emplace(term, static_cast<Eigen::Index>(model.vocabulary.size()));
      if (fresh) model.vocabulary.push_back(term);
      ++counts[j][it->second];
    }
  }

  const auto terms = static_cast<Eigen::Index>(model.vocabulary.size());
  const auto docs = static_cast<Eigen::Index>(documents.size());
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> df = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(terms);
  for (const auto& doc : counts)
    for (const auto& [term, n] : doc) df[term] += Scalar(1);

  const Scalar log_scale = base == IdfBase::base10 ? Scalar(1) / std::log(Scalar(10)) : Scalar(1);
  model.idf = ((Scalar(docs) / (df.array() + Scalar(1))).log() * log_scale).matrix();

  std::vector<Eigen::Triplet<Scalar>> entries;
  for (Eigen::Index j = 0; j < docs; ++j) {
    const auto length = static_cast<Scalar>(documents[static_cast<std::size_t>(j)].size());
    for (const auto& [term, n] : counts[static_cast<std::size_t>(j)])
      entries.emplace_back(j, term, Scalar(n) / length * model.idf[term]);
  }
  model.doc_vectors.resize(docs, terms);
  model.doc_vectors.setFromTriplets(entries.begin(), entries.end());

  model.candidate_indices.resize(documents.size() - 1);
  for (std::size_t j = 0; j + 1 < documents.size(); ++j) model.candidate_indices[j] = j;
  return model;
}

/// Builds the corpus {context} ∪ candidates, candidates in the given order.
template <typename Scalar = double>
TfidfModel<Scalar> build_tfidf(std::string_view h_document, std::span<const Candidate> candidates,
                               IdfBase base = IdfBase::base10) {
  if (candidates.empty()) throw ValidationError("build_tfidf: candidate list is empty");
  std::vector<std::vector<std::string>> documents;
  documents.reserve(candidates.size() + 1);
  documents.push_back(tokenize(h_document));
  for (const auto& candidate : candidates) documents.push_back(tokenize(candidate.text));
  auto model = build_tfidf_from_tokens<Scalar>(documents, base);
  for (std::size_t j = 0; j < candidates.size(); ++j) model.candidate_indices[j] = candidates[j].index;
  return model;
}

/// Cosine of every candidate document against document 0, in document order.
template <typename Scalar>
std::vector<Scalar> coherence_similarities(const TfidfModel<Scalar>& model) {
  std::vector<Scalar> sims;
  sims.reserve(model.candidate_indices.size());
  const auto context = model.doc_vectors.row(0);
  for (Eigen::Index j = 1; j < model.doc_vectors.rows(); ++j) sims.push_back(cosine(context, model.doc_vectors.row(j)));
  return sims;
}

template <typename Scalar = double>
using RankedCandidates = std::vector<std::pair<std::size_t, Scalar>>;

/// Top-c candidates by similarity to the context document, descending,
/// ties broken by ascending candidate index. Similarities are compared on a
/// grid of 4096 machine epsilons, so values equal up to rounding tie.
template <typename Scalar>
RankedCandidates<Scalar> coherence_rank(const TfidfModel<Scalar>& model, int c) {
  const auto n = model.candidate_indices.size();
  if (c < 1 || static_cast<std::size_t>(c) > n)
    throw ValidationError("coherence_rank: c=" + std::to_string(c) + " outside [1, " + std::to_string(n) + "]");
  const auto sims = coherence_similarities(model);
  RankedCandidates<Scalar> ranked;
  ranked.reserve(n);
  for (std::size_t j = 0; j < n; ++j) ranked.emplace_back(model.candidate_indices[j], sims[j]);
  const Scalar grid = std::numeric_limits<Scalar>::epsilon() * Scalar(4096);
  const auto key = [grid](Scalar sim) { return std::llround(sim / grid); };
  const auto better = [&](const auto& a, const auto& b) {
    const auto ka = key(a.second), kb = key(b.second);
    return ka != kb ? ka > kb : a.first < b.first;
  };
  std::partial_sort(ranked.begin(), ranked.begin() + c, ranked.end(), better);
  ranked.resize(static_cast<std::size_t>(c));
  return ranked;
}

/// TF-IDF cosine between `reference` and each candidate, in a corpus of
/// {reference} ∪ candidates. Used for the good-response predicate.
std::vector<double> reference_similarities(std::string_view reference, std::span<const Candidate> candidates);

json tfidf_debug_json(const TfidfModel<double>& model);

}  // namespace simoap
