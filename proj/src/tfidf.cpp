#include "simoap/tfidf.hpp"

namespace simoap {

std::vector<double> reference_similarities(std::string_view reference, std::span<const Candidate> candidates) {
  return coherence_similarities(build_tfidf<double>(reference, candidates));
}

json tfidf_debug_json(const TfidfModel<double>& model) {
  json docs = json::array();
  for (std::size_t j = 0; j < model.doc_count(); ++j) {
    const auto v = model.dense_vector(j);
    docs.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  }
  return json{{"vocabulary", model.vocabulary},
              {"idf", std::vector<double>(model.idf.data(), model.idf.data() + model.idf.size())},
              {"doc_count", model.doc_count()},
              {"candidate_indices", model.candidate_indices},
              {"doc_vectors", docs}};
}

}  // namespace simoap
