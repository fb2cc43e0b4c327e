#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "simoap/core.hpp"

namespace fixtures {

/// Persona-chat flavored instances drawn from the mock bigram vocabulary so
/// that coherence and entailment scores are informative.
inline std::vector<simoap::DialogueInstance> mock_dataset(int n, unsigned seed = 1) {
  static const std::vector<std::string> persona_pool = {
      "i love to play the piano", "my dog is great",        "i work at a hospital", "i like to cook pizza",
      "we live in the city",      "i enjoy music and dance", "i have two kids",      "i read books at school",
      "i also like to swim",      "i really enjoy travel"};
  static const std::vector<std::string> history_pool = {
      "hello what do you do", "i like music", "do you have a dog", "what about you", "that is so fun",
      "i work at school",     "do you cook",  "we travel a lot",   "i play guitar",  "you like books"};
  std::mt19937 rng(seed);
  std::vector<simoap::DialogueInstance> out;
  for (int i = 0; i < n; ++i) {
    simoap::DialogueInstance d;
    d.id = "mock-" + std::to_string(i);
    for (int p = 0; p < 3; ++p) d.persona.push_back(persona_pool[rng() % persona_pool.size()]);
    const int turns = 1 + static_cast<int>(rng() % 4);
    for (int h = 0; h < turns; ++h) d.history.push_back(history_pool[rng() % history_pool.size()]);
    d.gold = history_pool[rng() % history_pool.size()];
    out.push_back(d);
  }
  return out;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("simoap-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
