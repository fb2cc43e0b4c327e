#pragma once

#include <cstdint>
#include <string_view>

namespace simoap {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: draw n is a pure function of (key, n), so a
/// stream can be replayed or split across workers without shared state.
class CounterRng {
 public:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  explicit constexpr CounterRng(std::uint64_t key) : key_(key) {}

  constexpr std::uint64_t at(std::uint64_t counter) const { return mix64(key_ + (counter + 1) * kGamma); }
  constexpr std::uint64_t next() { return at(counter_++); }

  // Uniform double in [0, 1) from the top 53 bits.
  constexpr double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  constexpr std::uint64_t key() const { return key_; }
  constexpr std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Stream seed for candidate `index` of instance `instance_id`.
constexpr std::uint64_t hash64(std::uint64_t master_seed, std::string_view instance_id, std::uint64_t index) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a offset basis
  for (unsigned char ch : instance_id) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return mix64(mix64(master_seed ^ mix64(h)) + mix64(index + CounterRng::kGamma));
}

}  // namespace simoap
