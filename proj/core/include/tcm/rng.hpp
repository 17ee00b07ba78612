#pragma once

#include <cstdint>
#include <vector>

namespace tcm {

// Counter-based splitmix64 generator. The sequence is fully determined by the
// seed and fixed 64-bit constants, so draws are identical across platforms and
// standard-library versions (std::mt19937 distributions are not portable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  // Unbiased integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal via Box-Muller (no cached spare, keeps state linear).
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<int> permutation(int n);

  // Independent child stream: child_seed = hash(parent_seed, index).
  Rng child(std::uint64_t index) const;
  Rng child(const char* label) const;

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b);
  static std::uint64_t hash_str(const char* s);

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace tcm
