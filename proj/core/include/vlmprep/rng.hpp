#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace vlmprep {

// splitmix64 finalizer. Used to spread a base seed into independent stream
// seeds so that adding or reordering consumers of one stream cannot shift
// the draws seen by another.
std::uint64_t mix_bits(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Bounded draws on top of std::mt19937_64. The engine's output sequence is
// pinned by the C++ standard, and the rejection loop below avoids modulo
// bias, so every draw is reproducible across platforms and compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, bound). bound must be nonzero.
  std::uint64_t next_below(std::uint64_t bound);

  bool next_bool() { return next_below(2) == 1; }

 private:
  std::mt19937_64 engine_;
};

// Fisher-Yates. Equivalent inputs and seed give byte-identical order.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(items[i - 1], items[j]);
  }
}

// k distinct indices drawn uniformly from [0, n), returned ascending so the
// sampled subsequence keeps its original relative order. Floyd's algorithm:
// exactly k draws regardless of n. Throws std::invalid_argument if k > n.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng);

}  // namespace vlmprep
