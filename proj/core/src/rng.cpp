#include "vlmprep/rng.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace vlmprep {

std::uint64_t mix_bits(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix_bits(base + mix_bits(stream));
}

std::uint64_t Rng::next_below(std::uint64_t bound) {
  if (bound == 0) {
    throw std::invalid_argument("Rng::next_below: bound must be nonzero");
  }
  // Reject draws from the incomplete trailing interval instead of taking a
  // biased modulo. The loop terminates with probability 1 and in practice
  // almost never iterates twice.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t draw = engine_();
  while (draw >= limit) {
    draw = engine_();
  }
  return draw % bound;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng) {
  if (k > n) {
    throw std::invalid_argument("sample_indices: k exceeds population size");
  }
  std::unordered_set<std::size_t> chosen;
  chosen.reserve(k);
  for (std::size_t j = n - k; j < n; ++j) {
    std::size_t pick = static_cast<std::size_t>(rng.next_below(j + 1));
    // Floyd: if pick was already taken in an earlier round, take j itself.
    if (!chosen.insert(pick).second) {
      chosen.insert(j);
    }
  }
  std::vector<std::size_t> out(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace vlmprep
