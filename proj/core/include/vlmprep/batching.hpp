#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vlmprep/mixture.hpp"

namespace vlmprep::batching {

struct Batch {
  mixture::Modality modality = mixture::Modality::visual;
  std::vector<std::string> ids;
  bool operator==(const Batch&) const = default;
};

// Modality-homogeneous training batches. Concatenated batch ids form a
// permutation of the mixture ids; every batch is non-empty, at most
// batch_size long, and single-modality, with at most one short batch per
// modality.
struct BatchPlan {
  int batch_size = 0;
  std::uint64_t seed = 0;
  std::vector<Batch> batches;
  bool operator==(const BatchPlan&) const = default;
};

// Shuffles each modality's ids, cuts them into consecutive batch_size
// chunks (the last chunk may be short), then interleaves the two chunk
// lists by seeded draws weighted by how many batches each modality still
// has. One generator drives all draws, so the plan is a pure function of
// (mixture order, batch_size, seed). Throws on an empty mixture.
BatchPlan plan_batches(std::span<const mixture::Conversation> mixture,
                       int batch_size, std::uint64_t seed);

}  // namespace vlmprep::batching
