#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mobcast/trajectory.hpp"

namespace mobcast {

// Explore/return generator. Each user's first stay explores; afterwards a
// stay returns with probability return_prob to a known place drawn in
// proportion to past visits, and otherwise explores a place it has never
// visited, drawn uniformly from the pool. Once the pool is exhausted every
// stay returns.
struct SynthOptions {
  std::size_t users = 50;
  std::size_t days = 30;
  std::size_t locations = 500;
  std::uint64_t seed = 0;
  double return_prob = 0.6;
  std::size_t stays_per_day = 4;  // at distinct hours in [6, 23)
  UtcOffset offset{0};
};

struct SyntheticDataset {
  std::vector<CheckinRecord> records;  // user order, then time order
  std::vector<bool> returned;          // parallel to records
};

// Throws std::invalid_argument on zero sizes, stays_per_day > 17 or a
// return_prob outside [0, 1].
SyntheticDataset generate_synthetic(const SynthOptions& options);

Poi synthetic_poi(std::size_t index);

}  // namespace mobcast
