#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mirage/errors.hpp"
#include "mirage/support/random.hpp"

namespace mirage::dataset {

struct ImagePairSample {
  std::string source;
  std::string target;

  bool operator==(const ImagePairSample&) const = default;
};

/// Draw k (source, target) pairs from an image pool, seeded and
/// deterministic. Within a pair the two slots are drawn uniformly without
/// replacement, so source != target always; images may recur across pairs.
inline std::vector<ImagePairSample> sample_pairs(std::span<const std::string> pool,
                                                 int k, std::uint64_t seed) {
  if (k < 0) throw InvalidInputError("pair count must be non-negative");
  if (k > 0 && pool.size() < 2) {
    throw InvalidInputError("pair sampling needs at least 2 pool images, got " +
                            std::to_string(pool.size()));
  }
  std::mt19937_64 rng(seed);
  std::vector<ImagePairSample> pairs;
  pairs.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const auto n = pool.size();
    const auto src = support::bounded(rng, n);
    auto tgt = support::bounded(rng, n - 1);
    if (tgt >= src) ++tgt;  // uniform over the n-1 images != src
    pairs.push_back({pool[src], pool[tgt]});
  }
  return pairs;
}

}  // namespace mirage::dataset
