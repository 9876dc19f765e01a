#pragma once

#include <cmath>
#include <span>

#include "mirage/errors.hpp"

namespace mirage::metrics {

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

/// Mean and population standard deviation (Welford's recurrence).
inline Aggregate aggregate(std::span<const double> values) {
  if (values.empty()) {
    throw InvalidInputError("aggregate of an empty list");
  }
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t count = 0;
  for (double v : values) {
    ++count;
    const double d1 = v - mean;
    mean += d1 / static_cast<double>(count);
    m2 += d1 * (v - mean);
  }
  return {mean, std::sqrt(m2 / static_cast<double>(count))};
}

}  // namespace mirage::metrics
