#pragma once

#include <cstddef>
#include <optional>
#include <span>

namespace specloop {

struct DescriptiveStats {
  std::size_t n = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr() const { return q3 - q1; }
};

/// Quantile by linear interpolation between order statistics at
/// h = (n - 1) p (the "type 7" rule). Throws Error{domain} for empty input
/// or p outside [0, 1].
double quantile(std::span<const double> values, double p);

/// Median (midpoint of the two central values for even n) and quartiles.
/// Throws Error{domain} for empty input.
DescriptiveStats descriptive_stats(std::span<const double> values);

/// Spearman rank correlation with average ranks for ties. nullopt when
/// either variable has zero rank variance; Error{domain} when the lengths
/// differ or fewer than three pairs are given.
std::optional<double> spearman_rho(std::span<const double> x, std::span<const double> y);

}  // namespace specloop
