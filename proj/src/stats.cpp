#include "specloop/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "specloop/error.hpp"

namespace specloop {

namespace {

std::vector<double> sorted_copy(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::domain, "statistics require finite values");
  }
  std::vector<double> out(values.begin(), values.end());
  std::sort(out.begin(), out.end());
  return out;
}

double quantile_sorted(const std::vector<double>& s, double p) {
  const double h = static_cast<double>(s.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    // Positions i..j (0-based) share ranks i+1..j+1.
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw Error(ErrorKind::domain, "quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::domain, "quantile probability outside [0, 1]");
  return quantile_sorted(sorted_copy(values), p);
}

DescriptiveStats descriptive_stats(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::domain, "descriptive statistics of an empty sample");
  auto s = sorted_copy(values);
  DescriptiveStats out;
  out.n = s.size();
  const std::size_t mid = s.size() / 2;
  out.median = s.size() % 2 == 1 ? s[mid] : (s[mid - 1] + s[mid]) / 2.0;
  out.q1 = quantile_sorted(s, 0.25);
  out.q3 = quantile_sorted(s, 0.75);
  return out;
}

std::optional<double> spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::domain, "spearman_rho needs samples of equal length");
  if (x.size() < 3) throw Error(ErrorKind::domain, "spearman_rho needs at least three pairs");
  sorted_copy(x);
  sorted_copy(y);
  auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double num = 0.0, dx = 0.0, dy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double a = rx[i] - mx;
    const double b = ry[i] - my;
    num += a * b;
    dx += a * a;
    dy += b * b;
  }
  if (dx == 0.0 || dy == 0.0) return std::nullopt;
  const double rho = num / std::sqrt(dx * dy);
  return std::clamp(rho, -1.0, 1.0);
}

}  // namespace specloop
