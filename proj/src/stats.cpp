#include "pspin/stats.hpp"

#include <algorithm>

namespace pspin {

double compensated_mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value() / static_cast<double>(xs.size());
}

Estimate mean_se(std::span<const double> xs) {
  Estimate e;
  const auto n = xs.size();
  if (n == 0) return e;
  e.value = compensated_mean(xs);
  if (n < 2) return e;
  CompensatedSum ss;
  for (double x : xs) ss.add((x - e.value) * (x - e.value));
  e.se = std::sqrt(ss.value() / static_cast<double>(n - 1) / static_cast<double>(n));
  return e;
}

Estimate batch_means(std::span<const double> xs, int batches) {
  Estimate e;
  const auto n = static_cast<std::ptrdiff_t>(xs.size());
  if (n == 0) return e;
  e.value = compensated_mean(xs);
  const std::ptrdiff_t b = std::min<std::ptrdiff_t>(batches, n);
  if (b < 2) return e;
  const std::ptrdiff_t len = n / b;
  std::vector<double> means(static_cast<std::size_t>(b));
  for (std::ptrdiff_t k = 0; k < b; ++k)
    means[static_cast<std::size_t>(k)] = compensated_mean(xs.subspan(static_cast<std::size_t>(k * len), static_cast<std::size_t>(len)));
  e.se = mean_se(means).se;
  return e;
}

Estimate jackknife(int groups, const std::function<double(const std::vector<char>&)>& stat) {
  Estimate e;
  std::vector<char> mask(static_cast<std::size_t>(groups), 1);
  e.value = stat(mask);
  if (groups < 2) return e;
  std::vector<double> leave(static_cast<std::size_t>(groups));
  for (int g = 0; g < groups; ++g) {
    mask[static_cast<std::size_t>(g)] = 0;
    leave[static_cast<std::size_t>(g)] = stat(mask);
    mask[static_cast<std::size_t>(g)] = 1;
  }
  const double mean = compensated_mean(leave);
  CompensatedSum ss;
  for (double v : leave) ss.add((v - mean) * (v - mean));
  e.se = std::sqrt(static_cast<double>(groups - 1) / groups * ss.value());
  return e;
}

}  // namespace pspin
