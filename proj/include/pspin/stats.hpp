#ifndef PSPIN_STATS_HPP
#define PSPIN_STATS_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace pspin {

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double compensated_mean(std::span<const double> xs);

// Mean with the standard error of the mean (sample sd / sqrt(n)). se = 0 for n < 2.
Estimate mean_se(std::span<const double> xs);

// Batch-means estimate for an autocorrelated series. Uses min(batches, n) equal batches;
// the tail that does not fill a batch is dropped from the error estimate only.
Estimate batch_means(std::span<const double> xs, int batches = 32);

// Delete-one jackknife over groups. `stat` receives a mask of included groups.
// Returns the full-sample statistic and the jackknife standard error.
Estimate jackknife(int groups, const std::function<double(const std::vector<char>&)>& stat);

// Combined standard error of a difference of independent estimates.
inline double combined_se(double a, double b) { return std::sqrt(a * a + b * b); }

}  // namespace pspin

#endif  // PSPIN_STATS_HPP
