#include "densesvm/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace densesvm::tuner {

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double expected_improvement(double mean, double variance, double best_so_far) {
    const double gain = mean - best_so_far;
    if (!(variance > 0.0)) return std::max(0.0, gain);
    const double sigma = std::sqrt(variance);
    const double z = gain / sigma;
    return std::max(0.0, gain * normal_cdf(z) + sigma * normal_pdf(z));
}

}  // namespace densesvm::tuner
