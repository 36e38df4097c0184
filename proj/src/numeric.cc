// Apache License, Version 2.0, refer to LICENSE.txt

#include "shdp/numeric.hh"

#include <algorithm>
#include <stdexcept>

namespace shdp {

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return kNegInf;
  const double hi = *std::max_element(values.begin(), values.end());
  if (hi == kNegInf) return kNegInf;
  if (std::isinf(hi)) return hi;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

std::vector<double> normalize_log_weights(std::span<const double> log_weights) {
  std::vector<double> probs(log_weights.size(), 0.0);
  const double total = log_sum_exp(log_weights);
  if (!std::isfinite(total)) return probs;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    probs[i] = std::exp(log_weights[i] - total);
  }
  return probs;
}

double log_rising_factorial(double x, int n) {
  if (n < 0) throw std::domain_error("log_rising_factorial: negative n");
  if (n == 0) return 0.0;
  // Direct summation is exact enough and faster for the small n that dominate.
  if (n <= 16) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += std::log(x + i);
    return acc;
  }
  return std::lgamma(x + n) - std::lgamma(x);
}

double log_factorial(int n) {
  if (n < 0) throw std::domain_error("log_factorial: negative n");
  return std::lgamma(n + 1.0);
}

double log_binomial(int n, int k) {
  if (k < 0 || k > n) return kNegInf;
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

}  // namespace shdp
