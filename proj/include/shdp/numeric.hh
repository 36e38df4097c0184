// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace shdp {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLog2 = 0.69314718055994530942;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// log(exp(a) + exp(b)) without overflow.
inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

double log_sum_exp(std::span<const double> values);

// Normalizes log-weights in place to probabilities, subtracting the max first.
std::vector<double> normalize_log_weights(std::span<const double> log_weights);

// log of the rising factorial (x)_n = Gamma(x + n) / Gamma(x).
double log_rising_factorial(double x, int n);

double log_factorial(int n);

double log_binomial(int n, int k);

}  // namespace shdp
