// Apache License, Version 2.0, refer to LICENSE.txt

#include "shdp/random.hh"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "shdp/numeric.hh"

namespace shdp {

Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(substream), 0x5d1bu};
  return Rng(seq);
}

double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

double sample_normal(Rng& rng, double mean, double sd) {
  return std::normal_distribution<double>(mean, sd)(rng);
}

double sample_gamma(Rng& rng, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw std::domain_error("sample_gamma: shape and rate must be positive");
  }
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

double sample_beta(Rng& rng, double a, double b) {
  const double x = sample_gamma(rng, a, 1.0);
  const double y = sample_gamma(rng, b, 1.0);
  const double s = x + y;
  if (s <= 0.0) return a >= b ? 1.0 : 0.0;
  return x / s;
}

bool sample_bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

int sample_log_categorical(Rng& rng, std::span<const double> log_weights) {
  if (log_weights.empty()) throw std::invalid_argument("sample_log_categorical: no options");
  const double hi = *std::max_element(log_weights.begin(), log_weights.end());
  if (!std::isfinite(hi)) {
    throw std::domain_error("sample_log_categorical: no finite weight");
  }
  double total = 0.0;
  for (double lw : log_weights) total += std::exp(lw - hi);
  double u = uniform01(rng) * total;
  int last_positive = -1;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    const double w = std::exp(log_weights[k] - hi);
    if (w > 0.0) last_positive = static_cast<int>(k);
    if (u < w) return static_cast<int>(k);
    u -= w;
  }
  return last_positive;
}

int sample_categorical(Rng& rng, std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::domain_error("sample_categorical: weights sum to zero");
  double u = uniform01(rng) * total;
  int last_positive = -1;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] > 0.0) last_positive = static_cast<int>(k);
    if (u < weights[k]) return static_cast<int>(k);
    u -= weights[k];
  }
  return last_positive;
}

std::string rng_to_string(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

Rng rng_from_string(const std::string& text) {
  Rng rng;
  std::istringstream in(text);
  in >> rng;
  if (!in) throw std::runtime_error("rng_from_string: malformed engine state");
  return rng;
}

}  // namespace shdp
