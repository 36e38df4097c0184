// Apache License, Version 2.0, refer to LICENSE.txt

#include "shdp/conjugate.hh"

#include <cmath>
#include <stdexcept>

#include "shdp/numeric.hh"

namespace shdp {

double normal_logpdf(double x, const GaussianParams& p) {
  const double d = x - p.mean;
  return -kLogSqrt2Pi - 0.5 * std::log(p.variance) - 0.5 * d * d / p.variance;
}

GaussianStats GaussianStats::of(std::span<const double> xs) {
  GaussianStats s;
  for (double x : xs) s.add(x);
  return s;
}

NormalInverseGammaParams nig_update(const NormalInverseGammaParams& prior,
                                    const GaussianStats& stats) {
  if (stats.n == 0) return prior;
  const double n = stats.n;
  const double mean = stats.sum / n;
  // Centered sum of squares, clamped against cancellation.
  const double ss = std::max(0.0, stats.sum_sq - n * mean * mean);
  NormalInverseGammaParams post;
  post.tau = prior.tau + n;
  post.mu0 = (prior.tau * prior.mu0 + stats.sum) / post.tau;
  post.a = prior.a + 0.5 * n;
  const double d = mean - prior.mu0;
  post.b = prior.b + 0.5 * ss + 0.5 * prior.tau * n * d * d / post.tau;
  return post;
}

NormalInverseGammaParams nig_update(const NormalInverseGammaParams& prior,
                                    std::span<const double> obs) {
  return nig_update(prior, GaussianStats::of(obs));
}

double nig_marginal_loglik(const NormalInverseGammaParams& prior, const GaussianStats& stats) {
  if (stats.n == 0) return 0.0;
  const auto post = nig_update(prior, stats);
  return std::lgamma(post.a) - std::lgamma(prior.a) + prior.a * std::log(prior.b) -
         post.a * std::log(post.b) + 0.5 * std::log(prior.tau / post.tau) -
         stats.n * kLogSqrt2Pi;
}

double nig_marginal_loglik(const NormalInverseGammaParams& prior, std::span<const double> obs) {
  return nig_marginal_loglik(prior, GaussianStats::of(obs));
}

double nig_predictive_logpdf(const NormalInverseGammaParams& post, double x) {
  GaussianStats s;
  s.add(x);
  return nig_marginal_loglik(post, s);
}

NigPredictive::NigPredictive(const NormalInverseGammaParams& p)
    : mu0_(p.mu0), scale2_(p.b * (p.tau + 1.0) / (p.a * p.tau)), nu_(2.0 * p.a) {
  log_norm_ = std::lgamma(p.a + 0.5) - std::lgamma(p.a) - 0.5 * std::log(nu_ * M_PI * scale2_);
}

double NigPredictive::logpdf(double x) const {
  const double d = x - mu0_;
  return log_norm_ - 0.5 * (nu_ + 1.0) * std::log1p(d * d / (nu_ * scale2_));
}

DishAtom sample_nig(const NormalInverseGammaParams& p, Rng& rng) {
  DishAtom atom;
  atom.sigma2 = 1.0 / sample_gamma(rng, p.a, p.b);
  atom.xi = sample_normal(rng, p.mu0, std::sqrt(atom.sigma2 / p.tau));
  return atom;
}

double gaussian_loglik(const GaussianStats& stats, const DishAtom& atom) {
  if (stats.n == 0) return 0.0;
  const double sq = stats.sum_sq - 2.0 * atom.xi * stats.sum + stats.n * atom.xi * atom.xi;
  return -stats.n * (kLogSqrt2Pi + 0.5 * std::log(atom.sigma2)) - 0.5 * sq / atom.sigma2;
}

namespace {

void check_lengths(std::span<const double> z, std::span<const double> sigmas2) {
  if (z.size() != sigmas2.size()) {
    throw std::invalid_argument("normal location: z and sigmas2 lengths differ");
  }
}

}  // namespace

GaussianParams normal_location_posterior(const GaussianParams& prior,
                                         std::span<const double> z,
                                         std::span<const double> sigmas2) {
  check_lengths(z, sigmas2);
  double precision = 1.0 / prior.variance;
  double weighted = prior.mean / prior.variance;
  for (std::size_t i = 0; i < z.size(); ++i) {
    precision += 1.0 / sigmas2[i];
    weighted += z[i] / sigmas2[i];
  }
  return GaussianParams{weighted / precision, 1.0 / precision};
}

double normal_location_marginal_loglik(const GaussianParams& prior,
                                       std::span<const double> z,
                                       std::span<const double> sigmas2) {
  check_lengths(z, sigmas2);
  if (z.empty()) return 0.0;
  // p(z) = p(z | t) p(t) / p(t | z), evaluated at t = posterior mean.
  const auto post = normal_location_posterior(prior, z, sigmas2);
  const double t = post.mean;
  double acc = normal_logpdf(t, prior) - normal_logpdf(t, post);
  for (std::size_t i = 0; i < z.size(); ++i) acc += normal_logpdf(z[i], t, sigmas2[i]);
  return acc;
}

}  // namespace shdp
