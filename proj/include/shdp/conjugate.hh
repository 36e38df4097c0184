// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <span>

#include "shdp/random.hh"

namespace shdp {

struct GaussianParams {
  double mean = 0.0;
  double variance = 1.0;
};

// xi | sigma2 ~ N(mu0, sigma2 / tau), sigma2 ~ InvGamma(a, b) with b a rate.
struct NormalInverseGammaParams {
  double mu0 = 0.0;
  double tau = 1.0;
  double a = 2.0;
  double b = 4.0;
};

struct DishAtom {
  double xi = 0.0;
  double sigma2 = 1.0;
};

double normal_logpdf(double x, const GaussianParams& p);
inline double normal_logpdf(double x, double mean, double variance) {
  return normal_logpdf(x, GaussianParams{mean, variance});
}

// Sufficient statistics of a batch of observations.
struct GaussianStats {
  int n = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double x) {
    ++n;
    sum += x;
    sum_sq += x * x;
  }
  void remove(double x) {
    --n;
    sum -= x;
    sum_sq -= x * x;
  }
  static GaussianStats of(std::span<const double> xs);
};

NormalInverseGammaParams nig_update(const NormalInverseGammaParams& prior,
                                    std::span<const double> obs);
NormalInverseGammaParams nig_update(const NormalInverseGammaParams& prior,
                                    const GaussianStats& stats);

double nig_marginal_loglik(const NormalInverseGammaParams& prior, std::span<const double> obs);
double nig_marginal_loglik(const NormalInverseGammaParams& prior, const GaussianStats& stats);

// Log predictive density of one new observation (Student-t).
double nig_predictive_logpdf(const NormalInverseGammaParams& post, double x);

// Student-t predictive of one observation, with constants precomputed.
class NigPredictive {
 public:
  explicit NigPredictive(const NormalInverseGammaParams& p);
  double logpdf(double x) const;

 private:
  double mu0_;
  double scale2_;
  double nu_;
  double log_norm_;
};

DishAtom sample_nig(const NormalInverseGammaParams& p, Rng& rng);

// Sum over a dish's observations of log N(x; xi, sigma2), from sufficient statistics.
double gaussian_loglik(const GaussianStats& stats, const DishAtom& atom);

GaussianParams normal_location_posterior(const GaussianParams& prior,
                                         std::span<const double> z,
                                         std::span<const double> sigmas2);

double normal_location_marginal_loglik(const GaussianParams& prior,
                                       std::span<const double> z,
                                       std::span<const double> sigmas2);

}  // namespace shdp
