// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "shdp/conjugate.hh"
#include "shdp/partitions.hh"

namespace shdp {

struct CheckResult {
  std::string name;
  double statistic = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::string detail;
};

nlohmann::json to_json(const CheckResult& r);

struct ValidationOptions {
  std::uint64_t seed = 20240611;
  long crf_replicates = 200000;
  int quadrature_datasets = 50;
  long prior_sweeps = 100000;
  long omega_draws = 100000;
  // Deliberately corrupts one reference value so the suite must fail.
  bool inject_fault = false;
};

ValidationOptions quick_validation();

// Restricted normalizer, sequential tie weights, EPPF normalization.
std::vector<CheckResult> check_prior_identities(const ValidationOptions& opt);
// Generative franchise frequencies against the exact partition law.
std::vector<CheckResult> check_peppf(const ValidationOptions& opt);
// Closed-form marginals against numerical quadrature.
std::vector<CheckResult> check_conjugacy(const ValidationOptions& opt);
// Location-label updates under a flat likelihood against the priors.
std::vector<CheckResult> check_prior_only_gibbs(const ValidationOptions& opt);
// Concentration updates for omega.
std::vector<CheckResult> check_omega_samplers(const ValidationOptions& opt);

std::vector<CheckResult> run_validation(const ValidationOptions& opt);

// Oracles shared with the tests. The two marginals are densities, not logs.
double nig_marginal_quadrature(const NormalInverseGammaParams& prior,
                               const std::vector<double>& obs);
double normal_location_marginal_quadrature(const GaussianParams& prior,
                                           const std::vector<double>& z,
                                           const std::vector<double>& sigmas2);

// Kolmogorov-Smirnov distance of draws from a density on (0, inf), the CDF
// being obtained by adaptive quadrature of the unnormalized log density.
double ks_distance_positive(std::vector<double> draws,
                            const std::function<double(double)>& log_density);

// Batch-means standard error of the mean of a 0/1 or real series.
double batch_means_se(const std::vector<double>& series, int batches = 50);

}  // namespace shdp
