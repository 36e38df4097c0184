// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shdp/conjugate.hh"
#include "shdp/data.hh"
#include "shdp/franchise.hh"
#include "shdp/partitions.hh"
#include "shdp/random.hh"

namespace shdp {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PriorMode { restricted, dp, uniform };
// sequential: forward scan over populations using the predictive tie weights.
// exact: draws the whole label vector from its collapsed full conditional.
enum class ThetaUpdate { sequential, exact };

std::string to_string(PriorMode mode);
std::string to_string(ThetaUpdate update);
PriorMode parse_prior_mode(const std::string& text);
ThetaUpdate parse_theta_update(const std::string& text);

struct GammaPrior {
  double shape = 3.0;
  double rate = 3.0;
  double mean() const { return shape / rate; }
};

struct ModelConfig {
  PriorMode prior_mode = PriorMode::restricted;
  ThetaUpdate theta_update = ThetaUpdate::sequential;
  GaussianParams location_prior{0.0, 1.0};
  NormalInverseGammaParams base{0.0, 1.0, 2.0, 4.0};
  // Optional per-response overrides; empty means the shared values apply.
  std::vector<GaussianParams> location_prior_by_response;
  std::vector<NormalInverseGammaParams> base_by_response;
  GammaPrior omega_prior;
  GammaPrior gamma_prior;
  GammaPrior alpha_prior;
  bool standardize = true;
  // Share one gamma across the restaurants of a response.
  bool tie_gamma = false;

  const GaussianParams& location_for(int m) const;
  const NormalInverseGammaParams& base_for(int m) const;
  void validate() const;
};

struct MCMCOptions {
  long iterations = 10000;
  long burn_in = 5000;
  long thin = 1;
  std::uint64_t seed = 1;
  int chain = 0;
  long audit_interval = 100;
  int omega_pool_size = 1000;
  long checkpoint_interval = 1000;
  // Update the responses of one sweep on separate threads.
  bool parallel_responses = false;

  void validate() const;
};

struct ResponseState {
  SetPartition partition;
  // One location per block of partition.
  std::vector<double> theta_star;
  FranchiseState franchise;
  Rng rng;

  double theta(int j) const { return theta_star.at(partition.label(j)); }
};

struct ChainState {
  std::vector<ResponseState> responses;
  double omega = 1.0;
  Rng omega_rng;
  long iteration = 0;
};

ChainState init_state(const Dataset& data, const ModelConfig& config, std::uint64_t seed,
                      int chain = 0);

// Sufficient statistics of one population's residuals z with variances s2.
struct LocationStats {
  double precision = 0.0;  // sum 1/s2
  double weighted = 0.0;   // sum z/s2
  double constant = 0.0;   // sum of log N(z; 0, s2)

  static LocationStats of(std::span<const double> z, std::span<const double> s2);
  LocationStats& operator+=(const LocationStats& o);
  double loglik(double theta) const;
  double marginal_loglik(const GaussianParams& prior) const;
  GaussianParams posterior(const GaussianParams& prior) const;
};

struct ThetaState {
  SetPartition partition;
  std::vector<double> theta_star;

  double theta(int j) const { return theta_star.at(partition.label(j)); }
};

// Probability that population j (0-based, j >= 1) ties with j-1 under the
// forward predictive of the prior, given the labels of populations 0..j-1.
double forward_tie_probability(PriorMode mode, double omega, int num_populations, int j,
                               const SetPartition& prefix);

void sample_theta_labels(ThetaState& state, const std::vector<LocationStats>& stats,
                         double omega, const GaussianParams& prior, PriorMode mode,
                         ThetaUpdate update, Rng& rng);

// log of omega^(sum T - M) / Z_J(omega)^M.
double omega_sir_log_weight(double omega, const std::vector<int>& blocks, int num_populations);
double sample_omega_sir(const std::vector<int>& blocks, int num_populations,
                        const GammaPrior& prior, int pool_size, double current, Rng& rng);
double sample_omega_escobar_west(const std::vector<int>& blocks, int num_populations,
                                 double omega, const GammaPrior& prior, Rng& rng);

// Single-DP auxiliary-variable update given k clusters among n items.
double sample_dp_concentration(double current, int k, int n, const GammaPrior& prior, Rng& rng);
// Shared concentration across groups with tables[j] clusters among sizes[j] items.
double sample_tied_concentration(double current, const std::vector<int>& tables,
                                 const std::vector<int>& sizes, const GammaPrior& prior,
                                 Rng& rng);

void sample_concentrations(FranchiseState& franchise, const ModelConfig& config, Rng& rng);

// Residuals x - theta_j used by the franchise update.
Residuals franchise_residuals(const ResponseState& r, const std::vector<std::vector<double>>& x);

std::vector<LocationStats> location_stats(const ResponseState& r,
                                          const std::vector<std::vector<double>>& x);

void sweep(ChainState& state, const Dataset& data, const ModelConfig& config,
           const MCMCOptions& options);

// Throws std::logic_error when a structural invariant fails.
void audit_state(const ChainState& state, const Dataset& data, const ModelConfig& config);

struct ChainCallbacks {
  std::function<void(const ChainState&)> on_sample;
  std::function<void(const ChainState&)> on_checkpoint;
};

// Advances state from its current iteration up to options.iterations,
// emitting every thin-th post burn-in state.
void run_chain(ChainState& state, const Dataset& data, const ModelConfig& config,
               const MCMCOptions& options, const ChainCallbacks& callbacks);

}  // namespace shdp
