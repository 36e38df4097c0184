// Apache License, Version 2.0, refer to LICENSE.txt

#include "shdp/sampler.hh"

#include <cmath>
#include <future>
#include <map>
#include <string>

#include <spdlog/spdlog.h>

#include "shdp/numeric.hh"

namespace shdp {

std::string to_string(PriorMode mode) {
  switch (mode) {
    case PriorMode::restricted: return "restricted";
    case PriorMode::dp: return "dp";
    case PriorMode::uniform: return "uniform";
  }
  return "?";
}

std::string to_string(ThetaUpdate update) {
  return update == ThetaUpdate::sequential ? "sequential" : "exact";
}

PriorMode parse_prior_mode(const std::string& text) {
  if (text == "restricted") return PriorMode::restricted;
  if (text == "dp") return PriorMode::dp;
  if (text == "uniform") return PriorMode::uniform;
  throw std::invalid_argument("unknown prior mode '" + text + "'");
}

ThetaUpdate parse_theta_update(const std::string& text) {
  if (text == "sequential") return ThetaUpdate::sequential;
  if (text == "exact") return ThetaUpdate::exact;
  throw std::invalid_argument("unknown theta update '" + text + "'");
}

const GaussianParams& ModelConfig::location_for(int m) const {
  if (location_prior_by_response.empty()) return location_prior;
  return location_prior_by_response.at(m);
}

const NormalInverseGammaParams& ModelConfig::base_for(int m) const {
  if (base_by_response.empty()) return base;
  return base_by_response.at(m);
}

namespace {

void check_gamma_prior(const GammaPrior& p, const char* name) {
  if (!(p.shape > 0.0) || !(p.rate > 0.0)) {
    throw std::invalid_argument(std::string(name) + " prior needs positive shape and rate");
  }
}

void check_location(const GaussianParams& g) {
  if (!(g.variance > 0.0) || !std::isfinite(g.mean)) {
    throw std::invalid_argument("location prior needs a positive variance");
  }
}

void check_base(const NormalInverseGammaParams& p) {
  if (!(p.tau > 0.0) || !(p.a > 0.0) || !(p.b > 0.0) || !std::isfinite(p.mu0)) {
    throw std::invalid_argument("base measure needs positive tau, a and b");
  }
}

}  // namespace

void ModelConfig::validate() const {
  check_gamma_prior(omega_prior, "omega");
  check_gamma_prior(gamma_prior, "gamma");
  check_gamma_prior(alpha_prior, "alpha");
  check_location(location_prior);
  check_base(base);
  for (const auto& g : location_prior_by_response) check_location(g);
  for (const auto& b : base_by_response) check_base(b);
}

void MCMCOptions::validate() const {
  if (iterations < 1) throw std::invalid_argument("iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) {
    throw std::invalid_argument("burn-in must be non-negative and below the iteration count");
  }
  if (thin < 1) throw std::invalid_argument("thin must be at least 1");
  if (omega_pool_size < 1) throw std::invalid_argument("omega pool size must be positive");
}

LocationStats LocationStats::of(std::span<const double> z, std::span<const double> s2) {
  if (z.size() != s2.size()) throw std::invalid_argument("LocationStats: length mismatch");
  LocationStats s;
  for (std::size_t i = 0; i < z.size(); ++i) {
    s.precision += 1.0 / s2[i];
    s.weighted += z[i] / s2[i];
    s.constant += normal_logpdf(z[i], 0.0, s2[i]);
  }
  return s;
}

LocationStats& LocationStats::operator+=(const LocationStats& o) {
  precision += o.precision;
  weighted += o.weighted;
  constant += o.constant;
  return *this;
}

double LocationStats::loglik(double theta) const {
  return constant + theta * weighted - 0.5 * theta * theta * precision;
}

double LocationStats::marginal_loglik(const GaussianParams& prior) const {
  const double pn = precision + 1.0 / prior.variance;
  const double mn = (weighted + prior.mean / prior.variance) / pn;
  return constant - 0.5 * std::log(prior.variance * pn) -
         0.5 * prior.mean * prior.mean / prior.variance + 0.5 * mn * mn * pn;
}

GaussianParams LocationStats::posterior(const GaussianParams& prior) const {
  const double pn = precision + 1.0 / prior.variance;
  return GaussianParams{(weighted + prior.mean / prior.variance) / pn, 1.0 / pn};
}

namespace {

double draw_location(const LocationStats& s, const GaussianParams& prior, Rng& rng) {
  const auto post = s.posterior(prior);
  return sample_normal(rng, post.mean, std::sqrt(post.variance));
}

void draw_block_locations(ThetaState& state, const std::vector<LocationStats>& stats,
                          const GaussianParams& prior, Rng& rng) {
  std::vector<LocationStats> pooled(state.partition.num_blocks());
  for (int j = 0; j < state.partition.size(); ++j) pooled[state.partition.label(j)] += stats[j];
  state.theta_star.assign(pooled.size(), 0.0);
  for (std::size_t b = 0; b < pooled.size(); ++b) {
    state.theta_star[b] = draw_location(pooled[b], prior, rng);
  }
}

double log_partition_prior(PriorMode mode, double omega, const SetPartition& p) {
  switch (mode) {
    case PriorMode::restricted: return std::log(restricted_weight(omega, p));
    case PriorMode::uniform: return is_order_consistent(p) ? 0.0 : kNegInf;
    case PriorMode::dp: return dp_eppf_log(omega, p);
  }
  return kNegInf;
}

void sample_labels_exact(ThetaState& state, const std::vector<LocationStats>& stats,
                         double omega, const GaussianParams& prior, PriorMode mode,
                         Rng& rng) {
  const int J = static_cast<int>(stats.size());
  const auto candidates = mode == PriorMode::dp ? enumerate_set_partitions(J)
                                                : enumerate_contiguous_partitions(J);
  std::vector<double> lw;
  lw.reserve(candidates.size());
  for (const auto& p : candidates) {
    double score = log_partition_prior(mode, omega, p);
    std::vector<LocationStats> pooled(p.num_blocks());
    for (int j = 0; j < J; ++j) pooled[p.label(j)] += stats[j];
    for (const auto& s : pooled) score += s.marginal_loglik(prior);
    lw.push_back(score);
  }
  state.partition = candidates[sample_log_categorical(rng, lw)];
}

void sample_labels_forward(ThetaState& state, const std::vector<LocationStats>& stats,
                           double omega, const GaussianParams& prior, PriorMode mode,
                           Rng& rng) {
  const int J = static_cast<int>(stats.size());
  std::vector<int> labels(J, 0);
  double previous = state.theta(0);
  for (int j = 1; j < J; ++j) {
    const SetPartition prefix(std::span<const int>(labels.data(), j));
    const double a = forward_tie_probability(mode, omega, J, j, prefix);
    const double lw[2] = {std::log(a) + stats[j].loglik(previous),
                          std::log1p(-a) + stats[j].marginal_loglik(prior)};
    if (sample_log_categorical(rng, lw) == 0) {
      labels[j] = labels[j - 1];
    } else {
      labels[j] = labels[j - 1] + 1;
      previous = draw_location(stats[j], prior, rng);
    }
  }
  state.partition = SetPartition(labels);
}

// Conditional reseating of one population at a time under the Chinese
// restaurant process, with locations of existing blocks held fixed.
void sample_labels_crp(ThetaState& state, const std::vector<LocationStats>& stats, double omega,
                       const GaussianParams& prior, Rng& rng) {
  const int J = static_cast<int>(stats.size());
  std::vector<int> labels = state.partition.labels();
  std::vector<double> values = state.theta_star;
  std::vector<int> counts(values.size(), 0);
  for (int l : labels) ++counts[l];
  std::vector<double> lw;
  for (int j = 0; j < J; ++j) {
    const int b = labels[j];
    if (--counts[b] == 0) {
      values.erase(values.begin() + b);
      counts.erase(counts.begin() + b);
      for (int& l : labels) {
        if (l > b) --l;
      }
    }
    lw.clear();
    for (std::size_t k = 0; k < values.size(); ++k) {
      lw.push_back(std::log(static_cast<double>(counts[k])) + stats[j].loglik(values[k]));
    }
    lw.push_back(std::log(omega) + stats[j].marginal_loglik(prior));
    const int k = sample_log_categorical(rng, lw);
    if (k == static_cast<int>(values.size())) {
      values.push_back(draw_location(stats[j], prior, rng));
      counts.push_back(0);
    }
    labels[j] = k;
    ++counts[k];
  }
  state.partition = SetPartition(labels);
}

}  // namespace

double forward_tie_probability(PriorMode mode, double omega, int num_populations, int j,
                               const SetPartition& prefix) {
  switch (mode) {
    case PriorMode::uniform: return 0.5;
    case PriorMode::restricted:
      if (num_populations == 4) return theta_tie_weight(omega, j + 1, prefix);
      return tie_weight_enumerated(omega, num_populations, j + 1, prefix);
    case PriorMode::dp: break;
  }
  throw std::invalid_argument("forward_tie_probability: not defined for the dp mode");
}

void sample_theta_labels(ThetaState& state, const std::vector<LocationStats>& stats,
                         double omega, const GaussianParams& prior, PriorMode mode,
                         ThetaUpdate update, Rng& rng) {
  const int J = static_cast<int>(stats.size());
  if (state.partition.size() != J) throw std::invalid_argument("sample_theta_labels: size mismatch");
  if (J > 1) {
    if (update == ThetaUpdate::exact) {
      sample_labels_exact(state, stats, omega, prior, mode, rng);
    } else if (mode == PriorMode::dp) {
      sample_labels_crp(state, stats, omega, prior, rng);
    } else {
      sample_labels_forward(state, stats, omega, prior, mode, rng);
    }
  }
  draw_block_locations(state, stats, prior, rng);
}

namespace {

// Coefficients c[k-1] of Z_n(omega) = sum_k c[k-1] omega^(k-1), where c sums
// prod (n_i - 1)! over the compositions of n into k parts.
std::vector<double> compute_normalizer_coefficients(int n) {
  std::vector<std::vector<double>> g(n + 1, std::vector<double>(n + 1, 0.0));
  g[0][0] = 1.0;
  for (int total = 1; total <= n; ++total) {
    for (int k = 1; k <= total; ++k) {
      double fact = 1.0;
      for (int s = 1; s <= total; ++s) {
        if (s > 1) fact *= s - 1;
        g[total][k] += fact * g[total - s][k - 1];
      }
    }
  }
  return std::vector<double>(g[n].begin() + 1, g[n].end());
}

const std::vector<double>& restricted_normalizer_coefficients(int n) {
  thread_local std::map<int, std::vector<double>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_normalizer_coefficients(n)).first;
  return it->second;
}

double log_polynomial(const std::vector<double>& c, double omega) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * omega + *it;
  return std::log(acc);
}

double sir_log_weight(double omega, int excess, int M, const std::vector<double>& coef) {
  return excess * std::log(omega) - M * log_polynomial(coef, omega);
}

}  // namespace

double omega_sir_log_weight(double omega, const std::vector<int>& blocks, int num_populations) {
  int total = 0;
  for (int t : blocks) total += t;
  const int M = static_cast<int>(blocks.size());
  return sir_log_weight(omega, total - M, M, restricted_normalizer_coefficients(num_populations));
}

double sample_omega_sir(const std::vector<int>& blocks, int num_populations,
                        const GammaPrior& prior, int pool_size, double current, Rng& rng) {
  int total = 0;
  for (int t : blocks) total += t;
  const int M = static_cast<int>(blocks.size());
  const auto& coef = restricted_normalizer_coefficients(num_populations);
  std::vector<double> pool(pool_size);
  std::vector<double> lw(pool_size);
  for (int k = 0; k < pool_size; ++k) {
    pool[k] = sample_gamma(rng, prior.shape, prior.rate);
    lw[k] = pool[k] > 0.0 ? sir_log_weight(pool[k], total - M, M, coef) : kNegInf;
  }
  if (!std::isfinite(log_sum_exp(lw))) {
    spdlog::warn("omega importance weights are all zero; keeping omega = {}", current);
    return current;
  }
  return pool[sample_log_categorical(rng, lw)];
}

double sample_omega_escobar_west(const std::vector<int>& blocks, int num_populations,
                                 double omega, const GammaPrior& prior, Rng& rng) {
  const int M = static_cast<int>(blocks.size());
  int total = 0;
  double rate = prior.rate;
  for (int m = 0; m < M; ++m) {
    total += blocks[m];
    rate -= std::log(sample_beta(rng, omega + 1.0, num_populations));
  }
  std::vector<double> lw(M + 1);
  for (int v = 0; v <= M; ++v) {
    lw[v] = log_binomial(M, v) + v * std::log(static_cast<double>(num_populations)) +
            std::lgamma(prior.shape + total - v) + v * std::log(rate);
  }
  const int v = sample_log_categorical(rng, lw);
  return sample_gamma(rng, prior.shape + total - v, rate);
}

double sample_dp_concentration(double current, int k, int n, const GammaPrior& prior, Rng& rng) {
  if (n == 0) return sample_gamma(rng, prior.shape, prior.rate);
  const double eta = sample_beta(rng, current + 1.0, n);
  const double rate = prior.rate - std::log(eta);
  const double odds = (prior.shape + k - 1.0) / (n * rate);
  const bool extra = sample_bernoulli(rng, odds / (1.0 + odds));
  return sample_gamma(rng, prior.shape + k - (extra ? 0.0 : 1.0), rate);
}

double sample_tied_concentration(double current, const std::vector<int>& tables,
                                 const std::vector<int>& sizes, const GammaPrior& prior,
                                 Rng& rng) {
  double shape = prior.shape;
  double rate = prior.rate;
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    if (sizes[j] == 0) continue;
    rate -= std::log(sample_beta(rng, current + 1.0, sizes[j]));
    const bool s = sample_bernoulli(rng, sizes[j] / (sizes[j] + current));
    shape += tables[j] - (s ? 1.0 : 0.0);
  }
  return sample_gamma(rng, shape, rate);
}

void sample_concentrations(FranchiseState& franchise, const ModelConfig& config, Rng& rng) {
  const int J = franchise.num_restaurants();
  std::vector<int> tables(J), sizes(J);
  for (int j = 0; j < J; ++j) {
    tables[j] = static_cast<int>(franchise.restaurant(j).tables.size());
    sizes[j] = franchise.restaurant(j).customers();
  }
  if (config.tie_gamma) {
    const double g = sample_tied_concentration(franchise.gamma(0), tables, sizes,
                                               config.gamma_prior, rng);
    for (int j = 0; j < J; ++j) franchise.set_gamma(j, g);
  } else {
    for (int j = 0; j < J; ++j) {
      franchise.set_gamma(j, sample_dp_concentration(franchise.gamma(j), tables[j], sizes[j],
                                                     config.gamma_prior, rng));
    }
  }
  franchise.set_alpha(sample_dp_concentration(franchise.alpha(), franchise.num_dishes(),
                                              franchise.total_tables(), config.alpha_prior, rng));
}

Residuals franchise_residuals(const ResponseState& r, const std::vector<std::vector<double>>& x) {
  Residuals eps(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double theta = r.theta(static_cast<int>(j));
    eps[j].reserve(x[j].size());
    for (double v : x[j]) eps[j].push_back(v - theta);
  }
  return eps;
}

std::vector<LocationStats> location_stats(const ResponseState& r,
                                          const std::vector<std::vector<double>>& x) {
  std::vector<LocationStats> stats(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const auto& rest = r.franchise.restaurant(static_cast<int>(j));
    std::vector<double> z(x[j].size()), s2(x[j].size());
    for (std::size_t i = 0; i < x[j].size(); ++i) {
      const DishAtom& atom = r.franchise.dish(rest.tables[rest.table_of[i]].dish).atom;
      z[i] = x[j][i] - rest.sign[i] * atom.xi;
      s2[i] = atom.sigma2;
    }
    stats[j] = LocationStats::of(z, s2);
  }
  return stats;
}

ChainState init_state(const Dataset& data, const ModelConfig& config, std::uint64_t seed,
                      int chain) {
  data.validate();
  config.validate();
  const int J = data.num_populations();
  const auto sizes = data.sizes();
  ChainState state;
  state.omega = config.omega_prior.mean();
  state.omega_rng = make_rng(seed, chain + 1, 0);
  for (int m = 0; m < data.num_responses(); ++m) {
    ResponseState r;
    r.rng = make_rng(seed, chain + 1, m + 1);
    r.partition = SetPartition::finest(J);
    r.theta_star.resize(J);
    for (int j = 0; j < J; ++j) {
      double sum = 0.0;
      for (double v : data.values[m][j]) sum += v;
      r.theta_star[j] = sum / sizes[j];
    }
    r.franchise = FranchiseState(sizes, std::vector<double>(J, config.gamma_prior.mean()),
                                 config.alpha_prior.mean());
    GaussianStats resid;
    for (int j = 0; j < J; ++j) {
      for (double v : data.values[m][j]) resid.add(v - r.theta_star[j]);
    }
    const int h = r.franchise.add_dish(sample_nig(nig_update(config.base_for(m), resid), r.rng));
    for (int j = 0; j < J; ++j) {
      const int t = r.franchise.open_table(j, h);
      for (int i = 0; i < sizes[j]; ++i) r.franchise.seat_customer(j, i, t, 1);
    }
    state.responses.push_back(std::move(r));
  }
  return state;
}

namespace {

void update_response(ResponseState& r, const std::vector<std::vector<double>>& x,
                     const ModelConfig& config, int m, double omega) {
  const auto eps = franchise_residuals(r, x);
  sweep_franchise(r.franchise, eps, config.base_for(m), r.rng);
  const auto stats = location_stats(r, x);
  ThetaState ts{r.partition, r.theta_star};
  sample_theta_labels(ts, stats, omega, config.location_for(m), config.prior_mode,
                      config.theta_update, r.rng);
  r.partition = std::move(ts.partition);
  r.theta_star = std::move(ts.theta_star);
}

void check_finite(const ChainState& state, long iteration) {
  auto fail = [&](const std::string& what) {
    throw NumericalError("non-finite " + what + " at iteration " + std::to_string(iteration));
  };
  if (!std::isfinite(state.omega) || !(state.omega > 0.0)) fail("omega");
  for (std::size_t m = 0; m < state.responses.size(); ++m) {
    const auto& r = state.responses[m];
    for (double t : r.theta_star) {
      if (!std::isfinite(t)) fail("location for response " + std::to_string(m));
    }
    for (const auto& d : r.franchise.menu()) {
      if (!std::isfinite(d.atom.xi) || !(d.atom.sigma2 > 0.0) || !std::isfinite(d.atom.sigma2)) {
        fail("dish atom for response " + std::to_string(m));
      }
    }
    if (!(r.franchise.alpha() > 0.0) || !std::isfinite(r.franchise.alpha())) fail("alpha");
    for (double g : r.franchise.gammas()) {
      if (!(g > 0.0) || !std::isfinite(g)) fail("gamma");
    }
  }
}

}  // namespace

void sweep(ChainState& state, const Dataset& data, const ModelConfig& config,
           const MCMCOptions& options) {
  const int M = data.num_responses();
  const int J = data.num_populations();
  if (static_cast<int>(state.responses.size()) != M) {
    throw std::invalid_argument("sweep: state and data disagree on the response count");
  }
  if (M > 1 && options.parallel_responses) {
    std::vector<std::future<void>> jobs;
    for (int m = 0; m < M; ++m) {
      jobs.push_back(std::async(std::launch::async, [&, m] {
        update_response(state.responses[m], data.values[m], config, m, state.omega);
      }));
    }
    for (auto& job : jobs) job.get();
  } else {
    for (int m = 0; m < M; ++m) {
      update_response(state.responses[m], data.values[m], config, m, state.omega);
    }
  }
  std::vector<int> blocks(M);
  for (int m = 0; m < M; ++m) blocks[m] = state.responses[m].partition.num_blocks();
  switch (config.prior_mode) {
    case PriorMode::restricted:
      state.omega = sample_omega_sir(blocks, J, config.omega_prior, options.omega_pool_size,
                                     state.omega, state.omega_rng);
      break;
    case PriorMode::uniform:
      state.omega = sample_gamma(state.omega_rng, config.omega_prior.shape,
                                 config.omega_prior.rate);
      break;
    case PriorMode::dp:
      state.omega = sample_omega_escobar_west(blocks, J, state.omega, config.omega_prior,
                                              state.omega_rng);
      break;
  }
  for (auto& r : state.responses) sample_concentrations(r.franchise, config, r.rng);
  ++state.iteration;
  check_finite(state, state.iteration);
  if (options.audit_interval > 0 && state.iteration % options.audit_interval == 0) {
    audit_state(state, data, config);
  }
}

void audit_state(const ChainState& state, const Dataset& data, const ModelConfig& config) {
  const auto sizes = data.sizes();
  for (std::size_t m = 0; m < state.responses.size(); ++m) {
    const auto& r = state.responses[m];
    r.franchise.audit();
    if (r.franchise.num_restaurants() != data.num_populations()) {
      throw std::logic_error("audit: restaurant count mismatch");
    }
    for (int j = 0; j < data.num_populations(); ++j) {
      if (r.franchise.restaurant(j).customers() != sizes[j]) {
        throw std::logic_error("audit: restaurant size mismatch");
      }
    }
    if (r.partition.size() != data.num_populations() ||
        static_cast<int>(r.theta_star.size()) != r.partition.num_blocks()) {
      throw std::logic_error("audit: location labels and values disagree");
    }
    if (config.prior_mode != PriorMode::dp && !is_order_consistent(r.partition)) {
      throw std::logic_error("audit: location partition is not order consistent");
    }
  }
}

void run_chain(ChainState& state, const Dataset& data, const ModelConfig& config,
               const MCMCOptions& options, const ChainCallbacks& callbacks) {
  options.validate();
  while (state.iteration < options.iterations) {
    sweep(state, data, config, options);
    const long it = state.iteration;
    if (it > options.burn_in && (it - options.burn_in) % options.thin == 0 && callbacks.on_sample) {
      callbacks.on_sample(state);
    }
    const bool last = it == options.iterations;
    if (callbacks.on_checkpoint &&
        (last || (options.checkpoint_interval > 0 && it % options.checkpoint_interval == 0))) {
      callbacks.on_checkpoint(state);
    }
  }
}

}  // namespace shdp
