// Apache License, Version 2.0, refer to LICENSE.txt

#include "shdp/validation.hh"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "shdp/franchise.hh"
#include "shdp/numeric.hh"
#include "shdp/sampler.hh"

namespace shdp {

namespace bq = boost::math::quadrature;

nlohmann::json to_json(const CheckResult& r) {
  return {{"name", r.name},
          {"statistic", r.statistic},
          {"threshold", r.threshold},
          {"passed", r.passed},
          {"detail", r.detail}};
}

ValidationOptions quick_validation() {
  ValidationOptions o;
  o.crf_replicates = 40000;
  o.quadrature_datasets = 20;
  o.prior_sweeps = 20000;
  o.omega_draws = 20000;
  return o;
}

namespace {

CheckResult at_most(std::string name, double statistic, double threshold, std::string detail = {}) {
  return CheckResult{std::move(name), statistic, threshold, statistic <= threshold,
                     std::move(detail)};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<CheckResult> check_prior_identities(const ValidationOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<CheckResult> out;
  Rng rng = make_rng(opt.seed, 1);

  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double w = std::exp(std::log(0.01) + uniform01(rng) * std::log(1e4));
    double brute = 0.0;
    for (const auto& p : enumerate_set_partitions(4)) brute += restricted_weight(w, p);
    double closed = (w + 2) * (w * w + w + 3);
    if (opt.inject_fault) closed = (w + 2) * (w * w + w + 4);
    worst = std::max(worst, std::abs(brute - closed) / closed);
    worst = std::max(worst, std::abs(restricted_normalizer(w, 4) - closed) / closed);
  }
  out.push_back(at_most("restricted normalizer equals (w+2)(w^2+w+3), 20 random w", worst, 1e-10));

  worst = 0.0;
  for (double w : {0.5, 1.0, 3.0}) {
    const auto prior = restricted_prior(w, 4);
    for (const auto& p : enumerate_contiguous_partitions(4)) {
      double prod = 1.0;
      for (int j = 2; j <= 4; ++j) {
        const double a = theta_tie_weight(w, j, p.prefix(j - 1));
        prod *= p.same_block(j - 2, j - 1) ? a : 1.0 - a;
      }
      worst = std::max(worst, std::abs(prod - prior.probability_of(p)));
    }
  }
  out.push_back(at_most("sequential tie weights reproduce the 8 contiguous masses", worst, 1e-12));

  worst = 0.0;
  for (int J = 1; J <= 6; ++J) {
    for (double w : {0.1, 1.0, 10.0}) {
      double total = 0.0;
      for (const auto& p : enumerate_set_partitions(J)) total += std::exp(dp_eppf_log(w, p));
      worst = std::max(worst, std::abs(total - 1.0));
    }
  }
  out.push_back(at_most("EPPF sums to one for J <= 6", worst, 1e-12));

  out.push_back(at_most("prior identity runtime (s)", seconds_since(t0), 1.0));
  return out;
}

namespace {

struct CrfCase {
  std::vector<int> sizes;
  std::vector<double> gamma;
};

}  // namespace

std::vector<CheckResult> check_peppf(const ValidationOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const double alpha = opt.inject_fault ? 1.3 : 0.8;
  const double alpha_true = 0.8;
  const NormalInverseGammaParams base;
  std::vector<CrfCase> cases;
  for (int n = 1; n <= 4; ++n) cases.push_back({{n}, {1.3}});
  for (int a = 1; a <= 3; ++a) {
    for (int b = 1; a + b <= 4; ++b) cases.push_back({{a, b}, {1.3, 0.6}});
  }
  Rng rng = make_rng(opt.seed, 2);
  const double R = static_cast<double>(opt.crf_replicates);
  double worst_cell = 0.0;
  double worst_chi = -INFINITY;
  double worst_sum = 0.0;
  double worst_identity = 0.0;
  std::string where;
  for (const auto& c : cases) {
    const int N = std::accumulate(c.sizes.begin(), c.sizes.end(), 0);
    const auto parts = enumerate_set_partitions(N);
    std::unordered_map<SetPartition, int, SetPartitionHash> index;
    for (std::size_t k = 0; k < parts.size(); ++k) index.emplace(parts[k], static_cast<int>(k));
    const int signs = 1 << N;
    std::vector<double> expected(parts.size());
    double total = 0.0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      CountMatrix counts(c.sizes.size(), std::vector<int>(parts[k].num_blocks(), 0));
      int flat = 0;
      for (std::size_t j = 0; j < c.sizes.size(); ++j) {
        for (int i = 0; i < c.sizes[j]; ++i) ++counts[j][parts[k].label(flat++)];
      }
      expected[k] = std::exp(hdp_peppf_log(counts, c.gamma, alpha));
      total += std::exp(hdp_peppf_log(counts, c.gamma, alpha_true));
      // Signed identity on a pseudo-random split of each cell.
      CountMatrix plus = counts, minus = counts;
      for (std::size_t j = 0; j < counts.size(); ++j) {
        for (std::size_t h = 0; h < counts[j].size(); ++h) {
          plus[j][h] = counts[j][h] / 2 + static_cast<int>((k + h) % 2) * (counts[j][h] % 2);
          minus[j][h] = counts[j][h] - plus[j][h];
        }
      }
      worst_identity = std::max(worst_identity,
                                std::abs(shdp_peppf_log(plus, minus, c.gamma, alpha_true) +
                                         N * kLog2 - hdp_peppf_log(counts, c.gamma, alpha_true)));
    }
    worst_sum = std::max(worst_sum, std::abs(total - 1.0));

    std::vector<double> observed(parts.size() * signs, 0.0);
    for (long r = 0; r < opt.crf_replicates; ++r) {
      const auto state = crf_generate(c.gamma, alpha_true, c.sizes, base, rng);
      std::vector<int> labels;
      int bits = 0;
      int flat = 0;
      for (std::size_t j = 0; j < c.sizes.size(); ++j) {
        for (int i = 0; i < c.sizes[j]; ++i, ++flat) {
          labels.push_back(state.dish_of(static_cast<int>(j), i));
          if (state.restaurant(static_cast<int>(j)).sign[i] > 0) bits |= 1 << flat;
        }
      }
      observed[index.at(SetPartition(labels)) * signs + bits] += 1.0;
    }
    double chi = 0.0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      double unsigned_count = 0.0;
      for (int s = 0; s < signs; ++s) {
        const double o = observed[k * signs + s];
        const double e = R * expected[k] / signs;
        unsigned_count += o;
        chi += (o - e) * (o - e) / e;
      }
      const double p = expected[k];
      const double z = std::abs(unsigned_count - R * p) / std::sqrt(R * p * (1.0 - p) + 1e-300);
      if (p < 1.0 && z > worst_cell) {
        worst_cell = z;
        std::ostringstream os;
        os << "sizes";
        for (int n : c.sizes) os << ' ' << n;
        os << ", partition " << parts[k].to_string();
        where = os.str();
      }
    }
    const double df = static_cast<double>(parts.size() * signs - 1);
    worst_chi = std::max(worst_chi, df > 0 ? (chi - df) / std::sqrt(2.0 * df) : 0.0);
  }
  std::vector<CheckResult> out;
  out.push_back(at_most("exact partition law sums to one over all configurations", worst_sum, 1e-12));
  out.push_back(at_most("signed law equals unsigned law minus N log 2", worst_identity, 1e-12));
  out.push_back(at_most("generative vs exact unsigned cell frequencies, max |z|", worst_cell, 3.0,
                        "worst cell: " + where));
  out.push_back(at_most("generative vs exact signed cells, standardized chi-square", worst_chi, 3.0));
  out.push_back(at_most("partition law runtime (s)", seconds_since(t0), 60.0));
  return out;
}

double nig_marginal_quadrature(const NormalInverseGammaParams& prior,
                               const std::vector<double>& obs) {
  const double n = static_cast<double>(obs.size());
  const double sum = std::accumulate(obs.begin(), obs.end(), 0.0);
  auto inner = [&](double s2) {
    if (!(s2 > 0.0)) return 0.0;
    const double centre = (prior.tau * prior.mu0 + sum) / (prior.tau + n);
    const double width = 15.0 * std::sqrt(s2 / (prior.tau + n));
    auto f = [&](double xi) {
      double acc = normal_logpdf(xi, prior.mu0, s2 / prior.tau);
      for (double x : obs) acc += normal_logpdf(x, xi, s2);
      return std::exp(acc);
    };
    const double v = bq::gauss_kronrod<double, 61>::integrate(f, centre - width, centre + width,
                                                              15, 1e-13);
    const double log_ig = prior.a * std::log(prior.b) - std::lgamma(prior.a) -
                          (prior.a + 1.0) * std::log(s2) - prior.b / s2;
    return v * std::exp(log_ig);
  };
  bq::exp_sinh<double> outer;
  return outer.integrate(inner, 1e-13);
}

double normal_location_marginal_quadrature(const GaussianParams& prior,
                                           const std::vector<double>& z,
                                           const std::vector<double>& sigmas2) {
  auto f = [&](double t) {
    double acc = normal_logpdf(t, prior);
    for (std::size_t i = 0; i < z.size(); ++i) acc += normal_logpdf(z[i], t, sigmas2[i]);
    return std::exp(acc);
  };
  double lo = prior.mean - 40.0 * std::sqrt(prior.variance);
  double hi = prior.mean + 40.0 * std::sqrt(prior.variance);
  for (std::size_t i = 0; i < z.size(); ++i) {
    lo = std::min(lo, z[i] - 40.0 * std::sqrt(sigmas2[i]));
    hi = std::max(hi, z[i] + 40.0 * std::sqrt(sigmas2[i]));
  }
  return bq::gauss_kronrod<double, 61>::integrate(f, lo, hi, 25, 1e-14);
}

std::vector<CheckResult> check_conjugacy(const ValidationOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng = make_rng(opt.seed, 3);
  double worst_nig = 0.0;
  double worst_loc = 0.0;
  for (int d = 0; d < opt.quadrature_datasets; ++d) {
    NormalInverseGammaParams prior;
    if (d % 2 == 1) {
      prior.mu0 = -1.0 + 2.0 * uniform01(rng);
      prior.tau = 0.5 + 1.5 * uniform01(rng);
      prior.a = 1.5 + 2.5 * uniform01(rng);
      prior.b = 1.0 + 4.0 * uniform01(rng);
    }
    const int n = 1 + d % 3;
    std::vector<double> x(n);
    for (double& v : x) v = sample_normal(rng, 0.0, 1.5);
    double closed = std::exp(nig_marginal_loglik(prior, x));
    if (opt.inject_fault) closed *= 1.0 + 1e-4;
    const double quad = nig_marginal_quadrature(prior, x);
    worst_nig = std::max(worst_nig, std::abs(quad - closed) / closed);

    const GaussianParams g{-1.0 + 2.0 * uniform01(rng), 0.5 + 1.5 * uniform01(rng)};
    std::vector<double> z(n), s2(n);
    for (int i = 0; i < n; ++i) {
      z[i] = sample_normal(rng, 0.0, 2.0);
      s2[i] = 0.2 + 1.8 * uniform01(rng);
    }
    const double lc = std::exp(normal_location_marginal_loglik(g, z, s2));
    const double lq = normal_location_marginal_quadrature(g, z, s2);
    worst_loc = std::max(worst_loc, std::abs(lq - lc) / lc);
  }
  std::vector<CheckResult> out;
  out.push_back(at_most("NIG marginal vs 2-D quadrature, max relative error", worst_nig, 1e-6));
  out.push_back(at_most("normal-location marginal vs 1-D quadrature, max relative error",
                        worst_loc, 1e-8));
  out.push_back(at_most("conjugacy runtime (s)", seconds_since(t0), 60.0));
  return out;
}

double batch_means_se(const std::vector<double>& series, int batches) {
  const std::size_t size = series.size() / batches;
  if (size == 0) return INFINITY;
  std::vector<double> means(batches);
  for (int b = 0; b < batches; ++b) {
    double acc = 0.0;
    for (std::size_t t = b * size; t < (b + 1) * size; ++t) acc += series[t];
    means[b] = acc / size;
  }
  const double mean = std::accumulate(means.begin(), means.end(), 0.0) / batches;
  double ss = 0.0;
  for (double m : means) ss += (m - mean) * (m - mean);
  return std::sqrt(ss / (batches - 1) / batches);
}

std::vector<CheckResult> check_prior_only_gibbs(const ValidationOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const int J = 4;
  const double omega = 0.8;
  const auto parts = enumerate_set_partitions(J);
  std::unordered_map<SetPartition, int, SetPartitionHash> index;
  for (std::size_t k = 0; k < parts.size(); ++k) index.emplace(parts[k], static_cast<int>(k));
  std::vector<CheckResult> out;
  const GaussianParams g{0.0, 1.0};
  const std::vector<LocationStats> flat(J);
  int stream = 10;
  for (PriorMode mode : {PriorMode::restricted, PriorMode::uniform, PriorMode::dp}) {
    PartitionDistribution target = mode == PriorMode::restricted ? restricted_prior(omega, J)
                                   : mode == PriorMode::uniform  ? uniform_contiguous_prior(J)
                                                                 : dp_prior(omega, J);
    if (opt.inject_fault && mode == PriorMode::restricted) target = restricted_prior(2 * omega, J);
    Rng rng = make_rng(opt.seed, stream++);
    ThetaState state{SetPartition::finest(J), std::vector<double>(J, 0.0)};
    std::vector<std::vector<double>> indicator(parts.size(),
                                               std::vector<double>(opt.prior_sweeps, 0.0));
    for (long s = 0; s < opt.prior_sweeps; ++s) {
      sample_theta_labels(state, flat, omega, g, mode, ThetaUpdate::sequential, rng);
      indicator[index.at(state.partition)][s] = 1.0;
    }
    double worst = 0.0;
    std::string where;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const double p = target.probability_of(parts[k]);
      const double freq =
          std::accumulate(indicator[k].begin(), indicator[k].end(), 0.0) / opt.prior_sweeps;
      double z = 0.0;
      if (p == 0.0) {
        z = freq == 0.0 ? 0.0 : INFINITY;
      } else {
        const double se = batch_means_se(indicator[k], 100);
        z = se > 0.0 ? std::abs(freq - p) / se : (freq == p ? 0.0 : INFINITY);
      }
      if (z > worst) {
        worst = z;
        where = parts[k].to_string();
      }
    }
    out.push_back(at_most("flat-likelihood label frequencies match the " + to_string(mode) +
                              " prior, max |z|",
                          worst, 3.0, "worst cell: " + where));
  }
  out.push_back(at_most("prior-only runtime (s)", seconds_since(t0), 300.0));
  return out;
}

double ks_distance_positive(std::vector<double> draws,
                            const std::function<double(double)>& log_density) {
  std::sort(draws.begin(), draws.end());
  const std::size_t n = draws.size();
  const double shift = log_density(draws[n / 2]);
  auto f = [&](double x) { return x > 0.0 ? std::exp(log_density(x) - shift) : 0.0; };
  std::vector<double> cum(n, 0.0);
  double acc = bq::gauss_kronrod<double, 61>::integrate(f, 0.0, draws[0], 15, 1e-12);
  cum[0] = acc;
  for (std::size_t i = 1; i < n; ++i) {
    if (draws[i] > draws[i - 1]) acc += bq::gauss<double, 10>::integrate(f, draws[i - 1], draws[i]);
    cum[i] = acc;
  }
  bq::exp_sinh<double> tail;
  const double last = draws[n - 1];
  const double total = acc + tail.integrate([&](double t) { return f(last + t); }, 1e-12);
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double F = cum[i] / total;
    d = std::max({d, (i + 1.0) / n - F, F - static_cast<double>(i) / n});
  }
  return d;
}

std::vector<CheckResult> check_omega_samplers(const ValidationOptions& opt) {
  std::vector<CheckResult> out;
  const double w = std::exp(omega_sir_log_weight(1.0, {1}, 4));
  const double target = opt.inject_fault ? 1.0 / 16.0 : 1.0 / 15.0;
  out.push_back(at_most("SIR weight at w=1, M=1, T=1 equals 1/15", std::abs(w - target), 1e-15));

  const GammaPrior prior{3.0, 3.0};
  const int J = 4;
  int stream = 20;
  for (const std::vector<int>& blocks : std::vector<std::vector<int>>{{1}, {3}, {2, 3}}) {
    Rng rng = make_rng(opt.seed, stream++);
    double omega = prior.mean();
    for (int b = 0; b < 100; ++b) omega = sample_omega_escobar_west(blocks, J, omega, prior, rng);
    std::vector<double> draws(opt.omega_draws);
    for (auto& d : draws) d = omega = sample_omega_escobar_west(blocks, J, omega, prior, rng);
    auto logp = [&](double x) {
      double acc = (prior.shape - 1.0) * std::log(x) - prior.rate * x;
      for (int t : blocks) acc += t * std::log(x) - log_rising_factorial(x, J);
      return acc;
    };
    std::ostringstream name;
    name << "Escobar-West stationary law, T = {";
    for (std::size_t k = 0; k < blocks.size(); ++k) name << (k ? "," : "") << blocks[k];
    name << "}, KS distance";
    out.push_back(at_most(name.str(), ks_distance_positive(draws, logp), 0.02));
  }
  {
    Rng rng = make_rng(opt.seed, stream++);
    const std::vector<int> blocks{2};
    const long n = std::min<long>(opt.omega_draws, 20000);
    std::vector<double> draws(n);
    double omega = prior.mean();
    for (auto& d : draws) d = omega = sample_omega_sir(blocks, J, prior, 1000, omega, rng);
    auto logp = [&](double x) {
      return (prior.shape - 1.0) * std::log(x) - prior.rate * x +
             omega_sir_log_weight(x, blocks, J);
    };
    out.push_back(at_most("importance-resampling law, T = {2}, KS distance",
                          ks_distance_positive(draws, logp), 0.02));
  }
  return out;
}

std::vector<CheckResult> run_validation(const ValidationOptions& opt) {
  std::vector<CheckResult> all;
  for (auto* check : {check_prior_identities, check_peppf, check_conjugacy,
                      check_prior_only_gibbs, check_omega_samplers}) {
    auto part = check(opt);
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

}  // namespace shdp
