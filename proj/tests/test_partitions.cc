// Apache License, Version 2.0, refer to LICENSE.txt

#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "shdp/partitions.hh"

using namespace shdp;

namespace {

// Every label vector in {0..n-1}^n, canonicalized and deduplicated.
std::set<std::vector<int>> brute_force_partitions(int n) {
  std::set<std::vector<int>> out;
  std::vector<int> v(n, 0);
  while (true) {
    out.insert(SetPartition(v).labels());
    int k = n - 1;
    while (k >= 0 && v[k] == n - 1) v[k--] = 0;
    if (k < 0) break;
    ++v[k];
  }
  return out;
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// omega^(k-1) prod (n_i - 1)! evaluated directly from block sizes.
double direct_weight(double omega, const std::vector<int>& sizes) {
  double w = std::pow(omega, static_cast<double>(sizes.size()) - 1.0);
  for (int s : sizes) w *= factorial(s - 1);
  return w;
}

double direct_binder(const Eigen::MatrixXd& c, const SetPartition& p) {
  double loss = 0.0;
  for (int i = 0; i < p.size(); ++i)
    for (int k = i + 1; k < p.size(); ++k)
      loss += std::abs((p.label(i) == p.label(k) ? 1.0 : 0.0) - c(i, k));
  return loss;
}

}  // namespace

TEST_CASE("canonical label vectors") {
  SetPartition p{2, 2, 0, 1};
  CHECK(p.labels() == std::vector<int>{0, 0, 1, 2});
  CHECK(p.num_blocks() == 3);
  CHECK(p.to_string() == "{1,2}{3}{4}");
  std::vector<std::string> names{"C", "G", "M", "S"};
  CHECK(SetPartition{0, 1, 1, 2}.to_string(names) == "{C}{G,M}{S}");
  CHECK(SetPartition{0, 1, 0, 2}.blocks() == std::vector<std::vector<int>>{{0, 2}, {1}, {3}});
  CHECK(SetPartition{0, 1, 1, 2}.prefix(2) == SetPartition{0, 1});
  CHECK(SetPartition::finest(3) == SetPartition{0, 1, 2});
  CHECK(SetPartition::coarsest(3).num_blocks() == 1);
}

TEST_CASE("set partition enumeration") {
  CHECK(enumerate_set_partitions(4).size() == 15);
  CHECK(enumerate_set_partitions(1).size() == 1);
  CHECK(enumerate_set_partitions(5).size() == 52);
  const int bell[] = {1, 1, 2, 5, 15, 52, 203, 877, 4140};
  for (int n = 1; n <= 7; ++n) {
    auto all = enumerate_set_partitions(n);
    CHECK(static_cast<int>(all.size()) == bell[n]);
    std::set<std::vector<int>> seen;
    for (const auto& p : all) seen.insert(p.labels());
    CHECK(seen == brute_force_partitions(n));
  }
  CHECK(enumerate_set_partitions(8).size() == 4140);
  CHECK_THROWS_AS(enumerate_set_partitions(0), std::out_of_range);
  CHECK_THROWS_AS(enumerate_set_partitions(9), std::out_of_range);
}

TEST_CASE("contiguous partitions") {
  for (int n = 1; n <= 8; ++n) {
    auto c = enumerate_contiguous_partitions(n);
    CHECK(c.size() == (std::size_t{1} << (n - 1)));
    for (const auto& p : c) CHECK(is_order_consistent(p));
    int count = 0;
    if (n <= 7)
      for (const auto& p : enumerate_set_partitions(n)) count += is_order_consistent(p);
    if (n <= 7) CHECK(count == (1 << (n - 1)));
  }
  CHECK(is_order_consistent(SetPartition{0, 0, 1, 1}));
  CHECK_FALSE(is_order_consistent(SetPartition{0, 1, 0, 2}));
  CHECK(is_order_consistent(SetPartition{0, 1, 2, 3}));
}

TEST_CASE("DP EPPF") {
  CHECK(dp_eppf_log(1.0, SetPartition{0, 0, 1, 2}) == doctest::Approx(std::log(1.0 / 24)));
  CHECK(dp_eppf_log(1.0, SetPartition{0, 0, 0, 0}) == doctest::Approx(std::log(6.0 / 24)));
  CHECK(dp_eppf_log(2.7, SetPartition{0}) == doctest::Approx(0.0));
  for (int n = 1; n <= 6; ++n) {
    for (double w : {0.3, 1.0, 4.0}) {
      double total = 0.0;
      for (const auto& p : enumerate_set_partitions(n)) total += std::exp(dp_eppf_log(w, p));
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
  CHECK_THROWS_AS(dp_eppf_log(0.0, SetPartition{0, 1}), std::domain_error);
  CHECK_THROWS_AS(dp_eppf_log(-1.0, SetPartition{0, 1}), std::domain_error);
}

TEST_CASE("restricted prior") {
  auto d = restricted_prior(1.0, 4);
  CHECK(d.probability_of(SetPartition{0, 0, 0, 0}) == doctest::Approx(0.4));
  CHECK(d.probability_of(SetPartition{0, 1, 0, 2}) == 0.0);
  CHECK(d.entries.size() == 15);

  for (double w : {0.1, 1.0, 10.0}) {
    auto dist = restricted_prior(w, 4);
    CHECK(std::abs(dist.total() - 1.0) < 1e-12);
    for (const auto& [p, prob] : dist.entries) {
      if (!is_order_consistent(p)) CHECK(prob == 0.0);
      else CHECK(prob == doctest::Approx(direct_weight(w, p.block_sizes()) /
                                         restricted_normalizer(w, 4)));
    }
  }

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.01, 20.0);
  for (int r = 0; r < 20; ++r) {
    const double w = u(rng);
    const double closed = (w + 2) * (w * w + w + 3);
    double direct = 0.0;
    for (const auto& p : enumerate_contiguous_partitions(4)) direct += direct_weight(w, p.block_sizes());
    CHECK(std::abs(restricted_normalizer(w, 4) / closed - 1.0) < 1e-10);
    CHECK(std::abs(direct / closed - 1.0) < 1e-10);
  }
  CHECK(restricted_weight(2.0, SetPartition{0, 1, 0, 2}) == 0.0);
  CHECK_THROWS_AS(restricted_prior(0.0, 4), std::domain_error);
}

TEST_CASE("uniform and DP priors") {
  auto u = uniform_contiguous_prior(4);
  for (const auto& [p, prob] : u.entries) CHECK(prob == (is_order_consistent(p) ? 0.125 : 0.0));
  auto d = dp_prior(1.3, 4);
  CHECK(std::abs(d.total() - 1.0) < 1e-12);
  CHECK(d.probability_of(SetPartition{0, 1, 0, 2}) > 0.0);
}

TEST_CASE("tie weights") {
  const SetPartition one{0}, tied{0, 0}, split{0, 1};
  CHECK(theta_tie_weight(1.0, 4, SetPartition{0, 0, 0}) == doctest::Approx(0.75));
  CHECK(theta_tie_weight(1.0, 2, one) == doctest::Approx(2.0 / 3.0));
  for (double w : {0.5, 1.0, 3.0, 7.2}) {
    CHECK(theta_tie_weight(w, 2, one) ==
          doctest::Approx((w * w + 3 * w + 6) / ((w + 2) * (w * w + w + 3))));
    CHECK(theta_tie_weight(w, 3, tied) == doctest::Approx((2 * w + 6) / (w * w + 3 * w + 6)));
    CHECK(theta_tie_weight(w, 3, split) == doctest::Approx((w + 2) / (w * w + 2 * w + 2)));
    CHECK(theta_tie_weight(w, 4, SetPartition{0, 0, 0}) == doctest::Approx(3 / (w + 3)));
    CHECK(theta_tie_weight(w, 4, SetPartition{0, 1, 1}) == doctest::Approx(2 / (w + 2)));
    CHECK(theta_tie_weight(w, 4, SetPartition{0, 0, 1}) == doctest::Approx(1 / (w + 1)));
    CHECK(theta_tie_weight(w, 4, SetPartition{0, 1, 2}) == doctest::Approx(1 / (w + 1)));
  }
}

TEST_CASE("sequential tie weights reproduce the restricted prior") {
  for (int J : {4, 5, 6}) {
    for (double w : {0.5, 1.0, 3.0}) {
      auto prior = restricted_prior(w, J);
      for (const auto& p : enumerate_contiguous_partitions(J)) {
        double prob = 1.0;
        for (int j = 2; j <= J; ++j) {
          const double a = J == 4 ? theta_tie_weight(w, j, p.prefix(j - 1))
                                  : tie_weight_enumerated(w, J, j, p.prefix(j - 1));
          if (J == 4)
            CHECK(a == doctest::Approx(tie_weight_enumerated(w, 4, j, p.prefix(j - 1))).epsilon(1e-13));
          prob *= p.same_block(j - 1, j - 2) ? a : 1.0 - a;
        }
        CHECK(std::abs(prob - prior.probability_of(p)) < 1e-12);
      }
    }
  }
}

TEST_CASE("tie weight errors") {
  CHECK_THROWS_AS(theta_tie_weight(1.0, 1, SetPartition{}), std::out_of_range);
  CHECK_THROWS_AS(theta_tie_weight(1.0, 5, SetPartition{0, 1, 2, 3}), std::out_of_range);
  CHECK_THROWS_AS(theta_tie_weight(1.0, 3, SetPartition{0}), std::invalid_argument);
  CHECK_THROWS_AS(theta_tie_weight(1.0, 4, SetPartition{0, 1, 0}), std::invalid_argument);
}

TEST_CASE("entropy") {
  PartitionDistribution uniform;
  for (const auto& p : enumerate_set_partitions(4)) uniform.entries.push_back({p, 1.0 / 15});
  CHECK(entropy(uniform, 15) == doctest::Approx(1.0));
  PartitionDistribution point;
  for (const auto& p : enumerate_set_partitions(4))
    point.entries.push_back({p, p == SetPartition::finest(4) ? 1.0 : 0.0});
  CHECK(entropy(point, 15) == 0.0);

  // Column of a published posterior table over the 15 partitions.
  const double ci[] = {0.021, 0.002, 0.002, 0.0, 0.001, 0.463, 0.0, 0.146,
                       0.0,   0.0,   0.0,   0.233, 0.0, 0.0, 0.133};
  PartitionDistribution table;
  for (double p : ci) table.entries.push_back({SetPartition{}, p});
  CHECK(std::abs(entropy(table, 15) - 0.501) <= 0.001);
}

TEST_CASE("Binder estimate") {
  Eigen::MatrixXd blocks = Eigen::MatrixXd::Zero(5, 5);
  const SetPartition truth{0, 0, 1, 1, 1};
  for (int i = 0; i < 5; ++i)
    for (int k = 0; k < 5; ++k) blocks(i, k) = truth.same_block(i, k) ? 1.0 : 0.0;
  std::vector<SetPartition> cands{SetPartition::finest(5), truth, SetPartition::coarsest(5)};
  CHECK(binder_estimate(blocks, cands) == truth);
  CHECK(binder_loss(blocks, truth) == 0.0);

  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(5, 5);
  std::vector<SetPartition> two{SetPartition::coarsest(5), SetPartition::finest(5)};
  CHECK(binder_estimate(ones, two) == SetPartition::coarsest(5));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Identity(6, 6);
    for (int i = 0; i < 6; ++i)
      for (int k = i + 1; k < 6; ++k) c(i, k) = c(k, i) = u(rng);
    auto all = enumerate_set_partitions(6);
    REQUIRE(all.size() == 203);
    SetPartition best = all.front();
    for (const auto& p : all)
      if (direct_binder(c, p) < direct_binder(c, best)) best = p;
    CHECK(binder_estimate(c, all) == best);
    for (const auto& p : all) CHECK(binder_loss(c, p) == doctest::Approx(direct_binder(c, p)));
  }
  CHECK_THROWS_AS(binder_estimate(ones, std::vector<SetPartition>{}), std::invalid_argument);
}
