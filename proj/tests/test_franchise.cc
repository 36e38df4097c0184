// Apache License, Version 2.0, refer to LICENSE.txt

#include <cmath>
#include <map>
#include <numbers>

#include "doctest.h"
#include "shdp/franchise.hh"
#include "shdp/numeric.hh"
#include "shdp/partitions.hh"

using namespace shdp;

namespace {

double npdf(double x, double m, double v) {
  return std::exp(-(x - m) * (x - m) / (2 * v)) / std::sqrt(2 * std::numbers::pi * v);
}

double student_t_pdf(const NormalInverseGammaParams& p, double x) {
  const double nu = 2.0 * p.a;
  const double s2 = p.b * (p.tau + 1.0) / (p.a * p.tau);
  const double d = x - p.mu0;
  return std::exp(std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2) -
                  0.5 * std::log(nu * std::numbers::pi * s2) -
                  (nu + 1) / 2 * std::log1p(d * d / (nu * s2)));
}

double pair_pdf(double e, const DishAtom& a) {
  return 0.5 * npdf(e, a.xi, a.sigma2) + 0.5 * npdf(e, -a.xi, a.sigma2);
}

// Customer layout (restaurant, index) to dish counts for a labelling of all customers.
CountMatrix counts_of(const std::vector<int>& sizes, const SetPartition& p) {
  CountMatrix c(sizes.size(), std::vector<int>(p.num_blocks(), 0));
  int flat = 0;
  for (std::size_t j = 0; j < sizes.size(); ++j)
    for (int i = 0; i < sizes[j]; ++i) ++c[j][p.label(flat++)];
  return c;
}

// Two restaurants: r0 holds customers 0,1 at a table of dish A and customer 2
// at a table of dish B; customer 3 of r0 is unseated. r1 seats its customer at dish A.
FranchiseState hand_state() {
  FranchiseState s({4, 1}, {1.3, 0.9}, 0.7);
  const int a = s.add_dish(DishAtom{1.0, 1.0});
  const int b = s.add_dish(DishAtom{-2.0, 0.5});
  const int t0 = s.open_table(0, a);
  s.seat_customer(0, 0, t0, 1);
  s.seat_customer(0, 1, t0, -1);
  s.seat_customer(0, 2, s.open_table(0, b), 1);
  s.seat_customer(1, 0, s.open_table(1, a), 1);
  return s;
}

void check_same_state(const FranchiseState& x, const FranchiseState& y) {
  REQUIRE(x.num_restaurants() == y.num_restaurants());
  for (int j = 0; j < x.num_restaurants(); ++j) {
    const auto &a = x.restaurant(j), &b = y.restaurant(j);
    CHECK(a.table_of == b.table_of);
    CHECK(a.sign == b.sign);
    REQUIRE(a.tables.size() == b.tables.size());
    for (std::size_t t = 0; t < a.tables.size(); ++t) {
      CHECK(a.tables[t].dish == b.tables[t].dish);
      CHECK(a.tables[t].size == b.tables[t].size);
    }
  }
  REQUIRE(x.num_dishes() == y.num_dishes());
  for (int h = 0; h < x.num_dishes(); ++h) {
    CHECK(x.dish(h).id == y.dish(h).id);
    CHECK(x.dish(h).tables == y.dish(h).tables);
    CHECK(x.dish(h).atom.xi == y.dish(h).atom.xi);
  }
}

}  // namespace

TEST_CASE("unsigned Stirling numbers of the first kind") {
  StirlingTable s(60);
  CHECK(std::exp(s.log_abs(4, 2)) == doctest::Approx(11.0));
  CHECK(std::exp(s.log_abs(0, 0)) == 1.0);
  CHECK(s.log_abs(3, 0) == kNegInf);
  for (int n = 1; n <= 60; ++n) CHECK(s.log_abs(n, n) == doctest::Approx(0.0));
  for (int n = 1; n <= 12; ++n) {
    double total = 0.0;
    for (int k = 1; k <= n; ++k) total += std::exp(s.log_abs(n, k));
    CHECK(total == doctest::Approx(std::tgamma(n + 1.0)).epsilon(1e-12));
  }
  CHECK(std::isfinite(shared_stirling_table().log_abs(200, 3)));
}

TEST_CASE("Antoniak distribution") {
  CHECK(antoniak_pmf(1, 2.5) == std::vector<double>{1.0});
  auto p2 = antoniak_pmf(2, 1.0);
  CHECK(p2[0] == doctest::Approx(0.5));
  CHECK(p2[1] == doctest::Approx(0.5));
  for (double g : {0.1, 1.0, 10.0}) {
    for (int n = 1; n <= 50; ++n) {
      double total = 0.0;
      for (double p : antoniak_pmf(n, g)) total += p;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("HDP partition law") {
  const double g = 1.7, a = 0.6;
  CHECK(hdp_peppf_log({{1}}, {g}, a) == doctest::Approx(0.0));
  // Two customers of one restaurant share a dish through a shared table or
  // through two tables that picked the same dish.
  const double same = 1 / (1 + g) + g / (1 + g) / (1 + a);
  CHECK(std::exp(hdp_peppf_log({{2}}, {g}, a)) == doctest::Approx(same));
  CHECK(std::exp(hdp_peppf_log({{1, 1}}, {g}, a)) == doctest::Approx(g / (1 + g) * a / (1 + a)));
  const double shared = std::exp(hdp_peppf_log({{1}, {1}}, {g, 0.4}, a));
  const double distinct = std::exp(hdp_peppf_log({{1, 0}, {0, 1}}, {g, 0.4}, a));
  CHECK(shared + distinct == doctest::Approx(1.0));
  CHECK(shared == doctest::Approx(1 / (1 + a)));

  for (const auto& sizes : std::vector<std::vector<int>>{{4}, {2, 1}, {3, 1}, {2, 2}, {1, 1, 2}}) {
    int n = 0;
    for (int s : sizes) n += s;
    std::vector<double> gam{1.3, 0.5, 2.0};
    gam.resize(sizes.size());
    double total = 0.0;
    for (const auto& p : enumerate_set_partitions(n))
      total += std::exp(hdp_peppf_log(counts_of(sizes, p), gam, 0.8));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(hdp_peppf_log({{7, 6}}, {1.0}, 1.0), std::length_error);
}

TEST_CASE("signed partition law") {
  CHECK(shdp_peppf_log({{1}}, {{0}}, {1.0}, 1.0) == doctest::Approx(std::log(0.5)));
  CHECK(shdp_peppf_log({{0}}, {{1}}, {1.0}, 1.0) == doctest::Approx(std::log(0.5)));
  const CountMatrix plus{{2, 0}, {1, 1}}, minus{{1, 1}, {0, 0}};
  const std::vector<double> g{1.2, 0.7};
  CHECK(shdp_peppf_log(plus, minus, g, 0.9) == shdp_peppf_log(minus, plus, g, 0.9));
  const CountMatrix both{{3, 1}, {1, 1}};
  CHECK(shdp_peppf_log(plus, minus, g, 0.9) ==
        doctest::Approx(hdp_peppf_log(both, g, 0.9) - 6 * kLog2).epsilon(1e-14));

  // Summing the signed law over all 2^N sign patterns of an unsigned layout.
  const std::vector<int> sizes{2, 1};
  for (const auto& p : enumerate_set_partitions(3)) {
    double total = 0.0;
    for (int mask = 0; mask < 8; ++mask) {
      CountMatrix pl(2, std::vector<int>(p.num_blocks(), 0)), mi = pl;
      int flat = 0;
      for (int j = 0; j < 2; ++j)
        for (int i = 0; i < sizes[j]; ++i, ++flat)
          ((mask >> flat) & 1 ? pl : mi)[j][p.label(flat)] += 1;
      total += std::exp(shdp_peppf_log(pl, mi, g, 0.9));
    }
    CHECK(total == doctest::Approx(std::exp(hdp_peppf_log(counts_of(sizes, p), g, 0.9))));
  }
}

TEST_CASE("generative franchise") {
  Rng rng = make_rng(77);
  const NormalInverseGammaParams base{0, 1, 2, 4};
  auto one = crf_generate({1.0}, 1.0, {1}, base, rng);
  CHECK(one.total_tables() == 1);
  CHECK(one.num_dishes() == 1);
  int plus = 0;
  for (int r = 0; r < 4000; ++r) plus += crf_generate({1.0}, 1.0, {1}, base, rng).restaurant(0).sign[0] > 0;
  CHECK(std::abs(plus / 4000.0 - 0.5) < 3 * std::sqrt(0.25 / 4000));

  int all_distinct = 0;
  const int reps = 2000;
  for (int r = 0; r < reps; ++r) {
    auto s = crf_generate({1e6, 1e6}, 1e6, {3, 2}, base, rng);
    all_distinct += s.num_dishes() == 5 && s.total_tables() == 5;
  }
  CHECK(all_distinct >= reps * (1 - 1e-3));

  // Dish partitions of customers (r0: 0,1; r1: 2) against the exact law.
  const std::vector<int> sizes{2, 1};
  const std::vector<double> g{1.3, 0.6};
  const double alpha = 0.8;
  std::map<std::vector<int>, int> freq;
  const int n = 50000;
  for (int r = 0; r < n; ++r) {
    auto s = crf_generate(g, alpha, sizes, base, rng);
    s.audit();
    std::vector<int> labels{s.dish(s.dish_of(0, 0)).id, s.dish(s.dish_of(0, 1)).id,
                            s.dish(s.dish_of(1, 0)).id};
    ++freq[SetPartition(labels).labels()];
  }
  for (const auto& p : enumerate_set_partitions(3)) {
    const double prob = std::exp(hdp_peppf_log(counts_of(sizes, p), g, alpha));
    const double se = std::sqrt(prob * (1 - prob) / n);
    CHECK(std::abs(freq[p.labels()] / double(n) - prob) < 3 * se);
  }
}

TEST_CASE("table full conditional") {
  const NormalInverseGammaParams base{0, 1, 2, 4};
  FranchiseState empty({1}, {1.0}, 1.0);
  auto lw = table_full_conditional_log(empty, 0, 0.3, base);
  REQUIRE(lw.size() == 1);
  CHECK(lw[0] == doctest::Approx(std::log(student_t_pdf(base, 0.3))));

  CHECK(pair_logpdf(0.8, DishAtom{0.0, 1.0}) == doctest::Approx(std::log(npdf(0.8, 0, 1))));

  auto s = hand_state();
  for (double e : {-2.5, 0.1, 1.7}) {
    auto w = table_full_conditional_log(s, 0, e, base);
    REQUIRE(w.size() == 3);
    const DishAtom A{1.0, 1.0}, B{-2.0, 0.5};
    const double ell = 3.0, alpha = 0.7, gamma = 1.3;
    CHECK(std::exp(w[0]) == doctest::Approx(2 * pair_pdf(e, A)));
    CHECK(std::exp(w[1]) == doctest::Approx(1 * pair_pdf(e, B)));
    const double fresh = gamma * (2 / (ell + alpha) * pair_pdf(e, A) + 1 / (ell + alpha) * pair_pdf(e, B) +
                                  alpha / (ell + alpha) * student_t_pdf(base, e));
    CHECK(std::exp(w[2]) == doctest::Approx(fresh));

    // The predictive of a new customer is the normalized table conditional.
    auto mix = new_customer_predictive(s, 0, base);
    CHECK(mix.logpdf(e) == doctest::Approx(log_sum_exp(w) - std::log(3 + gamma)));
  }
  auto dishes = new_table_dish_log(s, 0.4, base);
  CHECK(dishes.size() == 3);
  CHECK(std::exp(dishes[0]) == doctest::Approx(2 * pair_pdf(0.4, DishAtom{1.0, 1.0})));
}

TEST_CASE("sign full conditional") {
  CHECK(sign_full_conditional(DishAtom{0.0, 2.0}, 1.3) == 0.5);
  CHECK(sign_full_conditional(DishAtom{1.0, 1.0}, 1.0) == doctest::Approx(0.8807970779778823));
  for (double e : {-3.0, 0.2, 4.4})
    CHECK(sign_full_conditional(DishAtom{0.7, 0.4}, e) ==
          doctest::Approx(1.0 - sign_full_conditional(DishAtom{0.7, 0.4}, -e)));
  CHECK(sign_full_conditional(DishAtom{50.0, 0.01}, 50.0) == 1.0);
  CHECK(sign_full_conditional(DishAtom{50.0, 0.01}, -50.0) == 0.0);
}

TEST_CASE("dish full conditional") {
  const NormalInverseGammaParams base{0, 1, 2, 4};
  FranchiseState s({1}, {1.0}, 1.0);
  const int h = s.add_dish(DishAtom{0.5, 1.0});
  s.seat_customer(0, 0, s.open_table(0, h), 1);
  const Residuals eps{{0.9}};
  auto lw = dish_full_conditional_log(s, 0, 0, eps, base);
  REQUIRE(lw.size() == 4);
  auto p = normalize_log_weights(lw);
  CHECK(p[0] == 0.0);
  CHECK(p[1] == 0.0);
  CHECK(p[2] + p[3] == doctest::Approx(1.0));

  Rng rng = make_rng(8);
  auto big = crf_generate({1.0, 2.0}, 1.5, {4, 3}, base, rng);
  Residuals e{{0.3, -1.2, 2.2, 0.1}, {-0.4, 1.8, 0.5}};
  auto before = dish_full_conditional_log(big, 1, 0, e, base);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < big.restaurant(j).customers(); ++i) {
      e[j][i] = -e[j][i];
      big.set_sign(j, i, -big.restaurant(j).sign[i]);
    }
  auto after = dish_full_conditional_log(big, 1, 0, e, base);
  REQUIRE(before.size() == after.size());
  for (std::size_t k = 0; k < before.size(); ++k) CHECK(before[k] == after[k]);
}

TEST_CASE("removing and reseating a customer restores the state") {
  auto s = hand_state();
  s.seat_customer(0, 3, 1, 1);
  const auto copy = s;
  s.remove_customer(0, 1);
  s.seat_customer(0, 1, 0, -1);
  check_same_state(s, copy);
  s.audit();

  // Emptying a table removes it, and its dish when unused elsewhere.
  s.remove_customer(0, 3);
  s.remove_customer(0, 2);
  CHECK(s.restaurant(0).tables.size() == 1);
  CHECK(s.num_dishes() == 1);
  s.seat_customer(0, 2, 0, 1);
  s.seat_customer(0, 3, 0, 1);
  s.audit();
}

TEST_CASE("atom resampling") {
  const NormalInverseGammaParams base{0, 1, 2, 4};
  FranchiseState s({1000}, {1.0}, 1.0);
  const int t = s.open_table(0, s.add_dish(DishAtom{0.0, 1.0}));
  for (int i = 0; i < 1000; ++i) s.seat_customer(0, i, t, 1);
  Rng rng = make_rng(2);
  resample_atoms(s, Residuals{std::vector<double>(1000, 1.0)}, base, rng);
  CHECK(std::abs(s.dish(0).atom.xi - 1.0) < 0.05);

  FranchiseState lone({0}, {1.0}, 1.0);
  lone.add_dish(DishAtom{5.0, 5.0});
  const NormalInverseGammaParams tight{0.2, 1e8, 1e8, 3e8};
  resample_atoms(lone, Residuals(1), tight, rng);
  CHECK(lone.dish(0).atom.xi == doctest::Approx(0.2).epsilon(1e-3));
  CHECK(lone.dish(0).atom.sigma2 == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("stick breaking") {
  Rng rng = make_rng(6);
  auto base = [](Rng& r) { return DishAtom{sample_normal(r, 0, 2), 0.5}; };
  auto one = stick_breaking_sdp(1.3, base, 1, rng);
  REQUIRE(one.atoms.size() == 2);
  CHECK(one.atoms[0].weight == one.atoms[1].weight);
  CHECK(one.atoms[0].atom.xi == -one.atoms[1].atom.xi);
  CHECK(2 * one.atoms[0].weight + one.tail_mass == doctest::Approx(1.0).epsilon(1e-15));

  auto draw = stick_breaking_sdp(2.0, base, 60, rng);
  double total = draw.tail_mass;
  std::vector<double> w;
  for (const auto& a : draw.atoms) {
    total += a.weight;
    w.push_back(a.weight);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int r = 0; r < n; ++r) {
    const auto& a = draw.atoms[sample_categorical(rng, w)].atom;
    const double e = sample_normal(rng, a.xi, std::sqrt(a.sigma2));
    sum += e;
    sum_sq += e * e;
  }
  const double mean = sum / n, se = std::sqrt((sum_sq / n - mean * mean) / n);
  CHECK(std::abs(mean) < 3 * se);
  CHECK_THROWS_AS(stick_breaking_sdp(1.0, base, 0, rng), std::invalid_argument);
}

TEST_CASE("new-customer predictive is symmetric and normalized") {
  const NormalInverseGammaParams base{0, 1, 2, 4};
  Rng rng = make_rng(12);
  for (int rep = 0; rep < 5; ++rep) {
    auto s = crf_generate({0.8, 1.5}, 1.1, {6, 4}, base, rng);
    for (int j = 0; j < 2; ++j) {
      auto mix = new_customer_predictive(s, j, base);
      double wsum = mix.base_weight;
      for (const auto& p : mix.pairs) wsum += p.weight;
      CHECK(wsum == doctest::Approx(1.0).epsilon(1e-13));
      for (double e : {0.1, 1.3, 4.0}) CHECK(mix.logpdf(e) == mix.logpdf(-e));
      double integral = 0.0;
      const double lo = -60, hi = 60;
      const int m = 24000;
      const double h = (hi - lo) / m;
      for (int k = 0; k <= m; ++k)
        integral += (k == 0 || k == m ? 0.5 : 1.0) * std::exp(mix.logpdf(lo + k * h)) * h;
      CHECK(std::abs(integral - 1.0) < 1e-2);
    }
  }
}

TEST_CASE("franchise sweeps keep counts consistent") {
  const NormalInverseGammaParams base{0, 1, 2, 4};
  Rng rng = make_rng(21);
  auto s = crf_generate({1.0, 1.0, 1.0}, 1.0, {8, 5, 6}, base, rng);
  Residuals eps(3);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < s.restaurant(j).customers(); ++i)
      eps[j].push_back(sample_normal(rng, i % 2 ? 2.0 : -2.0, 0.5));
  for (int it = 0; it < 200; ++it) {
    sweep_franchise(s, eps, base, rng);
    CHECK_NOTHROW(s.audit());
    for (int j = 0; j < 3; ++j) {
      int seated = 0;
      for (const auto& t : s.restaurant(j).tables) {
        CHECK(t.size >= 1);
        seated += t.size;
      }
      CHECK(seated == s.restaurant(j).customers());
    }
    int tables = 0;
    for (int h = 0; h < s.num_dishes(); ++h) {
      CHECK(s.dish(h).tables >= 1);
      int counted = 0;
      for (int j = 0; j < 3; ++j) counted += s.tables_in(j, h);
      CHECK(counted == s.dish(h).tables);
      tables += counted;
    }
    CHECK(tables == s.total_tables());
  }
  auto counts = signed_counts(s);
  int total = 0;
  for (int j = 0; j < 3; ++j)
    for (int h = 0; h < s.num_dishes(); ++h) total += counts.plus[j][h] + counts.minus[j][h];
  CHECK(total == s.total_customers());
  CHECK_THROWS_AS(sweep_franchise(s, Residuals(2), base, rng), std::invalid_argument);
}
