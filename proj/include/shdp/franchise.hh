// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <functional>
#include <vector>

#include "shdp/conjugate.hh"
#include "shdp/random.hh"

namespace shdp {

// Residuals eps[j][i] for customer i of restaurant j.
using Residuals = std::vector<std::vector<double>>;

struct Table {
  int dish = -1;
  int size = 0;
};

// One menu entry serves the pair of dishes (+xi, sigma2) and (-xi, sigma2).
struct Dish {
  int id = 0;
  DishAtom atom;
  int tables = 0;
};

struct Restaurant {
  std::vector<int> table_of;
  // +1 or -1, relative to the stored representative of the table's dish.
  std::vector<int> sign;
  std::vector<Table> tables;

  int customers() const { return static_cast<int>(table_of.size()); }
};

class FranchiseState {
 public:
  FranchiseState() = default;
  // Empty restaurants sized for the given customer counts; every customer is
  // unseated (table -1) until seated.
  FranchiseState(const std::vector<int>& sizes, std::vector<double> gamma, double alpha);

  int num_restaurants() const { return static_cast<int>(restaurants_.size()); }
  int num_dishes() const { return static_cast<int>(menu_.size()); }
  int total_tables() const;
  int total_customers() const;

  const Restaurant& restaurant(int j) const { return restaurants_.at(j); }
  const std::vector<Dish>& menu() const { return menu_; }
  const Dish& dish(int h) const { return menu_.at(h); }
  int dish_of(int j, int i) const;
  // Sign of the customer relative to the positive value of the dish atom.
  int effective_sign(int j, int i) const;
  // Number of tables in restaurant j serving dish h.
  int tables_in(int j, int h) const;

  double gamma(int j) const { return gamma_.at(j); }
  const std::vector<double>& gammas() const { return gamma_; }
  double alpha() const { return alpha_; }
  void set_gamma(int j, double g) { gamma_.at(j) = g; }
  void set_alpha(double a) { alpha_ = a; }
  int next_dish_id() const { return next_dish_id_; }

  int add_dish(const DishAtom& atom);
  void set_atom(int h, const DishAtom& atom) { menu_.at(h).atom = atom; }

  // Detaches customer i; an emptied table is deleted and an emptied dish is
  // dropped from the menu, compacting indices by moving the last entry in.
  void remove_customer(int j, int i);
  void seat_customer(int j, int i, int t, int sign);
  // Opens an empty table serving dish h and returns its index.
  int open_table(int j, int h);
  void set_sign(int j, int i, int sign) { restaurants_.at(j).sign.at(i) = sign; }
  // Reassigns table t; with flip the signs of its customers are negated.
  void set_table_dish(int j, int t, int h, bool flip = false);

  // Full recount of occupancy and dish usage; throws std::logic_error on drift.
  void audit() const;

  // Raw access for deserialization.
  void restore(std::vector<Restaurant> restaurants, std::vector<Dish> menu,
               std::vector<double> gamma, double alpha, int next_dish_id);

 private:
  void drop_table_if_empty(int j, int t);
  void drop_dish_if_unused(int h);

  std::vector<Restaurant> restaurants_;
  std::vector<Dish> menu_;
  std::vector<double> gamma_;
  double alpha_ = 1.0;
  int next_dish_id_ = 0;
};

class StirlingTable {
 public:
  explicit StirlingTable(int nmax);
  int nmax() const { return nmax_; }
  // log |s(n, k)|, -inf where the number is zero.
  double log_abs(int n, int k) const;

 private:
  int nmax_;
  std::vector<double> data_;
};

const StirlingTable& shared_stirling_table();

// P(K = l) for l = 1..n, returned at index l-1.
std::vector<double> antoniak_pmf(int n, double gamma);

using CountMatrix = std::vector<std::vector<int>>;

// Exact partially exchangeable partition probability for counts n[j][h].
// Exponential cost; restricted to at most 12 customers.
double hdp_peppf_log(const CountMatrix& counts, const std::vector<double>& gamma, double alpha);
double shdp_peppf_log(const CountMatrix& plus, const CountMatrix& minus,
                      const std::vector<double>& gamma, double alpha);

FranchiseState crf_generate(const std::vector<double>& gamma, double alpha,
                            const std::vector<int>& sizes,
                            const NormalInverseGammaParams& base, Rng& rng);

// log(0.5 h(eps | +atom) + 0.5 h(eps | -atom)).
double pair_logpdf(double eps, const DishAtom& atom);
// Prior predictive of one residual under the symmetrized base measure.
double base_pair_logpdf(double eps, const NormalInverseGammaParams& base);

// Log weights over the occupied tables of restaurant j followed by a final
// entry for a new table. The customer must already be removed.
std::vector<double> table_full_conditional_log(const FranchiseState& state, int j, double eps,
                                               const NormalInverseGammaParams& base);

// Log weights for the dish of a new table holding one residual: existing
// menu entries then a final entry for a new dish.
std::vector<double> new_table_dish_log(const FranchiseState& state, double eps,
                                       const NormalInverseGammaParams& base);

double sign_full_conditional(const DishAtom& atom, double eps);

// Log weights for reassigning table t of restaurant j, excluding t's own
// contribution to the dish counts. Entry 2h is dish h keeping the current
// signs, 2h+1 dish h with all signs at the table flipped; the last two
// entries open a new dish (current signs, flipped).
std::vector<double> dish_full_conditional_log(const FranchiseState& state, int j, int t,
                                              const Residuals& eps,
                                              const NormalInverseGammaParams& base);

void resample_atoms(FranchiseState& state, const Residuals& eps,
                    const NormalInverseGammaParams& base, Rng& rng);

// One scan over tables, signs, table dishes and atoms.
void sweep_franchise(FranchiseState& state, const Residuals& eps,
                     const NormalInverseGammaParams& base, Rng& rng);

struct SignedCounts {
  CountMatrix plus;
  CountMatrix minus;
};
SignedCounts signed_counts(const FranchiseState& state);

struct WeightedAtom {
  DishAtom atom;
  double weight = 0.0;
};

struct StickBreakingDraw {
  std::vector<WeightedAtom> atoms;
  double tail_mass = 0.0;
};

// Truncated stick-breaking draw of a symmetric DP: each stick is split
// evenly between +xi and -xi.
StickBreakingDraw stick_breaking_sdp(double alpha, const std::function<DishAtom(Rng&)>& base,
                                     int truncation, Rng& rng);

// Predictive law of a new residual in restaurant j.
struct PredictiveMixture {
  std::vector<WeightedAtom> pairs;
  double base_weight = 0.0;
  NormalInverseGammaParams base;

  double logpdf(double eps) const;
};
PredictiveMixture new_customer_predictive(const FranchiseState& state, int j,
                                          const NormalInverseGammaParams& base);

}  // namespace shdp
