// Apache License, Version 2.0, refer to LICENSE.txt

#include "shdp/franchise.hh"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "shdp/numeric.hh"

namespace shdp {

FranchiseState::FranchiseState(const std::vector<int>& sizes, std::vector<double> gamma,
                               double alpha)
    : gamma_(std::move(gamma)), alpha_(alpha) {
  if (gamma_.size() != sizes.size()) {
    throw std::invalid_argument("FranchiseState: one gamma per restaurant required");
  }
  restaurants_.resize(sizes.size());
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    if (sizes[j] < 0) throw std::invalid_argument("FranchiseState: negative size");
    restaurants_[j].table_of.assign(sizes[j], -1);
    restaurants_[j].sign.assign(sizes[j], 1);
  }
}

int FranchiseState::total_tables() const {
  int n = 0;
  for (const auto& r : restaurants_) n += static_cast<int>(r.tables.size());
  return n;
}

int FranchiseState::total_customers() const {
  int n = 0;
  for (const auto& r : restaurants_) n += r.customers();
  return n;
}

int FranchiseState::dish_of(int j, int i) const {
  const auto& r = restaurants_.at(j);
  const int t = r.table_of.at(i);
  return t < 0 ? -1 : r.tables[t].dish;
}

int FranchiseState::effective_sign(int j, int i) const {
  const int h = dish_of(j, i);
  if (h < 0) return 0;
  const int s = restaurants_[j].sign[i];
  return menu_[h].atom.xi < 0.0 ? -s : s;
}

int FranchiseState::tables_in(int j, int h) const {
  int n = 0;
  for (const auto& t : restaurants_.at(j).tables) n += (t.dish == h);
  return n;
}

int FranchiseState::add_dish(const DishAtom& atom) {
  menu_.push_back(Dish{next_dish_id_++, atom, 0});
  return static_cast<int>(menu_.size()) - 1;
}

void FranchiseState::remove_customer(int j, int i) {
  auto& r = restaurants_.at(j);
  const int t = r.table_of.at(i);
  if (t < 0) throw std::logic_error("remove_customer: customer not seated");
  r.table_of[i] = -1;
  --r.tables[t].size;
  drop_table_if_empty(j, t);
}

void FranchiseState::seat_customer(int j, int i, int t, int sign) {
  auto& r = restaurants_.at(j);
  if (r.table_of.at(i) >= 0) throw std::logic_error("seat_customer: customer already seated");
  ++r.tables.at(t).size;
  r.table_of[i] = t;
  r.sign[i] = sign;
}

int FranchiseState::open_table(int j, int h) {
  auto& r = restaurants_.at(j);
  ++menu_.at(h).tables;
  r.tables.push_back(Table{h, 0});
  return static_cast<int>(r.tables.size()) - 1;
}

void FranchiseState::set_table_dish(int j, int t, int h, bool flip) {
  auto& r = restaurants_.at(j);
  auto& table = r.tables.at(t);
  const int old = table.dish;
  ++menu_.at(h).tables;
  if (old >= 0) --menu_[old].tables;
  table.dish = h;
  if (flip) {
    for (int i = 0; i < r.customers(); ++i) {
      if (r.table_of[i] == t) r.sign[i] = -r.sign[i];
    }
  }
  if (old >= 0 && old != h) drop_dish_if_unused(old);
}

void FranchiseState::drop_table_if_empty(int j, int t) {
  auto& r = restaurants_[j];
  if (r.tables[t].size > 0) return;
  const int h = r.tables[t].dish;
  const int last = static_cast<int>(r.tables.size()) - 1;
  if (t != last) {
    r.tables[t] = r.tables[last];
    for (int& x : r.table_of) {
      if (x == last) x = t;
    }
  }
  r.tables.pop_back();
  if (h >= 0) {
    --menu_[h].tables;
    drop_dish_if_unused(h);
  }
}

void FranchiseState::drop_dish_if_unused(int h) {
  if (menu_[h].tables > 0) return;
  const int last = static_cast<int>(menu_.size()) - 1;
  if (h != last) {
    menu_[h] = menu_[last];
    for (auto& r : restaurants_) {
      for (auto& t : r.tables) {
        if (t.dish == last) t.dish = h;
      }
    }
  }
  menu_.pop_back();
}

void FranchiseState::audit() const {
  std::vector<int> dish_tables(menu_.size(), 0);
  for (std::size_t j = 0; j < restaurants_.size(); ++j) {
    const auto& r = restaurants_[j];
    std::vector<int> occupancy(r.tables.size(), 0);
    for (int i = 0; i < r.customers(); ++i) {
      const int t = r.table_of[i];
      if (t < 0 || t >= static_cast<int>(r.tables.size())) {
        throw std::logic_error("audit: customer " + std::to_string(i) + " of restaurant " +
                               std::to_string(j) + " has no valid table");
      }
      if (r.sign[i] != 1 && r.sign[i] != -1) throw std::logic_error("audit: invalid sign");
      ++occupancy[t];
    }
    for (std::size_t t = 0; t < r.tables.size(); ++t) {
      if (occupancy[t] != r.tables[t].size || occupancy[t] == 0) {
        throw std::logic_error("audit: table occupancy drift in restaurant " + std::to_string(j));
      }
      const int h = r.tables[t].dish;
      if (h < 0 || h >= static_cast<int>(menu_.size())) {
        throw std::logic_error("audit: table without a valid dish");
      }
      ++dish_tables[h];
    }
  }
  for (std::size_t h = 0; h < menu_.size(); ++h) {
    if (dish_tables[h] != menu_[h].tables || dish_tables[h] == 0) {
      throw std::logic_error("audit: dish table count drift for dish id " +
                             std::to_string(menu_[h].id));
    }
    if (!(menu_[h].atom.sigma2 > 0.0)) throw std::logic_error("audit: non-positive sigma2");
  }
}

void FranchiseState::restore(std::vector<Restaurant> restaurants, std::vector<Dish> menu,
                             std::vector<double> gamma, double alpha, int next_dish_id) {
  restaurants_ = std::move(restaurants);
  menu_ = std::move(menu);
  gamma_ = std::move(gamma);
  alpha_ = alpha;
  next_dish_id_ = next_dish_id;
}

StirlingTable::StirlingTable(int nmax) : nmax_(nmax) {
  if (nmax < 0 || nmax > 2000) throw std::out_of_range("StirlingTable: nmax must be in 0..2000");
  data_.assign(static_cast<std::size_t>(nmax + 1) * (nmax + 2) / 2, kNegInf);
  auto at = [](int n, int k) { return static_cast<std::size_t>(n) * (n + 1) / 2 + k; };
  data_[at(0, 0)] = 0.0;
  for (int n = 0; n < nmax; ++n) {
    const double log_n = n > 0 ? std::log(static_cast<double>(n)) : kNegInf;
    for (int k = 1; k <= n + 1; ++k) {
      const double stay = k <= n ? log_n + data_[at(n, k)] : kNegInf;
      data_[at(n + 1, k)] = log_add_exp(stay, data_[at(n, k - 1)]);
    }
  }
}

double StirlingTable::log_abs(int n, int k) const {
  if (n < 0 || n > nmax_) throw std::out_of_range("StirlingTable: n out of range");
  if (k < 0 || k > n) return kNegInf;
  return data_[static_cast<std::size_t>(n) * (n + 1) / 2 + k];
}

const StirlingTable& shared_stirling_table() {
  static const StirlingTable table(256);
  return table;
}

std::vector<double> antoniak_pmf(int n, double gamma) {
  if (n < 1) throw std::domain_error("antoniak_pmf: n must be positive");
  if (!(gamma > 0.0)) throw std::domain_error("antoniak_pmf: gamma must be positive");
  std::unique_ptr<StirlingTable> local;
  const StirlingTable* table = &shared_stirling_table();
  if (n > table->nmax()) {
    local = std::make_unique<StirlingTable>(n);
    table = local.get();
  }
  std::vector<double> pmf(n);
  const double norm = log_rising_factorial(gamma, n);
  for (int l = 1; l <= n; ++l) {
    pmf[l - 1] = std::exp(l * std::log(gamma) - norm + table->log_abs(n, l));
  }
  return pmf;
}

namespace {

struct Cell {
  int j;
  int h;
  int n;
};

void peppf_recurse(const std::vector<Cell>& cells, std::size_t pos, std::vector<int>& dish_tables,
                   double partial, const std::vector<double>& gamma, double alpha,
                   double& acc) {
  if (pos == cells.size()) {
    int k = 0;
    int total = 0;
    double term = partial;
    for (int l : dish_tables) {
      if (l == 0) continue;
      ++k;
      total += l;
      term += log_factorial(l - 1);
    }
    term += k * std::log(alpha) - log_rising_factorial(alpha, total);
    acc = log_add_exp(acc, term);
    return;
  }
  const Cell& c = cells[pos];
  const auto& stirling = shared_stirling_table();
  for (int l = 1; l <= c.n; ++l) {
    dish_tables[c.h] += l;
    peppf_recurse(cells, pos + 1, dish_tables,
                  partial + l * std::log(gamma[c.j]) + stirling.log_abs(c.n, l), gamma, alpha,
                  acc);
    dish_tables[c.h] -= l;
  }
}

}  // namespace

double hdp_peppf_log(const CountMatrix& counts, const std::vector<double>& gamma, double alpha) {
  if (counts.size() != gamma.size()) {
    throw std::invalid_argument("hdp_peppf_log: one gamma per population required");
  }
  std::vector<Cell> cells;
  std::size_t dishes = 0;
  int total = 0;
  double prefactor = 0.0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    int nj = 0;
    dishes = std::max(dishes, counts[j].size());
    for (std::size_t h = 0; h < counts[j].size(); ++h) {
      const int n = counts[j][h];
      if (n < 0) throw std::invalid_argument("hdp_peppf_log: negative count");
      if (n > 0) cells.push_back({static_cast<int>(j), static_cast<int>(h), n});
      nj += n;
    }
    total += nj;
    prefactor -= log_rising_factorial(gamma[j], nj);
  }
  if (total > 12) throw std::length_error("hdp_peppf_log: exhaustive sum limited to 12 customers");
  if (total == 0) return 0.0;
  std::vector<int> dish_tables(dishes, 0);
  double acc = kNegInf;
  peppf_recurse(cells, 0, dish_tables, 0.0, gamma, alpha, acc);
  return prefactor + acc;
}

double shdp_peppf_log(const CountMatrix& plus, const CountMatrix& minus,
                      const std::vector<double>& gamma, double alpha) {
  if (plus.size() != minus.size()) throw std::invalid_argument("shdp_peppf_log: shape mismatch");
  CountMatrix joint(plus.size());
  int total = 0;
  for (std::size_t j = 0; j < plus.size(); ++j) {
    const std::size_t width = std::max(plus[j].size(), minus[j].size());
    joint[j].assign(width, 0);
    for (std::size_t h = 0; h < width; ++h) {
      const int p = h < plus[j].size() ? plus[j][h] : 0;
      const int m = h < minus[j].size() ? minus[j][h] : 0;
      joint[j][h] = p + m;
      total += p + m;
    }
  }
  return hdp_peppf_log(joint, gamma, alpha) - total * kLog2;
}

FranchiseState crf_generate(const std::vector<double>& gamma, double alpha,
                            const std::vector<int>& sizes,
                            const NormalInverseGammaParams& base, Rng& rng) {
  FranchiseState state(sizes, gamma, alpha);
  std::vector<double> w;
  for (int j = 0; j < static_cast<int>(sizes.size()); ++j) {
    for (int i = 0; i < sizes[j]; ++i) {
      const auto& tables = state.restaurant(j).tables;
      w.clear();
      for (const auto& t : tables) w.push_back(t.size);
      w.push_back(gamma[j]);
      int t = sample_categorical(rng, w);
      if (t == static_cast<int>(tables.size())) {
        w.clear();
        for (const auto& d : state.menu()) w.push_back(d.tables);
        w.push_back(alpha);
        int h = sample_categorical(rng, w);
        if (h == state.num_dishes()) h = state.add_dish(sample_nig(base, rng));
        t = state.open_table(j, h);
      }
      state.seat_customer(j, i, t, sample_bernoulli(rng, 0.5) ? 1 : -1);
    }
  }
  return state;
}

double pair_logpdf(double eps, const DishAtom& atom) {
  return log_add_exp(normal_logpdf(eps, atom.xi, atom.sigma2),
                     normal_logpdf(eps, -atom.xi, atom.sigma2)) -
         kLog2;
}

double base_pair_logpdf(double eps, const NormalInverseGammaParams& base) {
  return log_add_exp(nig_predictive_logpdf(base, eps), nig_predictive_logpdf(base, -eps)) - kLog2;
}

std::vector<double> new_table_dish_log(const FranchiseState& state, double eps,
                                       const NormalInverseGammaParams& base) {
  std::vector<double> lw;
  lw.reserve(state.num_dishes() + 1);
  for (const auto& d : state.menu()) {
    lw.push_back(std::log(static_cast<double>(d.tables)) + pair_logpdf(eps, d.atom));
  }
  lw.push_back(std::log(state.alpha()) + base_pair_logpdf(eps, base));
  return lw;
}

std::vector<double> table_full_conditional_log(const FranchiseState& state, int j, double eps,
                                               const NormalInverseGammaParams& base) {
  const auto& r = state.restaurant(j);
  std::vector<double> lw;
  lw.reserve(r.tables.size() + 1);
  for (const auto& t : r.tables) {
    lw.push_back(std::log(static_cast<double>(t.size)) +
                 pair_logpdf(eps, state.dish(t.dish).atom));
  }
  const double denom = std::log(state.total_tables() + state.alpha());
  const auto dish_lw = new_table_dish_log(state, eps, base);
  lw.push_back(std::log(state.gamma(j)) + log_sum_exp(dish_lw) - denom);
  return lw;
}

double sign_full_conditional(const DishAtom& atom, double eps) {
  // log h(eps|+atom) - log h(eps|-atom) = 2 eps xi / sigma2.
  const double d = 2.0 * eps * atom.xi / atom.sigma2;
  if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

namespace {

GaussianStats table_signed_stats(const FranchiseState& state, int j, int t,
                                 const Residuals& eps) {
  const auto& r = state.restaurant(j);
  GaussianStats s;
  for (int i = 0; i < r.customers(); ++i) {
    if (r.table_of[i] == t) s.add(r.sign[i] * eps[j][i]);
  }
  return s;
}

GaussianStats flipped(GaussianStats s) {
  s.sum = -s.sum;
  return s;
}

void check_residual_shape(const FranchiseState& state, const Residuals& eps) {
  if (static_cast<int>(eps.size()) != state.num_restaurants()) {
    throw std::invalid_argument("residuals: restaurant count mismatch");
  }
  for (int j = 0; j < state.num_restaurants(); ++j) {
    if (static_cast<int>(eps[j].size()) != state.restaurant(j).customers()) {
      throw std::invalid_argument("residuals: customer count mismatch");
    }
  }
}

}  // namespace

std::vector<double> dish_full_conditional_log(const FranchiseState& state, int j, int t,
                                              const Residuals& eps,
                                              const NormalInverseGammaParams& base) {
  const int own = state.restaurant(j).tables.at(t).dish;
  const GaussianStats keep = table_signed_stats(state, j, t, eps);
  const GaussianStats flip = flipped(keep);
  std::vector<double> lw;
  lw.reserve(2 * state.num_dishes() + 2);
  for (int h = 0; h < state.num_dishes(); ++h) {
    const Dish& d = state.dish(h);
    const int others = d.tables - (h == own ? 1 : 0);
    if (others == 0) {
      lw.push_back(kNegInf);
      lw.push_back(kNegInf);
      continue;
    }
    const double lc = std::log(static_cast<double>(others));
    lw.push_back(lc + gaussian_loglik(keep, d.atom));
    lw.push_back(lc + gaussian_loglik(flip, d.atom));
  }
  const double la = std::log(state.alpha());
  lw.push_back(la + nig_marginal_loglik(base, keep));
  lw.push_back(la + nig_marginal_loglik(base, flip));
  return lw;
}

void resample_atoms(FranchiseState& state, const Residuals& eps,
                    const NormalInverseGammaParams& base, Rng& rng) {
  check_residual_shape(state, eps);
  std::vector<GaussianStats> stats(state.num_dishes());
  for (int j = 0; j < state.num_restaurants(); ++j) {
    const auto& r = state.restaurant(j);
    for (int i = 0; i < r.customers(); ++i) {
      stats[r.tables[r.table_of[i]].dish].add(r.sign[i] * eps[j][i]);
    }
  }
  for (int h = 0; h < state.num_dishes(); ++h) {
    state.set_atom(h, sample_nig(nig_update(base, stats[h]), rng));
  }
}

namespace {

void sample_sign(FranchiseState& state, int j, int i, double e, Rng& rng) {
  const DishAtom& atom = state.dish(state.dish_of(j, i)).atom;
  state.set_sign(j, i, sample_bernoulli(rng, sign_full_conditional(atom, e)) ? 1 : -1);
}

int new_dish_from_residual(FranchiseState& state, const GaussianStats& keep,
                           const NormalInverseGammaParams& base, Rng& rng, bool& flip) {
  const double lp = nig_marginal_loglik(base, keep);
  const double lm = nig_marginal_loglik(base, flipped(keep));
  const double p_keep = 1.0 / (1.0 + std::exp(lm - lp));
  flip = !sample_bernoulli(rng, p_keep);
  return state.add_dish(sample_nig(nig_update(base, flip ? flipped(keep) : keep), rng));
}

}  // namespace

void sweep_franchise(FranchiseState& state, const Residuals& eps,
                     const NormalInverseGammaParams& base, Rng& rng) {
  check_residual_shape(state, eps);
  for (int j = 0; j < state.num_restaurants(); ++j) {
    for (int i = 0; i < state.restaurant(j).customers(); ++i) {
      const double e = eps[j][i];
      state.remove_customer(j, i);
      const auto lw = table_full_conditional_log(state, j, e, base);
      int t = sample_log_categorical(rng, lw);
      if (t == static_cast<int>(lw.size()) - 1) {
        const auto dlw = new_table_dish_log(state, e, base);
        int h = sample_log_categorical(rng, dlw);
        if (h == state.num_dishes()) {
          GaussianStats one;
          one.add(e);
          bool unused_flip = false;
          h = new_dish_from_residual(state, one, base, rng, unused_flip);
        }
        t = state.open_table(j, h);
      }
      state.seat_customer(j, i, t, 1);
      sample_sign(state, j, i, e, rng);
    }
  }
  for (int j = 0; j < state.num_restaurants(); ++j) {
    const int tables = static_cast<int>(state.restaurant(j).tables.size());
    for (int t = 0; t < tables; ++t) {
      const auto lw = dish_full_conditional_log(state, j, t, eps, base);
      const int k = sample_log_categorical(rng, lw);
      const int menu_choices = 2 * state.num_dishes();
      if (k < menu_choices) {
        state.set_table_dish(j, t, k / 2, k % 2 == 1);
      } else {
        const bool flip = k == menu_choices + 1;
        GaussianStats s = table_signed_stats(state, j, t, eps);
        if (flip) s = flipped(s);
        const int h = state.add_dish(sample_nig(nig_update(base, s), rng));
        state.set_table_dish(j, t, h, flip);
      }
    }
  }
  resample_atoms(state, eps, base, rng);
}

SignedCounts signed_counts(const FranchiseState& state) {
  SignedCounts c;
  const int J = state.num_restaurants();
  c.plus.assign(J, std::vector<int>(state.num_dishes(), 0));
  c.minus.assign(J, std::vector<int>(state.num_dishes(), 0));
  for (int j = 0; j < J; ++j) {
    const auto& r = state.restaurant(j);
    for (int i = 0; i < r.customers(); ++i) {
      const int h = r.tables[r.table_of[i]].dish;
      (r.sign[i] > 0 ? c.plus : c.minus)[j][h] += 1;
    }
  }
  return c;
}

StickBreakingDraw stick_breaking_sdp(double alpha, const std::function<DishAtom(Rng&)>& base,
                                     int truncation, Rng& rng) {
  if (truncation < 1) throw std::invalid_argument("stick_breaking_sdp: truncation must be >= 1");
  StickBreakingDraw draw;
  double remaining = 1.0;
  for (int h = 0; h < truncation; ++h) {
    const double v = sample_beta(rng, 1.0, alpha);
    const double w = v * remaining;
    DishAtom atom = base(rng);
    draw.atoms.push_back({atom, 0.5 * w});
    draw.atoms.push_back({DishAtom{-atom.xi, atom.sigma2}, 0.5 * w});
    remaining *= 1.0 - v;
  }
  draw.tail_mass = remaining;
  return draw;
}

double PredictiveMixture::logpdf(double eps) const {
  std::vector<double> terms;
  terms.reserve(pairs.size() + 1);
  for (const auto& p : pairs) {
    if (p.weight > 0.0) terms.push_back(std::log(p.weight) + pair_logpdf(eps, p.atom));
  }
  if (base_weight > 0.0) terms.push_back(std::log(base_weight) + base_pair_logpdf(eps, base));
  return log_sum_exp(terms);
}

PredictiveMixture new_customer_predictive(const FranchiseState& state, int j,
                                          const NormalInverseGammaParams& base) {
  PredictiveMixture mix;
  mix.base = base;
  const auto& r = state.restaurant(j);
  std::vector<int> seated(state.num_dishes(), 0);
  int nj = 0;
  for (int i = 0; i < r.customers(); ++i) {
    if (r.table_of[i] < 0) continue;
    ++seated[r.tables[r.table_of[i]].dish];
    ++nj;
  }
  const double g = state.gamma(j);
  const double new_table = g / (nj + g);
  const double menu_total = state.total_tables() + state.alpha();
  for (int h = 0; h < state.num_dishes(); ++h) {
    const double w = seated[h] / (nj + g) + new_table * state.dish(h).tables / menu_total;
    mix.pairs.push_back({state.dish(h).atom, w});
  }
  mix.base_weight = new_table * state.alpha() / menu_total;
  return mix;
}

}  // namespace shdp
