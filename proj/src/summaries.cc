// Apache License, Version 2.0, refer to LICENSE.txt

#include "shdp/summaries.hh"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "shdp/franchise.hh"
#include "shdp/numeric.hh"

namespace shdp {

std::string to_string(ClusterIdentity identity) {
  return identity == ClusterIdentity::signed_dish ? "signed" : "pair";
}

ClusterIdentity parse_cluster_identity(const std::string& text) {
  if (text == "signed") return ClusterIdentity::signed_dish;
  if (text == "pair") return ClusterIdentity::pair;
  throw std::invalid_argument("unknown cluster identity '" + text + "'");
}

namespace {

void require_samples(std::span<const SampleRecord> samples, const char* what) {
  if (samples.empty()) throw std::invalid_argument(std::string(what) + ": no samples");
}

}  // namespace

PartitionDistribution tabulate_partitions(std::span<const SampleRecord> samples, int J) {
  require_samples(samples, "tabulate_partitions");
  std::unordered_map<SetPartition, long, SetPartitionHash> counts;
  for (const auto& s : samples) {
    if (static_cast<int>(s.partition.size()) != J) {
      throw std::invalid_argument("tabulate_partitions: sample has the wrong population count");
    }
    ++counts[SetPartition(s.partition)];
  }
  PartitionDistribution dist;
  const double n = static_cast<double>(samples.size());
  for (auto& p : enumerate_set_partitions(J)) {
    const auto it = counts.find(p);
    dist.entries.emplace_back(std::move(p), it == counts.end() ? 0.0 : it->second / n);
  }
  return dist;
}

std::string OrderedPartition::to_string(std::span<const std::string> names) const {
  const auto blocks = partition.blocks();
  auto block_text = [&](int b) {
    std::string out = "{";
    for (std::size_t k = 0; k < blocks[b].size(); ++k) {
      if (k) out += ',';
      out += names.empty() ? std::to_string(blocks[b][k] + 1) : names[blocks[b][k]];
    }
    return out + "}";
  };
  std::vector<int> order = ascending;
  std::string sep = "<";
  if (!order.empty() && order.front() != 0 && order.back() == 0) {
    std::reverse(order.begin(), order.end());
    sep = ">";
  }
  std::string out;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k) out += sep;
    out += block_text(order[k]);
  }
  return out;
}

std::vector<OrderedPartition> tabulate_ordered_partitions(std::span<const SampleRecord> samples,
                                                          int J) {
  require_samples(samples, "tabulate_ordered_partitions");
  std::map<std::pair<std::vector<int>, std::vector<int>>, long> counts;
  for (const auto& s : samples) {
    if (static_cast<int>(s.partition.size()) != J || static_cast<int>(s.theta.size()) != J) {
      throw std::invalid_argument("tabulate_ordered_partitions: malformed sample");
    }
    const SetPartition p(s.partition);
    std::vector<double> value(p.num_blocks());
    for (int j = J - 1; j >= 0; --j) value[p.label(j)] = s.theta[j];
    std::vector<int> order(p.num_blocks());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return value[a] < value[b]; });
    ++counts[{p.labels(), order}];
  }
  std::vector<OrderedPartition> out;
  const double n = static_cast<double>(samples.size());
  for (const auto& [key, c] : counts) {
    out.push_back(OrderedPartition{SetPartition(key.first), key.second, c / n});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.probability > b.probability;
  });
  return out;
}

std::vector<long> cluster_keys(const SampleRecord& s, ClusterIdentity identity) {
  std::vector<long> keys(s.dish_label.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const long id = s.dish_label[i];
    keys[i] = identity == ClusterIdentity::pair ? id : 2 * id + (s.sign[i] > 0 ? 1 : 0);
  }
  return keys;
}

Eigen::MatrixXd coclustering_matrix(std::span<const SampleRecord> samples,
                                    ClusterIdentity identity) {
  require_samples(samples, "coclustering_matrix");
  const int N = static_cast<int>(samples.front().dish_label.size());
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(N, N);
  for (const auto& s : samples) {
    if (static_cast<int>(s.dish_label.size()) != N) {
      throw std::invalid_argument("coclustering_matrix: samples disagree on patient count");
    }
    const auto keys = cluster_keys(s, identity);
    for (int i = 0; i < N; ++i) {
      for (int k = i + 1; k < N; ++k) {
        if (keys[i] == keys[k]) counts(i, k) += 1.0;
      }
    }
  }
  counts /= static_cast<double>(samples.size());
  Eigen::MatrixXd out = counts + counts.transpose();
  out.diagonal().setOnes();
  return out;
}

std::vector<double> cluster_count_posterior(std::span<const SampleRecord> samples,
                                            ClusterIdentity identity) {
  require_samples(samples, "cluster_count_posterior");
  std::vector<double> pmf;
  for (const auto& s : samples) {
    const auto keys = cluster_keys(s, identity);
    const std::size_t k = std::unordered_set<long>(keys.begin(), keys.end()).size();
    if (pmf.size() <= k) pmf.resize(k + 1, 0.0);
    pmf[k] += 1.0;
  }
  for (double& p : pmf) p /= static_cast<double>(samples.size());
  return pmf;
}

double quantile(std::vector<double> draws, double p) {
  if (draws.empty()) throw std::invalid_argument("quantile: no draws");
  std::sort(draws.begin(), draws.end());
  const double h = (draws.size() - 1) * std::clamp(p, 0.0, 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, draws.size() - 1);
  return draws[lo] + (h - lo) * (draws[hi] - draws[lo]);
}

double effective_sample_size(std::span<const double> draws) {
  const std::size_t n = draws.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = std::accumulate(draws.begin(), draws.end(), 0.0) / n;
  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) acc += (draws[t] - mean) * (draws[t + lag] - mean);
    return acc / n;
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return static_cast<double>(n);
  // Initial positive sequence estimator.
  double sum = 0.0;
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double pair = autocov(2 * k) + autocov(2 * k + 1);
    if (pair <= 0.0) break;
    sum += pair;
  }
  const double tau = std::max(1.0, 2.0 * sum / c0 - 1.0);
  return n / tau;
}

std::vector<CredibleInterval> theta_credible_intervals(std::span<const SampleRecord> samples,
                                                       double level, const Standardization& st,
                                                       int m) {
  require_samples(samples, "theta_credible_intervals");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("credible level must be in (0,1)");
  const std::size_t J = samples.front().theta.size();
  std::vector<CredibleInterval> out(J);
  for (std::size_t j = 0; j < J; ++j) {
    std::vector<double> draws;
    draws.reserve(samples.size());
    for (const auto& s : samples) draws.push_back(to_raw_scale(st, m, s.theta.at(j)));
    auto& ci = out[j];
    ci.mean = std::accumulate(draws.begin(), draws.end(), 0.0) / draws.size();
    ci.ess = effective_sample_size(draws);
    ci.lower = quantile(draws, 0.5 * (1.0 - level));
    ci.upper = quantile(draws, 0.5 * (1.0 + level));
  }
  return out;
}

std::vector<double> default_density_grid(const Dataset& raw, int m, int points,
                                         double padding_sd) {
  if (points < 2) throw std::invalid_argument("density grid needs at least 2 points");
  double lo = INFINITY, hi = -INFINITY, sum = 0.0, sum_sq = 0.0;
  int n = 0;
  for (const auto& pop : raw.values.at(m)) {
    for (double v : pop) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
      sum_sq += v * v;
      ++n;
    }
  }
  const double mean = sum / n;
  const double sd = n > 1 ? std::sqrt(std::max(0.0, (sum_sq - n * mean * mean) / (n - 1))) : 1.0;
  lo -= padding_sd * sd;
  hi += padding_sd * sd;
  std::vector<double> grid(points);
  for (int g = 0; g < points; ++g) grid[g] = lo + (hi - lo) * g / (points - 1);
  return grid;
}

std::vector<double> density_estimate(std::span<const SampleRecord> samples, int j,
                                     const std::vector<int>& sizes,
                                     const NormalInverseGammaParams& base,
                                     std::span<const double> grid, const Standardization& st,
                                     int m) {
  require_samples(samples, "density_estimate");
  const double mu = st.applied ? st.mean.at(m) : 0.0;
  const double sd = st.applied ? st.sd.at(m) : 1.0;
  const int offset = std::accumulate(sizes.begin(), sizes.begin() + j, 0);
  const int nj = sizes.at(j);
  const NigPredictive base_pred(base);
  std::vector<double> density(grid.size(), 0.0);
  std::vector<double> terms;
  for (const auto& s : samples) {
    const int H = static_cast<int>(s.dishes.size());
    std::vector<int> seated(H, 0);
    int total_tables = 0;
    for (const auto& d : s.dishes) total_tables += d.tables;
    for (int i = 0; i < nj; ++i) {
      const int id = s.dish_label.at(offset + i);
      for (int h = 0; h < H; ++h) {
        if (s.dishes[h].id == id) {
          ++seated[h];
          break;
        }
      }
    }
    const double g = s.gamma.at(j);
    const double new_table = g / (nj + g);
    const double menu_total = total_tables + s.alpha;
    std::vector<double> lw(H);
    std::vector<DishAtom> atoms(H);
    for (int h = 0; h < H; ++h) {
      lw[h] = std::log(seated[h] / (nj + g) + new_table * s.dishes[h].tables / menu_total);
      atoms[h] = DishAtom{s.dishes[h].xi, s.dishes[h].sigma2};
    }
    const double lbase = std::log(new_table * s.alpha / menu_total);
    const double theta = s.theta.at(j);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double e = (grid[k] - mu) / sd - theta;
      terms.clear();
      for (int h = 0; h < H; ++h) terms.push_back(lw[h] + pair_logpdf(e, atoms[h]));
      terms.push_back(lbase + log_add_exp(base_pred.logpdf(e), base_pred.logpdf(-e)) - kLog2);
      density[k] += std::exp(log_sum_exp(terms));
    }
  }
  for (double& d : density) d /= samples.size() * sd;
  return density;
}

std::vector<int> Dendrogram::leaf_order() const {
  if (leaves == 0) return {};
  if (merges.empty()) {
    std::vector<int> order(leaves);
    std::iota(order.begin(), order.end(), 0);
    return order;
  }
  std::vector<int> order;
  std::vector<int> stack{leaves + static_cast<int>(merges.size()) - 1};
  while (!stack.empty()) {
    const int node = stack.back();
    stack.pop_back();
    if (node < leaves) {
      order.push_back(node);
      continue;
    }
    const auto& m = merges[node - leaves];
    stack.push_back(m.right);
    stack.push_back(m.left);
  }
  return order;
}

SetPartition Dendrogram::cut(double threshold) const {
  std::vector<int> parent(leaves + merges.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t k = 0; k < merges.size(); ++k) {
    const int node = leaves + static_cast<int>(k);
    if (merges[k].similarity < threshold) continue;
    parent[find(merges[k].left)] = node;
    parent[find(merges[k].right)] = node;
  }
  std::vector<int> labels(leaves);
  for (int i = 0; i < leaves; ++i) labels[i] = find(i);
  return SetPartition(labels);
}

Dendrogram average_linkage(const Eigen::MatrixXd& similarity) {
  const int n = static_cast<int>(similarity.rows());
  if (similarity.cols() != n) throw std::invalid_argument("average_linkage: matrix not square");
  Dendrogram tree;
  tree.leaves = n;
  Eigen::MatrixXd sim = similarity;
  std::vector<int> node(n), size(n, 1);
  std::iota(node.begin(), node.end(), 0);
  std::vector<bool> active(n, true);
  for (int step = 0; step + 1 < n; ++step) {
    int a = -1, b = -1;
    double best = -INFINITY;
    for (int i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (int k = i + 1; k < n; ++k) {
        if (active[k] && sim(i, k) > best) {
          best = sim(i, k);
          a = i;
          b = k;
        }
      }
    }
    tree.merges.push_back({node[a], node[b], best});
    for (int c = 0; c < n; ++c) {
      if (!active[c] || c == a || c == b) continue;
      const double v = (size[a] * sim(a, c) + size[b] * sim(b, c)) / (size[a] + size[b]);
      sim(a, c) = sim(c, a) = v;
    }
    size[a] += size[b];
    active[b] = false;
    node[a] = n + step;
  }
  return tree;
}

SetPartition binder_point_estimate(const Eigen::MatrixXd& coclust,
                                   std::span<const SampleRecord> samples,
                                   ClusterIdentity identity) {
  std::unordered_set<SetPartition, SetPartitionHash> seen;
  std::vector<SetPartition> candidates;
  for (const auto& s : samples) {
    const auto keys = cluster_keys(s, identity);
    std::unordered_map<long, int> relabel;
    std::vector<int> labels(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
      labels[i] = relabel.try_emplace(keys[i], static_cast<int>(relabel.size())).first->second;
    }
    SetPartition p(labels);
    if (seen.insert(p).second) candidates.push_back(std::move(p));
  }
  const auto tree = average_linkage(coclust);
  for (double t : {0.3, 0.5, 0.7}) {
    SetPartition p = tree.cut(t);
    if (seen.insert(p).second) candidates.push_back(std::move(p));
  }
  return binder_estimate(coclust, candidates);
}

ResponseSummary summarize_response(std::span<const SampleRecord> samples, const Dataset& raw,
                                   const Standardization& st, int m,
                                   const NormalInverseGammaParams& base,
                                   const SummaryOptions& options) {
  require_samples(samples, "summarize_response");
  const int J = raw.num_populations();
  ResponseSummary out;
  out.response = raw.responses.at(m);
  out.partitions = tabulate_partitions(samples, J);
  out.ordered = tabulate_ordered_partitions(samples, J);
  const double bell = static_cast<double>(out.partitions.entries.size());
  out.entropy = bell > 1.0 ? entropy(out.partitions, bell) : 0.0;
  out.coclust = coclustering_matrix(samples, options.identity);
  out.cluster_counts = cluster_count_posterior(samples, options.identity);
  out.binder = binder_point_estimate(out.coclust, samples, options.identity);
  out.intervals = theta_credible_intervals(samples, options.level, st, m);
  out.grid = default_density_grid(raw, m, options.grid_points, options.grid_padding_sd);
  for (int j = 0; j < J; ++j) {
    out.density.push_back(density_estimate(samples, j, raw.sizes(), base, out.grid, st, m));
  }
  return out;
}

}  // namespace shdp
