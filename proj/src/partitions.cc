// Apache License, Version 2.0, refer to LICENSE.txt

#include "shdp/partitions.hh"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "shdp/numeric.hh"

namespace shdp {

SetPartition::SetPartition(std::span<const int> labels) {
  std::unordered_map<int, int> relabel;
  labels_.reserve(labels.size());
  for (int l : labels) {
    if (l < 0) throw std::invalid_argument("SetPartition: negative label");
    auto [it, inserted] = relabel.try_emplace(l, static_cast<int>(relabel.size()));
    labels_.push_back(it->second);
  }
  num_blocks_ = static_cast<int>(relabel.size());
}

SetPartition::SetPartition(std::initializer_list<int> labels)
    : SetPartition(std::span<const int>(labels.begin(), labels.size())) {}

SetPartition SetPartition::finest(int n) {
  std::vector<int> l(n);
  for (int i = 0; i < n; ++i) l[i] = i;
  return SetPartition(l);
}

SetPartition SetPartition::coarsest(int n) {
  std::vector<int> l(n, 0);
  return SetPartition(l);
}

std::vector<std::vector<int>> SetPartition::blocks() const {
  std::vector<std::vector<int>> out(num_blocks_);
  for (int i = 0; i < size(); ++i) out[labels_[i]].push_back(i);
  return out;
}

std::vector<int> SetPartition::block_sizes() const {
  std::vector<int> out(num_blocks_, 0);
  for (int l : labels_) ++out[l];
  return out;
}

SetPartition SetPartition::prefix(int len) const {
  if (len < 0 || len > size()) throw std::out_of_range("SetPartition::prefix");
  return SetPartition(std::span<const int>(labels_.data(), len));
}

std::string SetPartition::to_string(std::span<const std::string> names) const {
  if (!names.empty() && static_cast<int>(names.size()) < size()) {
    throw std::invalid_argument("SetPartition::to_string: too few names");
  }
  std::string out;
  for (const auto& block : blocks()) {
    out += '{';
    for (std::size_t k = 0; k < block.size(); ++k) {
      if (k) out += ',';
      out += names.empty() ? std::to_string(block[k] + 1) : names[block[k]];
    }
    out += '}';
  }
  return out;
}

std::size_t SetPartitionHash::operator()(const SetPartition& p) const {
  std::size_t h = 1469598103934665603ull;
  for (int l : p.labels()) {
    h ^= static_cast<std::size_t>(l) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return h;
}

double PartitionDistribution::probability_of(const SetPartition& p) const {
  for (const auto& [q, prob] : entries) {
    if (q == p) return prob;
  }
  return 0.0;
}

const std::pair<SetPartition, double>& PartitionDistribution::mode() const {
  if (entries.empty()) throw std::invalid_argument("PartitionDistribution::mode: empty");
  std::size_t best = 0;
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].second > entries[best].second) best = i;
  }
  return entries[best];
}

double PartitionDistribution::total() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.second;
  return s;
}

std::vector<SetPartition> enumerate_set_partitions(int n) {
  if (n < 1 || n > 8) throw std::out_of_range("enumerate_set_partitions: n must be in 1..8");
  std::vector<SetPartition> out;
  std::vector<int> labels(n, 0);
  std::vector<int> maxes(n, 0);
  // Odometer over restricted-growth strings.
  while (true) {
    out.emplace_back(labels);
    int i = n - 1;
    while (i > 0 && labels[i] == maxes[i - 1] + 1) --i;
    if (i == 0) break;
    ++labels[i];
    maxes[i] = std::max(maxes[i - 1], labels[i]);
    for (int k = i + 1; k < n; ++k) {
      labels[k] = 0;
      maxes[k] = maxes[i];
    }
  }
  return out;
}

std::vector<SetPartition> enumerate_contiguous_partitions(int n) {
  if (n < 1 || n > 30) throw std::out_of_range("enumerate_contiguous_partitions: n must be in 1..30");
  std::vector<SetPartition> out;
  const unsigned count = 1u << (n - 1);
  // Bit k set means a new block starts at element k+1. Iterating cuts from the
  // last element keeps the result in lexicographic label order.
  for (unsigned code = 0; code < count; ++code) {
    std::vector<int> labels(n, 0);
    for (int i = 1; i < n; ++i) {
      const bool cut = (code >> (n - 1 - i)) & 1u;
      labels[i] = labels[i - 1] + (cut ? 1 : 0);
    }
    out.emplace_back(labels);
  }
  return out;
}

bool is_order_consistent(const SetPartition& p) {
  const auto& l = p.labels();
  for (std::size_t i = 1; i < l.size(); ++i) {
    if (l[i] != l[i - 1] && l[i] != l[i - 1] + 1) return false;
  }
  return true;
}

namespace {

void require_positive_omega(double omega) {
  if (!(omega > 0.0) || !std::isfinite(omega)) {
    throw std::domain_error("omega must be positive and finite");
  }
}

double log_block_factorials(const SetPartition& p) {
  double acc = 0.0;
  for (int s : p.block_sizes()) acc += log_factorial(s - 1);
  return acc;
}

}  // namespace

double dp_eppf_log(double omega, const SetPartition& p) {
  require_positive_omega(omega);
  return p.num_blocks() * std::log(omega) - log_rising_factorial(omega, p.size()) +
         log_block_factorials(p);
}

double restricted_weight(double omega, const SetPartition& p) {
  require_positive_omega(omega);
  if (!is_order_consistent(p)) return 0.0;
  return std::exp((p.num_blocks() - 1) * std::log(omega) + log_block_factorials(p));
}

double restricted_normalizer(double omega, int n) {
  double total = 0.0;
  for (const auto& p : enumerate_contiguous_partitions(n)) total += restricted_weight(omega, p);
  return total;
}

PartitionDistribution restricted_prior(double omega, int n) {
  require_positive_omega(omega);
  PartitionDistribution dist;
  const double z = restricted_normalizer(omega, n);
  for (auto& p : enumerate_set_partitions(n)) {
    const double w = restricted_weight(omega, p) / z;
    dist.entries.emplace_back(std::move(p), w);
  }
  return dist;
}

PartitionDistribution dp_prior(double omega, int n) {
  require_positive_omega(omega);
  PartitionDistribution dist;
  for (auto& p : enumerate_set_partitions(n)) {
    const double w = std::exp(dp_eppf_log(omega, p));
    dist.entries.emplace_back(std::move(p), w);
  }
  return dist;
}

PartitionDistribution uniform_contiguous_prior(int n) {
  PartitionDistribution dist;
  const double w = 1.0 / static_cast<double>(1u << (n - 1));
  for (auto& p : enumerate_set_partitions(n)) {
    const double prob = is_order_consistent(p) ? w : 0.0;
    dist.entries.emplace_back(std::move(p), prob);
  }
  return dist;
}

double theta_tie_weight(double omega, int j, const SetPartition& prefix) {
  require_positive_omega(omega);
  if (j < 2 || j > 4) throw std::out_of_range("theta_tie_weight: j must be in 2..4");
  if (prefix.size() != j - 1) throw std::invalid_argument("theta_tie_weight: prefix length must be j-1");
  if (!is_order_consistent(prefix)) {
    throw std::invalid_argument("theta_tie_weight: prefix is not order consistent");
  }
  const double w = omega;
  switch (j) {
    case 2:
      return (w * w + 3 * w + 6) / ((w + 2) * (w * w + w + 3));
    case 3:
      if (prefix.same_block(0, 1)) return (2 * w + 6) / (w * w + 3 * w + 6);
      return (w + 2) / (w * w + 2 * w + 2);
    default:
      if (prefix.same_block(0, 1) && prefix.same_block(1, 2)) return 3 / (w + 3);
      if (prefix.same_block(1, 2)) return 2 / (w + 2);
      return 1 / (w + 1);
  }
}

double tie_weight_enumerated(double omega, int num_populations, int j,
                             const SetPartition& prefix) {
  require_positive_omega(omega);
  if (j < 2 || j > num_populations) throw std::out_of_range("tie_weight_enumerated: j out of range");
  if (prefix.size() != j - 1) throw std::invalid_argument("tie_weight_enumerated: prefix length must be j-1");
  double tie = 0.0;
  double all = 0.0;
  for (const auto& p : enumerate_contiguous_partitions(num_populations)) {
    if (p.prefix(j - 1) != prefix) continue;
    const double w = restricted_weight(omega, p);
    all += w;
    if (p.same_block(j - 2, j - 1)) tie += w;
  }
  if (all <= 0.0) throw std::invalid_argument("tie_weight_enumerated: prefix is not order consistent");
  return tie / all;
}

double entropy(const PartitionDistribution& dist, double base) {
  if (!(base > 0.0) || base == 1.0) throw std::domain_error("entropy: invalid base");
  double h = 0.0;
  for (const auto& [p, prob] : dist.entries) {
    if (prob > 0.0) h -= prob * std::log(prob);
  }
  return h / std::log(base);
}

double binder_loss(const Eigen::MatrixXd& coclust, const SetPartition& candidate) {
  const int n = candidate.size();
  if (coclust.rows() != n || coclust.cols() != n) {
    throw std::invalid_argument("binder_loss: matrix size does not match candidate");
  }
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int k = i + 1; k < n; ++k) {
      const double together = candidate.same_block(i, k) ? 1.0 : 0.0;
      loss += std::abs(together - coclust(i, k));
    }
  }
  return loss;
}

SetPartition binder_estimate(const Eigen::MatrixXd& coclust,
                             std::span<const SetPartition> candidates) {
  if (candidates.empty()) throw std::invalid_argument("binder_estimate: no candidates");
  std::size_t best = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const double loss = binder_loss(coclust, candidates[c]);
    if (loss < best_loss) {
      best_loss = loss;
      best = c;
    }
  }
  return candidates[best];
}

}  // namespace shdp
