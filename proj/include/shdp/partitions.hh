// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace shdp {

// A partition of {0..n-1} stored as a restricted-growth label vector: the
// first element has label 0 and every label is at most one more than the
// largest label seen before it.
class SetPartition {
 public:
  SetPartition() = default;
  // Accepts any non-negative labelling and canonicalizes it.
  explicit SetPartition(std::span<const int> labels);
  SetPartition(std::initializer_list<int> labels);

  static SetPartition finest(int n);
  static SetPartition coarsest(int n);

  int size() const { return static_cast<int>(labels_.size()); }
  int num_blocks() const { return num_blocks_; }
  const std::vector<int>& labels() const { return labels_; }
  int label(int i) const { return labels_.at(i); }
  bool same_block(int a, int b) const { return labels_.at(a) == labels_.at(b); }

  // Blocks in order of their first member, members ascending.
  std::vector<std::vector<int>> blocks() const;
  std::vector<int> block_sizes() const;

  // Restriction to the first len elements.
  SetPartition prefix(int len) const;

  // "{C}{G,M}{S}" style; names default to "1".."n".
  std::string to_string(std::span<const std::string> names = {}) const;

  auto operator<=>(const SetPartition& other) const { return labels_ <=> other.labels_; }
  bool operator==(const SetPartition& other) const { return labels_ == other.labels_; }

 private:
  std::vector<int> labels_;
  int num_blocks_ = 0;
};

struct SetPartitionHash {
  std::size_t operator()(const SetPartition& p) const;
};

struct PartitionDistribution {
  std::vector<std::pair<SetPartition, double>> entries;

  double probability_of(const SetPartition& p) const;
  // Highest-probability entry; ties go to the earliest entry.
  const std::pair<SetPartition, double>& mode() const;
  double total() const;
};

// All Bell(n) partitions of n elements in lexicographic label order.
std::vector<SetPartition> enumerate_set_partitions(int n);

// The 2^(n-1) partitions whose blocks are runs of consecutive elements.
std::vector<SetPartition> enumerate_contiguous_partitions(int n);

bool is_order_consistent(const SetPartition& p);

double dp_eppf_log(double omega, const SetPartition& p);

// Unnormalized weight omega^(k-1) * prod (n_i - 1)! on contiguous partitions, 0 otherwise.
double restricted_weight(double omega, const SetPartition& p);
double restricted_normalizer(double omega, int n);

// Distribution over all Bell(n) partitions with zero mass off the contiguous ones.
PartitionDistribution restricted_prior(double omega, int n);
PartitionDistribution dp_prior(double omega, int n);
PartitionDistribution uniform_contiguous_prior(int n);

// Probability that population j (1-based, 2..4) shares the location of
// population j-1 given the configuration of populations 1..j-1, for four
// ordered populations.
double theta_tie_weight(double omega, int j, const SetPartition& prefix);

// Same quantity for any population count, by summing restricted weights over
// the contiguous completions of the prefix.
double tie_weight_enumerated(double omega, int num_populations, int j,
                             const SetPartition& prefix);

double entropy(const PartitionDistribution& dist, double base);

double binder_loss(const Eigen::MatrixXd& coclust, const SetPartition& candidate);

SetPartition binder_estimate(const Eigen::MatrixXd& coclust,
                             std::span<const SetPartition> candidates);

}  // namespace shdp
