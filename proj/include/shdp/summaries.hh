// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shdp/conjugate.hh"
#include "shdp/data.hh"
#include "shdp/partitions.hh"
#include "shdp/records.hh"

namespace shdp {

// signed_dish: a patient's cluster is its dish together with the sign of its
// error component, so the two halves of a pair count separately.
// pair: a dish pair is one cluster.
enum class ClusterIdentity { signed_dish, pair };

std::string to_string(ClusterIdentity identity);
ClusterIdentity parse_cluster_identity(const std::string& text);

struct SummaryOptions {
  ClusterIdentity identity = ClusterIdentity::pair;
  double level = 0.95;
  int grid_points = 512;
  double grid_padding_sd = 3.0;
};

// Frequencies over all Bell(J) partitions in enumeration order.
PartitionDistribution tabulate_partitions(std::span<const SampleRecord> samples, int J);

struct OrderedPartition {
  SetPartition partition;
  // Block indices sorted by increasing location.
  std::vector<int> ascending;
  double probability = 0.0;

  // "{C,G,M}>{S}" or "{C}<{G,M}<{S}", listing population 1's block first
  // whenever a monotone reading allows it.
  std::string to_string(std::span<const std::string> names = {}) const;
};

// Sorted by decreasing probability, ties by partition then ordering.
std::vector<OrderedPartition> tabulate_ordered_partitions(std::span<const SampleRecord> samples,
                                                          int J);

// Per-patient cluster keys of one sample under the given identity.
std::vector<long> cluster_keys(const SampleRecord& s, ClusterIdentity identity);

Eigen::MatrixXd coclustering_matrix(std::span<const SampleRecord> samples,
                                    ClusterIdentity identity);

// pmf[k] = posterior probability of k clusters.
std::vector<double> cluster_count_posterior(std::span<const SampleRecord> samples,
                                            ClusterIdentity identity);

struct CredibleInterval {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double ess = 0.0;
};

// Equal-tailed interpolated quantile of unsorted draws.
double quantile(std::vector<double> draws, double p);
double effective_sample_size(std::span<const double> draws);

// Intervals for every population, mapped back to the raw scale.
std::vector<CredibleInterval> theta_credible_intervals(std::span<const SampleRecord> samples,
                                                       double level, const Standardization& st,
                                                       int m);

// Rao-Blackwellized predictive density of a new observation in population j
// on a raw-scale grid.
std::vector<double> density_estimate(std::span<const SampleRecord> samples, int j,
                                     const std::vector<int>& sizes,
                                     const NormalInverseGammaParams& base,
                                     std::span<const double> grid, const Standardization& st,
                                     int m);

std::vector<double> default_density_grid(const Dataset& raw, int m, int points,
                                         double padding_sd);

// Average-linkage agglomeration on 1 - similarity.
struct Dendrogram {
  struct Merge {
    int left;
    int right;
    double similarity;
  };
  int leaves = 0;
  // Node ids below leaves are patients; merge k creates node leaves + k.
  std::vector<Merge> merges;

  std::vector<int> leaf_order() const;
  // Clusters formed by the merges whose similarity is at least threshold.
  SetPartition cut(double threshold) const;
};
Dendrogram average_linkage(const Eigen::MatrixXd& similarity);

// Binder point estimate over visited patient partitions plus dendrogram cuts
// at similarity 0.3, 0.5 and 0.7.
SetPartition binder_point_estimate(const Eigen::MatrixXd& coclust,
                                   std::span<const SampleRecord> samples,
                                   ClusterIdentity identity);

struct ResponseSummary {
  std::string response;
  PartitionDistribution partitions;
  std::vector<OrderedPartition> ordered;
  double entropy = 0.0;
  Eigen::MatrixXd coclust;
  std::vector<double> cluster_counts;
  SetPartition binder;
  std::vector<CredibleInterval> intervals;
  std::vector<double> grid;
  // density[j][g]
  std::vector<std::vector<double>> density;
};

// samples must all belong to response m. raw is the dataset on its original
// scale; st the standardization applied before fitting.
ResponseSummary summarize_response(std::span<const SampleRecord> samples, const Dataset& raw,
                                   const Standardization& st, int m,
                                   const NormalInverseGammaParams& base,
                                   const SummaryOptions& options);

}  // namespace shdp
