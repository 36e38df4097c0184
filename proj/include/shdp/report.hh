// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shdp/data.hh"
#include "shdp/summaries.hh"

namespace shdp {

// Heatmap of a co-clustering matrix with rows and columns in the given order.
// Boundaries (positions in the order) get a dividing line.
std::string coclustering_svg(const Eigen::MatrixXd& coclust, const std::vector<int>& order,
                             const std::vector<int>& boundaries, const std::string& title);

// Writes the full set of CSV and SVG outputs for the summaries into dir.
// File names: partitions.csv, map_partitions.csv, ordered_partitions.csv,
// cluster_counts.csv, credible_intervals.csv, binder.csv, and per response
// coclust_<r>.csv, coclust_<r>_population.svg, coclust_<r>_similarity.svg,
// density_<r>.csv.
void write_summary_outputs(const std::string& dir, const Dataset& raw,
                           const std::vector<ResponseSummary>& summaries);

// Response names made safe for file names.
std::string file_stem(const std::string& name);

}  // namespace shdp
