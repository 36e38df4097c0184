// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace shdp {

// Raised for malformed input; the CLI maps it to exit status 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Standardization {
  bool applied = false;
  std::vector<double> mean;
  std::vector<double> sd;
};

struct Dataset {
  // Populations in severity order.
  std::vector<std::string> populations;
  std::vector<std::string> responses;
  std::vector<std::vector<std::string>> patients;
  // values[m][j][i]: response m of patient i in population j.
  std::vector<std::vector<std::vector<double>>> values;
  Standardization standardization;

  int num_populations() const { return static_cast<int>(populations.size()); }
  int num_responses() const { return static_cast<int>(responses.size()); }
  std::vector<int> sizes() const;
  int total_patients() const;
  // Flat patient index: populations in order, patients in order within each.
  int flat_index(int j, int i) const;

  void validate() const;
};

struct CsvSchema {
  std::string patient_col = "patient";
  std::string population_col = "population";
  std::string response_col = "response";
  std::string value_col = "value";
};

// Long-format CSV, one row per (patient, response). Population order is taken
// from population_order when given, otherwise from first appearance; response
// order likewise. Patients are sorted by id within each population so that
// row order never matters.
Dataset load_csv(const std::string& path, const CsvSchema& schema = {},
                 const std::vector<std::string>& population_order = {},
                 const std::vector<std::string>& response_order = {});

void write_csv(const Dataset& ds, const std::string& path, const CsvSchema& schema = {});

// Pooled per-response centering and scaling by the sample standard deviation.
Dataset standardize(const Dataset& ds);
Dataset destandardize(const Dataset& ds);

// Maps a location or value on the standardized scale back to the raw scale.
double to_raw_scale(const Standardization& s, int m, double z);

// Generators: "main" and "dgp1".."dgp5". Every response is drawn
// independently from the same design.
Dataset simulate(const std::string& dgp, const std::vector<int>& sizes, std::uint64_t seed,
                 int num_responses = 1);

std::vector<std::string> known_dgps();

// Analytic population means of a generator.
std::vector<double> dgp_means(const std::string& dgp);

}  // namespace shdp
