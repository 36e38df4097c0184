// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <vector>

#include "shdp/data.hh"
#include "shdp/sampler.hh"

namespace shdp {

struct DishRecord {
  int id = 0;
  double xi = 0.0;
  double sigma2 = 1.0;
  int tables = 0;
};

// Projection of one response of a retained chain state. Patient vectors use
// the flat patient index of the dataset.
struct SampleRecord {
  long iter = 0;
  int chain = 0;
  int m = 0;
  std::vector<double> theta;
  std::vector<int> partition;
  std::vector<int> dish_label;
  // Sign of each patient's error component relative to +|xi| of its dish.
  std::vector<int> sign;
  double omega = 1.0;
  std::vector<double> gamma;
  double alpha = 1.0;
  std::vector<DishRecord> dishes;
};

std::vector<SampleRecord> make_records(const ChainState& state, const Dataset& data, int chain);

}  // namespace shdp
