// Apache License, Version 2.0, refer to LICENSE.txt

#include "shdp/records.hh"

namespace shdp {

std::vector<SampleRecord> make_records(const ChainState& state, const Dataset& data, int chain) {
  std::vector<SampleRecord> out;
  const int J = data.num_populations();
  for (int m = 0; m < static_cast<int>(state.responses.size()); ++m) {
    const auto& r = state.responses[m];
    const auto& f = r.franchise;
    SampleRecord rec;
    rec.iter = state.iteration;
    rec.chain = chain;
    rec.m = m;
    rec.omega = state.omega;
    rec.partition = r.partition.labels();
    for (int j = 0; j < J; ++j) {
      rec.theta.push_back(r.theta(j));
      for (int i = 0; i < f.restaurant(j).customers(); ++i) {
        rec.dish_label.push_back(f.dish(f.dish_of(j, i)).id);
        rec.sign.push_back(f.effective_sign(j, i));
      }
    }
    rec.gamma = f.gammas();
    rec.alpha = f.alpha();
    for (const auto& d : f.menu()) {
      rec.dishes.push_back(DishRecord{d.id, d.atom.xi, d.atom.sigma2, d.tables});
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace shdp
