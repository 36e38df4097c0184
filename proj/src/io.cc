// Apache License, Version 2.0, refer to LICENSE.txt

#include "shdp/io.hh"

#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>
#include <stdexcept>

namespace shdp {

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw DataError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw DataError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Json gaussian_json(const GaussianParams& g) { return {{"mean", g.mean}, {"variance", g.variance}}; }

GaussianParams gaussian_from(const Json& j, const std::string& where) {
  reject_unknown(j, {"mean", "variance"}, where);
  GaussianParams g;
  read_opt(j, "mean", g.mean);
  read_opt(j, "variance", g.variance);
  return g;
}

Json nig_json(const NormalInverseGammaParams& p) {
  return {{"mu0", p.mu0}, {"tau", p.tau}, {"a", p.a}, {"b", p.b}};
}

NormalInverseGammaParams nig_from(const Json& j, const std::string& where) {
  reject_unknown(j, {"mu0", "tau", "a", "b"}, where);
  NormalInverseGammaParams p;
  read_opt(j, "mu0", p.mu0);
  read_opt(j, "tau", p.tau);
  read_opt(j, "a", p.a);
  read_opt(j, "b", p.b);
  return p;
}

Json gamma_json(const GammaPrior& g) { return {{"shape", g.shape}, {"rate", g.rate}}; }

GammaPrior gamma_from(const Json& j, const std::string& where) {
  reject_unknown(j, {"shape", "rate"}, where);
  GammaPrior g;
  read_opt(j, "shape", g.shape);
  read_opt(j, "rate", g.rate);
  return g;
}

}  // namespace

Json to_json(const RunConfig& c) {
  Json j;
  j["populations"] = c.populations;
  j["responses"] = c.responses;
  j["csv"] = {{"patient_col", c.csv.patient_col},
              {"population_col", c.csv.population_col},
              {"response_col", c.csv.response_col},
              {"value_col", c.csv.value_col}};
  j["prior_mode"] = to_string(c.model.prior_mode);
  j["theta_update"] = to_string(c.model.theta_update);
  j["location_prior"] = gaussian_json(c.model.location_prior);
  j["base_measure"] = nig_json(c.model.base);
  Json lp = Json::array(), bm = Json::array();
  for (const auto& g : c.model.location_prior_by_response) lp.push_back(gaussian_json(g));
  for (const auto& b : c.model.base_by_response) bm.push_back(nig_json(b));
  j["location_prior_by_response"] = lp;
  j["base_measure_by_response"] = bm;
  j["omega_prior"] = gamma_json(c.model.omega_prior);
  j["gamma_prior"] = gamma_json(c.model.gamma_prior);
  j["alpha_prior"] = gamma_json(c.model.alpha_prior);
  j["standardize"] = c.model.standardize;
  j["tie_gamma"] = c.model.tie_gamma;
  j["mcmc"] = {{"iterations", c.mcmc.iterations},
               {"burn_in", c.mcmc.burn_in},
               {"thin", c.mcmc.thin},
               {"seed", c.mcmc.seed},
               {"chains", c.chains},
               {"audit_interval", c.mcmc.audit_interval},
               {"omega_pool_size", c.mcmc.omega_pool_size},
               {"checkpoint_interval", c.mcmc.checkpoint_interval},
               {"parallel_responses", c.mcmc.parallel_responses}};
  j["summary"] = {{"cluster_identity", to_string(c.summary.identity)},
                  {"credible_level", c.summary.level},
                  {"grid_points", c.summary.grid_points},
                  {"grid_padding_sd", c.summary.grid_padding_sd}};
  return j;
}

RunConfig run_config_from_json(const Json& j) {
  reject_unknown(j,
                 {"populations", "responses", "csv", "prior_mode", "theta_update",
                  "location_prior", "base_measure", "location_prior_by_response",
                  "base_measure_by_response", "omega_prior", "gamma_prior", "alpha_prior",
                  "standardize", "tie_gamma", "mcmc", "summary"},
                 "config");
  RunConfig c;
  try {
    read_opt(j, "populations", c.populations);
    read_opt(j, "responses", c.responses);
    if (j.contains("csv")) {
      const auto& s = j.at("csv");
      reject_unknown(s, {"patient_col", "population_col", "response_col", "value_col"}, "csv");
      read_opt(s, "patient_col", c.csv.patient_col);
      read_opt(s, "population_col", c.csv.population_col);
      read_opt(s, "response_col", c.csv.response_col);
      read_opt(s, "value_col", c.csv.value_col);
    }
    if (j.contains("prior_mode")) c.model.prior_mode = parse_prior_mode(j.at("prior_mode").get<std::string>());
    if (j.contains("theta_update")) {
      c.model.theta_update = parse_theta_update(j.at("theta_update").get<std::string>());
    }
    if (j.contains("location_prior")) c.model.location_prior = gaussian_from(j.at("location_prior"), "location_prior");
    if (j.contains("base_measure")) c.model.base = nig_from(j.at("base_measure"), "base_measure");
    if (j.contains("location_prior_by_response")) {
      for (const auto& g : j.at("location_prior_by_response")) {
        c.model.location_prior_by_response.push_back(gaussian_from(g, "location_prior_by_response"));
      }
    }
    if (j.contains("base_measure_by_response")) {
      for (const auto& b : j.at("base_measure_by_response")) {
        c.model.base_by_response.push_back(nig_from(b, "base_measure_by_response"));
      }
    }
    if (j.contains("omega_prior")) c.model.omega_prior = gamma_from(j.at("omega_prior"), "omega_prior");
    if (j.contains("gamma_prior")) c.model.gamma_prior = gamma_from(j.at("gamma_prior"), "gamma_prior");
    if (j.contains("alpha_prior")) c.model.alpha_prior = gamma_from(j.at("alpha_prior"), "alpha_prior");
    read_opt(j, "standardize", c.model.standardize);
    read_opt(j, "tie_gamma", c.model.tie_gamma);
    if (j.contains("mcmc")) {
      const auto& m = j.at("mcmc");
      reject_unknown(m,
                     {"iterations", "burn_in", "thin", "seed", "chains", "audit_interval",
                      "omega_pool_size", "checkpoint_interval", "parallel_responses"},
                     "mcmc");
      read_opt(m, "iterations", c.mcmc.iterations);
      read_opt(m, "burn_in", c.mcmc.burn_in);
      read_opt(m, "thin", c.mcmc.thin);
      read_opt(m, "seed", c.mcmc.seed);
      read_opt(m, "chains", c.chains);
      read_opt(m, "audit_interval", c.mcmc.audit_interval);
      read_opt(m, "omega_pool_size", c.mcmc.omega_pool_size);
      read_opt(m, "checkpoint_interval", c.mcmc.checkpoint_interval);
      read_opt(m, "parallel_responses", c.mcmc.parallel_responses);
    }
    if (j.contains("summary")) {
      const auto& s = j.at("summary");
      reject_unknown(s, {"cluster_identity", "credible_level", "grid_points", "grid_padding_sd"},
                     "summary");
      if (s.contains("cluster_identity")) {
        c.summary.identity = parse_cluster_identity(s.at("cluster_identity").get<std::string>());
      }
      read_opt(s, "credible_level", c.summary.level);
      read_opt(s, "grid_points", c.summary.grid_points);
      read_opt(s, "grid_padding_sd", c.summary.grid_padding_sd);
    }
    c.model.validate();
  } catch (const Json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  if (c.chains < 1) throw DataError("config: chains must be positive");
  if (!(c.summary.level > 0.0 && c.summary.level < 1.0)) {
    throw DataError("config: credible_level must lie in (0, 1)");
  }
  if (c.summary.grid_points < 2) throw DataError("config: grid_points must be at least 2");
  return c;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw DataError("'" + path + "': " + e.what());
  }
}

RunConfig load_run_config(const std::string& path) { return run_config_from_json(read_json_file(path)); }

Json to_json(const SampleRecord& r) {
  Json dishes = Json::array();
  for (const auto& d : r.dishes) {
    dishes.push_back({{"id", d.id}, {"xi", d.xi}, {"sigma2", d.sigma2}, {"tables", d.tables}});
  }
  return Json{{"iter", r.iter},           {"chain", r.chain},   {"m", r.m},
              {"theta", r.theta},         {"partition", r.partition},
              {"dish_label_per_patient", r.dish_label},
              {"sign_per_patient", r.sign}, {"omega", r.omega}, {"gamma", r.gamma},
              {"alpha", r.alpha},         {"dishes", dishes}};
}

SampleRecord sample_record_from_json(const Json& j) {
  SampleRecord r;
  r.iter = j.at("iter").get<long>();
  r.chain = j.value("chain", 0);
  r.m = j.at("m").get<int>();
  r.theta = j.at("theta").get<std::vector<double>>();
  r.partition = j.at("partition").get<std::vector<int>>();
  r.dish_label = j.at("dish_label_per_patient").get<std::vector<int>>();
  r.sign = j.at("sign_per_patient").get<std::vector<int>>();
  r.omega = j.at("omega").get<double>();
  r.gamma = j.at("gamma").get<std::vector<double>>();
  r.alpha = j.at("alpha").get<double>();
  for (const auto& d : j.at("dishes")) {
    r.dishes.push_back(DishRecord{d.at("id").get<int>(), d.at("xi").get<double>(),
                                  d.at("sigma2").get<double>(), d.at("tables").get<int>()});
  }
  if (r.sign.size() != r.dish_label.size() || r.theta.size() != r.partition.size()) {
    throw DataError("malformed sample record at iteration " + std::to_string(r.iter));
  }
  return r;
}

Json checkpoint_to_json(const ChainState& state) {
  Json responses = Json::array();
  for (const auto& r : state.responses) {
    const auto& f = r.franchise;
    Json menu = Json::array();
    for (const auto& d : f.menu()) {
      menu.push_back({{"id", d.id}, {"xi", d.atom.xi}, {"sigma2", d.atom.sigma2}, {"tables", d.tables}});
    }
    Json restaurants = Json::array();
    for (int j = 0; j < f.num_restaurants(); ++j) {
      const auto& rest = f.restaurant(j);
      Json tables = Json::array();
      for (const auto& t : rest.tables) tables.push_back({{"dish", t.dish}, {"size", t.size}});
      restaurants.push_back({{"table_of", rest.table_of}, {"sign", rest.sign}, {"tables", tables}});
    }
    responses.push_back({{"partition", r.partition.labels()},
                         {"theta_star", r.theta_star},
                         {"rng", rng_to_string(r.rng)},
                         {"gamma", f.gammas()},
                         {"alpha", f.alpha()},
                         {"next_dish_id", f.next_dish_id()},
                         {"menu", menu},
                         {"restaurants", restaurants}});
  }
  return Json{{"format", "shdp-checkpoint"},
              {"version", 1},
              {"iteration", state.iteration},
              {"omega", state.omega},
              {"omega_rng", rng_to_string(state.omega_rng)},
              {"responses", responses}};
}

ChainState checkpoint_from_json(const Json& j) {
  if (j.value("format", "") != "shdp-checkpoint") throw DataError("not a checkpoint file");
  if (j.value("version", 0) != 1) throw DataError("unsupported checkpoint version");
  try {
    ChainState state;
    state.iteration = j.at("iteration").get<long>();
    state.omega = j.at("omega").get<double>();
    state.omega_rng = rng_from_string(j.at("omega_rng").get<std::string>());
    for (const auto& jr : j.at("responses")) {
      ResponseState r;
      r.partition = SetPartition(jr.at("partition").get<std::vector<int>>());
      r.theta_star = jr.at("theta_star").get<std::vector<double>>();
      r.rng = rng_from_string(jr.at("rng").get<std::string>());
      std::vector<Dish> menu;
      for (const auto& d : jr.at("menu")) {
        menu.push_back(Dish{d.at("id").get<int>(),
                            DishAtom{d.at("xi").get<double>(), d.at("sigma2").get<double>()},
                            d.at("tables").get<int>()});
      }
      std::vector<Restaurant> restaurants;
      for (const auto& jt : jr.at("restaurants")) {
        Restaurant rest;
        rest.table_of = jt.at("table_of").get<std::vector<int>>();
        rest.sign = jt.at("sign").get<std::vector<int>>();
        for (const auto& t : jt.at("tables")) {
          rest.tables.push_back(Table{t.at("dish").get<int>(), t.at("size").get<int>()});
        }
        restaurants.push_back(std::move(rest));
      }
      r.franchise.restore(std::move(restaurants), std::move(menu),
                          jr.at("gamma").get<std::vector<double>>(), jr.at("alpha").get<double>(),
                          jr.at("next_dish_id").get<int>());
      r.franchise.audit();
      state.responses.push_back(std::move(r));
    }
    return state;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::logic_error& e) {
    throw DataError(std::string("inconsistent checkpoint: ") + e.what());
  }
}

Json dataset_meta(const Dataset& fitted, const RunConfig& config) {
  Json st = {{"applied", fitted.standardization.applied},
             {"mean", fitted.standardization.mean},
             {"sd", fitted.standardization.sd}};
  return Json{{"populations", fitted.populations},
              {"responses", fitted.responses},
              {"patients", fitted.patients},
              {"sizes", fitted.sizes()},
              {"standardization", st},
              {"config", to_json(config)}};
}

std::vector<SampleRecord> read_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<SampleRecord> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    try {
      out.push_back(sample_record_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw DataError("'" + path + "' line " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

SampleStreamWriter::SampleStreamWriter(const std::string& path, bool resume, long keep_through)
    : path_(path) {
  const std::string part = path + ".part";
  std::vector<std::string> kept;
  if (resume) {
    const std::string source = std::filesystem::exists(part) ? part : path;
    std::ifstream in(source);
    std::string line;
    while (in && std::getline(in, line)) {
      if (line.empty()) continue;
      // A torn final line from an interrupted run is dropped.
      Json j = Json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("iter")) continue;
      if (j.at("iter").get<long>() <= keep_through) kept.push_back(line);
    }
  }
  out_.open(part, std::ios::binary | std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot write '" + part + "'");
  for (const auto& line : kept) out_ << line << '\n';
}

void SampleStreamWriter::write(const SampleRecord& r) {
  out_ << to_json(r).dump() << '\n';
  if (!out_) throw std::runtime_error("write failed for '" + path_ + ".part'");
}

void SampleStreamWriter::flush() {
  out_.flush();
  if (!out_) throw std::runtime_error("flush failed for '" + path_ + ".part'");
}

void SampleStreamWriter::close() {
  out_.flush();
  out_.close();
  std::filesystem::rename(path_ + ".part", path_);
}

}  // namespace shdp
