// Apache License, Version 2.0, refer to LICENSE.txt

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "doctest.h"
#include "shdp/io.hh"

using namespace shdp;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("shdp_test_io_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

SampleRecord sample(long iter) {
  SampleRecord r;
  r.iter = iter;
  r.chain = 1;
  r.m = 0;
  r.theta = {0.25, -1.0 / 3.0, 2.0, 2.0};
  r.partition = {0, 1, 2, 2};
  r.dish_label = {4, 4, 9};
  r.sign = {1, -1, 1};
  r.omega = 0.1 + 1e-17 * iter;
  r.gamma = {1.1, 0.9, 1.0, 1.3};
  r.alpha = 0.7;
  r.dishes = {DishRecord{4, 1.25, 0.3, 2}, DishRecord{9, -0.5, 1.7, 1}};
  return r;
}

std::vector<std::string> lines_of(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("run configuration") {
  RunConfig c;
  c.model.prior_mode = PriorMode::dp;
  c.model.base = NormalInverseGammaParams{0.1, 2, 3, 5};
  c.model.location_prior_by_response = {GaussianParams{1, 2}};
  c.mcmc.iterations = 321;
  c.mcmc.seed = 0xfedcba9876543210ull;
  c.chains = 3;
  c.populations = {"C", "G", "M", "S"};
  c.summary.identity = ClusterIdentity::signed_dish;
  const Json j = to_json(c);
  const RunConfig back = run_config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.mcmc.seed == 0xfedcba9876543210ull);
  CHECK(back.model.location_prior_by_response[0].variance == 2);

  const RunConfig defaults = run_config_from_json(Json::object());
  CHECK(defaults.mcmc.iterations == 10000);
  CHECK(defaults.mcmc.burn_in == 5000);
  CHECK(defaults.model.base.b == 4.0);
  CHECK(defaults.model.location_prior.variance == 1.0);
  CHECK(defaults.model.omega_prior.shape == 3.0);
  CHECK(defaults.model.omega_prior.rate == 3.0);
  CHECK(defaults.model.prior_mode == PriorMode::restricted);

  CHECK_THROWS_AS(run_config_from_json(Json{{"iterations", 5}}), DataError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"mcmc", {{"burnin", 5}}}}), DataError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"prior_mode", "nested"}}), DataError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"omega_prior", {{"shape", -1.0}}}}), DataError);

  const auto path = (scratch() / "config.json").string();
  std::ofstream(path) << R"({"prior_mode": "uniform", "mcmc": {"iterations": 50, "burn_in": 10}})";
  const RunConfig loaded = load_run_config(path);
  CHECK(loaded.model.prior_mode == PriorMode::uniform);
  CHECK(loaded.mcmc.iterations == 50);
  std::ofstream(path) << "{not json";
  CHECK_THROWS_AS(load_run_config(path), DataError);
}

TEST_CASE("sample records") {
  const SampleRecord r = sample(7);
  const Json j = to_json(r);
  for (const char* key : {"iter", "m", "theta", "partition", "dish_label_per_patient", "omega"})
    CHECK(j.contains(key));
  const SampleRecord back = sample_record_from_json(Json::parse(j.dump()));
  CHECK(back.theta == r.theta);
  CHECK(back.omega == r.omega);
  CHECK(back.partition == r.partition);
  CHECK(back.dish_label == r.dish_label);
  CHECK(back.sign == r.sign);
  CHECK(back.dishes.size() == 2);
  CHECK(back.dishes[1].xi == -0.5);
  CHECK(to_json(back) == j);
}

TEST_CASE("atomic writes") {
  const auto path = (scratch() / "atomic.txt").string();
  write_file_atomic(path, "first\n");
  write_file_atomic(path, "second\n");
  CHECK(lines_of(path) == std::vector<std::string>{"second"});
  int leftovers = 0;
  for (const auto& e : fs::directory_iterator(scratch()))
    leftovers += e.path().filename().string().find("atomic.txt.") == 0;
  CHECK(leftovers == 0);
}

TEST_CASE("sample streams") {
  const auto path = (scratch() / "chain0.ndjson").string();
  {
    SampleStreamWriter w(path, false, 0);
    for (long it = 1; it <= 5; ++it) w.write(sample(it));
    w.flush();
    CHECK(fs::exists(path + ".part"));
    CHECK_FALSE(fs::exists(path));
  }
  // Simulate a crash that left a torn final line.
  {
    std::ofstream torn(path + ".part", std::ios::app);
    torn << R"({"iter": 6, "the)";
  }
  {
    SampleStreamWriter w(path, true, 3);
    w.write(sample(4));
    w.close();
  }
  CHECK(fs::exists(path));
  CHECK_FALSE(fs::exists(path + ".part"));
  const auto recs = read_samples(path);
  REQUIRE(recs.size() == 4);
  for (long k = 0; k < 4; ++k) CHECK(recs[k].iter == k + 1);

  std::ofstream(path, std::ios::app) << "{broken\n";
  CHECK_THROWS_AS(read_samples(path), DataError);
}

TEST_CASE("checkpoint format") {
  CHECK_THROWS_AS(checkpoint_from_json(Json{{"format", "other"}}), DataError);
  CHECK_THROWS_AS(checkpoint_from_json(Json{{"format", "shdp-checkpoint"}, {"version", 9}}),
                  DataError);
  ChainState s;
  s.omega = 1.25;
  s.iteration = 12;
  s.omega_rng = make_rng(5);
  ResponseState r;
  r.partition = SetPartition{0, 1};
  r.theta_star = {0.5, -0.5};
  r.franchise = FranchiseState({1, 1}, {1.0, 2.0}, 0.5);
  const int h = r.franchise.add_dish(DishAtom{0.3, 0.9});
  r.franchise.seat_customer(0, 0, r.franchise.open_table(0, h), -1);
  r.franchise.seat_customer(1, 0, r.franchise.open_table(1, h), 1);
  r.rng = make_rng(6);
  s.responses.push_back(r);
  const Json j = checkpoint_to_json(s);
  const ChainState back = checkpoint_from_json(Json::parse(j.dump()));
  CHECK(checkpoint_to_json(back) == j);
  CHECK(back.omega_rng == s.omega_rng);
  CHECK(back.responses[0].rng == r.rng);
  CHECK(back.responses[0].franchise.restaurant(0).sign[0] == -1);
  CHECK(back.responses[0].franchise.next_dish_id() == r.franchise.next_dish_id());
}

TEST_CASE("dataset metadata") {
  Dataset ds;
  ds.populations = {"C", "S"};
  ds.responses = {"CI"};
  ds.patients = {{"a"}, {"b", "c"}};
  ds.values = {{{1.0}, {2.0, 3.0}}};
  ds.standardization = Standardization{true, {2.0}, {1.0}};
  const Json meta = dataset_meta(ds, RunConfig{});
  CHECK(meta.at("populations") == Json{"C", "S"});
  CHECK(meta.at("sizes") == Json{1, 2});
  CHECK(meta.at("standardization").at("mean") == Json{2.0});
  CHECK(meta.contains("config"));
}
