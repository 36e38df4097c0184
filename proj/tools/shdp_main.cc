// Apache License, Version 2.0, refer to LICENSE.txt

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "shdp/data.hh"
#include "shdp/io.hh"
#include "shdp/records.hh"
#include "shdp/report.hh"
#include "shdp/sampler.hh"
#include "shdp/summaries.hh"
#include "shdp/validation.hh"

namespace fs = std::filesystem;
using namespace shdp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitNumerical = 3;

struct SimulateArgs {
  std::string dgp = "main";
  std::optional<std::uint64_t> seed;
  std::vector<int> sizes{50, 19, 9, 22};
  int responses = 1;
  std::string output;
};

struct FitArgs {
  std::string config;
  std::string input;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> chains;
  std::optional<long> iterations;
  std::optional<long> burn_in;
  std::optional<long> thin;
  std::optional<std::string> prior_mode;
  std::optional<std::string> theta_update;
  bool tie_gamma = false;
  bool resume = false;
  long stop_after = 0;
};

struct SummarizeArgs {
  std::string out_dir;
  std::string summary_dir;
  std::optional<std::string> identity;
};

struct ValidateArgs {
  bool full = false;
  bool inject_fault = false;
  std::optional<std::uint64_t> seed;
  std::string report;
};

void configure_logging() {
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("SHDP_LOG")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

std::string chain_file(const std::string& dir, int k, const std::string& suffix) {
  return (fs::path(dir) / ("chain" + std::to_string(k) + suffix)).string();
}

int cmd_simulate(const SimulateArgs& a) {
  if (!a.seed) throw DataError("--seed is required");
  Dataset ds;
  try {
    ds = simulate(a.dgp, a.sizes, *a.seed, a.responses);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  write_csv(ds, a.output);
  spdlog::info("wrote {} patients x {} responses to {}", ds.total_patients(), ds.num_responses(),
               a.output);
  return kExitOk;
}

RunConfig fit_config(const FitArgs& a) {
  RunConfig c = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (a.seed) c.mcmc.seed = *a.seed;
  if (a.chains) c.chains = *a.chains;
  if (a.iterations) c.mcmc.iterations = *a.iterations;
  if (a.burn_in) c.mcmc.burn_in = *a.burn_in;
  if (a.thin) c.mcmc.thin = *a.thin;
  try {
    if (a.prior_mode) c.model.prior_mode = parse_prior_mode(*a.prior_mode);
    if (a.theta_update) c.model.theta_update = parse_theta_update(*a.theta_update);
    if (a.tie_gamma) c.model.tie_gamma = true;
    c.model.validate();
    c.mcmc.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  if (c.chains < 1) throw DataError("--chains must be positive");
  if (!a.seed && a.config.empty()) throw DataError("--seed is required");
  return c;
}

int cmd_fit(const FitArgs& a) {
  const RunConfig config = fit_config(a);
  const Dataset raw = load_csv(a.input, config.csv, config.populations, config.responses);
  const Dataset fitted = config.model.standardize ? standardize(raw) : raw;
  if (static_cast<int>(config.model.location_prior_by_response.size()) > 0 &&
      static_cast<int>(config.model.location_prior_by_response.size()) != raw.num_responses()) {
    throw DataError("location_prior_by_response needs one entry per response");
  }
  if (static_cast<int>(config.model.base_by_response.size()) > 0 &&
      static_cast<int>(config.model.base_by_response.size()) != raw.num_responses()) {
    throw DataError("base_measure_by_response needs one entry per response");
  }
  fs::create_directories(a.out_dir);
  const std::string meta_path = (fs::path(a.out_dir) / "meta.json").string();
  const Json meta = dataset_meta(fitted, config);
  if (a.resume) {
    if (!fs::exists(meta_path)) throw DataError("nothing to resume in '" + a.out_dir + "'");
    Json old = read_json_file(meta_path);
    if (old != meta) throw DataError("--resume: data or configuration differ from the original fit");
  } else {
    write_file_atomic(meta_path, meta.dump(2) + "\n");
    write_csv(raw, (fs::path(a.out_dir) / "data.csv").string(), config.csv);
  }

  std::mutex error_mutex;
  std::optional<std::pair<int, std::string>> failure;
  auto run_one = [&](int k) {
    try {
      const std::string ckpt = chain_file(a.out_dir, k, ".checkpoint.json");
      ChainState state;
      const bool resuming = a.resume && fs::exists(ckpt);
      if (resuming) {
        state = checkpoint_from_json(read_json_file(ckpt));
        spdlog::info("chain {} resuming at iteration {}", k, state.iteration);
      } else {
        state = init_state(fitted, config.model, config.mcmc.seed, k);
      }
      SampleStreamWriter writer(chain_file(a.out_dir, k, ".ndjson"), resuming, state.iteration);
      MCMCOptions options = config.mcmc;
      options.chain = k;
      const long stop = a.stop_after > 0 ? std::min(a.stop_after, options.iterations)
                                         : options.iterations;
      ChainCallbacks cb;
      cb.on_sample = [&](const ChainState& s) {
        for (const auto& rec : make_records(s, fitted, k)) writer.write(rec);
      };
      cb.on_checkpoint = [&](const ChainState& s) {
        writer.flush();
        write_file_atomic(ckpt, checkpoint_to_json(s).dump() + "\n");
      };
      MCMCOptions bounded = options;
      bounded.iterations = stop;
      bounded.burn_in = std::min(options.burn_in, stop - 1);
      // Emission follows the full-run burn-in even when stopping early.
      ChainCallbacks gated = cb;
      gated.on_sample = [&](const ChainState& s) {
        if (s.iteration > options.burn_in) cb.on_sample(s);
      };
      run_chain(state, fitted, config.model, bounded, gated);
      if (stop == options.iterations) {
        writer.close();
        spdlog::info("chain {} finished {} iterations", k, state.iteration);
      } else {
        writer.flush();
        spdlog::info("chain {} stopped at iteration {}", k, state.iteration);
      }
    } catch (const NumericalError& e) {
      std::lock_guard lock(error_mutex);
      failure = {kExitNumerical, "chain " + std::to_string(k) + ": " + e.what()};
    } catch (const std::exception& e) {
      std::lock_guard lock(error_mutex);
      failure = {kExitInvalid, "chain " + std::to_string(k) + ": " + e.what()};
    }
  };
  std::vector<std::thread> workers;
  for (int k = 0; k < config.chains; ++k) workers.emplace_back(run_one, k);
  for (auto& w : workers) w.join();
  if (failure) {
    spdlog::error("{}", failure->second);
    return failure->first;
  }
  return kExitOk;
}

int cmd_summarize(const SummarizeArgs& a) {
  const Json meta = read_json_file((fs::path(a.out_dir) / "meta.json").string());
  RunConfig config = run_config_from_json(meta.at("config"));
  if (a.identity) {
    try {
      config.summary.identity = parse_cluster_identity(*a.identity);
    } catch (const std::invalid_argument& e) {
      throw DataError(e.what());
    }
  }
  const Dataset raw = load_csv((fs::path(a.out_dir) / "data.csv").string(), config.csv,
                               meta.at("populations").get<std::vector<std::string>>(),
                               meta.at("responses").get<std::vector<std::string>>());
  Standardization st;
  st.applied = meta.at("standardization").at("applied").get<bool>();
  st.mean = meta.at("standardization").at("mean").get<std::vector<double>>();
  st.sd = meta.at("standardization").at("sd").get<std::vector<double>>();

  std::vector<std::vector<SampleRecord>> by_response(raw.num_responses());
  for (int k = 0; k < config.chains; ++k) {
    const std::string path = chain_file(a.out_dir, k, ".ndjson");
    if (!fs::exists(path)) throw DataError("missing sample stream '" + path + "'");
    for (auto& rec : read_samples(path)) {
      if (rec.m < 0 || rec.m >= raw.num_responses()) throw DataError("record with unknown response");
      by_response[rec.m].push_back(std::move(rec));
    }
  }
  std::vector<ResponseSummary> summaries;
  for (int m = 0; m < raw.num_responses(); ++m) {
    if (by_response[m].empty()) throw DataError("empty sample stream for response '" + raw.responses[m] + "'");
    summaries.push_back(summarize_response(by_response[m], raw, st, m, config.model.base_for(m),
                                           config.summary));
  }
  const std::string dir =
      a.summary_dir.empty() ? (fs::path(a.out_dir) / "summary").string() : a.summary_dir;
  write_summary_outputs(dir, raw, summaries);
  for (const auto& s : summaries) {
    const auto& mode = s.partitions.mode();
    spdlog::info("{}: MAP {} ({:.3f}), entropy {:.3f}", s.response,
                 mode.first.to_string(raw.populations), mode.second, s.entropy);
  }
  return kExitOk;
}

int cmd_validate(const ValidateArgs& a) {
  ValidationOptions opt = a.full ? ValidationOptions{} : quick_validation();
  if (a.seed) opt.seed = *a.seed;
  opt.inject_fault = a.inject_fault;
  const auto results = run_validation(opt);
  Json report = Json::array();
  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.statistic
              << " <= " << r.threshold << (r.detail.empty() ? "" : " (" + r.detail + ")") << "\n";
    report.push_back(to_json(r));
    ok = ok && r.passed;
  }
  if (!a.report.empty()) write_file_atomic(a.report, report.dump(2) + "\n");
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Bayesian model selection across ordered populations with symmetric HDP errors"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Draw a dataset from a built-in generator");
  c_sim->add_option("--dgp", sim.dgp, "Generator: main, dgp1..dgp5")->capture_default_str();
  c_sim->add_option("--seed", sim.seed, "Random seed");
  c_sim->add_option("--sizes", sim.sizes, "Population sizes")->expected(4)->capture_default_str();
  c_sim->add_option("--responses", sim.responses, "Number of responses")->capture_default_str();
  c_sim->add_option("-o,--output", sim.output, "Output CSV")->required();

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Run MCMC chains");
  c_fit->add_option("--config", fit.config, "JSON configuration");
  c_fit->add_option("-i,--input", fit.input, "Long-format CSV data")->required();
  c_fit->add_option("--out-dir", fit.out_dir, "Output directory")->required();
  c_fit->add_option("--seed", fit.seed, "Master seed");
  c_fit->add_option("--chains", fit.chains, "Number of chains");
  c_fit->add_option("--iterations", fit.iterations, "Total iterations per chain");
  c_fit->add_option("--burn-in", fit.burn_in, "Burn-in iterations");
  c_fit->add_option("--thin", fit.thin, "Keep every thin-th draw");
  c_fit->add_option("--prior-mode", fit.prior_mode, "restricted, dp or uniform");
  c_fit->add_option("--theta-update", fit.theta_update, "sequential or exact");
  c_fit->add_flag("--tie-gamma", fit.tie_gamma, "Share gamma across populations");
  c_fit->add_flag("--resume", fit.resume, "Continue from the last checkpoints");
  c_fit->add_option("--stop-after", fit.stop_after, "Stop after this many iterations")
      ->group("");

  SummarizeArgs sum;
  auto* c_sum = app.add_subcommand("summarize", "Posterior summaries of a fit");
  c_sum->add_option("--out-dir", sum.out_dir, "Directory of a fit")->required();
  c_sum->add_option("-o,--summary-dir", sum.summary_dir, "Where to write the summaries");
  c_sum->add_option("--cluster-identity", sum.identity, "signed or pair");

  ValidateArgs val;
  auto* c_val = app.add_subcommand("validate", "Run the oracle checks");
  c_val->add_flag("--full", val.full, "Full Monte-Carlo sample sizes");
  c_val->add_flag("--inject-fault", val.inject_fault, "Corrupt a reference value");
  c_val->add_option("--seed", val.seed, "Seed for the Monte-Carlo checks");
  c_val->add_option("-o,--report", val.report, "JSON report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }
  try {
    if (*c_sim) return cmd_simulate(sim);
    if (*c_fit) return cmd_fit(fit);
    if (*c_sum) return cmd_summarize(sum);
    if (*c_val) return cmd_validate(val);
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return kExitInvalid;
  } catch (const NumericalError& e) {
    spdlog::error("{}", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitInvalid;
  }
  return kExitInvalid;
}
