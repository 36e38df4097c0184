// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "shdp/data.hh"
#include "shdp/records.hh"
#include "shdp/sampler.hh"
#include "shdp/summaries.hh"

namespace shdp {

using Json = nlohmann::json;

// Everything a fit needs besides the data.
struct RunConfig {
  ModelConfig model;
  MCMCOptions mcmc;
  int chains = 1;
  CsvSchema csv;
  // Severity order of the populations; empty means order of first appearance.
  std::vector<std::string> populations;
  std::vector<std::string> responses;
  SummaryOptions summary;
};

Json to_json(const RunConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::string& path);

Json to_json(const SampleRecord& r);
SampleRecord sample_record_from_json(const Json& j);

Json checkpoint_to_json(const ChainState& state);
ChainState checkpoint_from_json(const Json& j);

Json dataset_meta(const Dataset& fitted, const RunConfig& config);

// Reads every record of an NDJSON stream.
std::vector<SampleRecord> read_samples(const std::string& path);

Json read_json_file(const std::string& path);
// Writes through a temporary file and renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);

// Appends NDJSON records to path + ".part" and renames on close().
class SampleStreamWriter {
 public:
  // Keeps the records of an existing stream with iter <= keep_through when
  // resuming; starts empty otherwise.
  SampleStreamWriter(const std::string& path, bool resume, long keep_through);
  void write(const SampleRecord& r);
  void flush();
  void close();

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace shdp
