// Apache License, Version 2.0, refer to LICENSE.txt

#include "shdp/data.hh"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/tokenizer.hpp>

#include "shdp/random.hh"

namespace shdp {

std::vector<int> Dataset::sizes() const {
  std::vector<int> out;
  for (const auto& p : patients) out.push_back(static_cast<int>(p.size()));
  return out;
}

int Dataset::total_patients() const {
  int n = 0;
  for (const auto& p : patients) n += static_cast<int>(p.size());
  return n;
}

int Dataset::flat_index(int j, int i) const {
  int offset = 0;
  for (int k = 0; k < j; ++k) offset += static_cast<int>(patients[k].size());
  return offset + i;
}

void Dataset::validate() const {
  if (populations.empty()) throw DataError("dataset has no populations");
  if (responses.empty()) throw DataError("dataset has no responses");
  if (patients.size() != populations.size()) throw DataError("patients/populations mismatch");
  for (std::size_t j = 0; j < patients.size(); ++j) {
    if (patients[j].empty()) throw DataError("population '" + populations[j] + "' is empty");
  }
  if (values.size() != responses.size()) throw DataError("values/responses mismatch");
  for (std::size_t m = 0; m < values.size(); ++m) {
    if (values[m].size() != populations.size()) throw DataError("values shape mismatch");
    for (std::size_t j = 0; j < values[m].size(); ++j) {
      if (values[m][j].size() != patients[j].size()) throw DataError("values shape mismatch");
      for (double v : values[m][j]) {
        if (!std::isfinite(v)) {
          throw DataError("non-finite value for response '" + responses[m] + "'");
        }
      }
    }
  }
}

namespace {

using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;

std::vector<std::string> split_csv_line(const std::string& line, std::size_t row) {
  std::vector<std::string> out;
  try {
    Tokenizer tok(line);
    for (const auto& field : tok) out.push_back(field);
  } catch (const boost::escaped_list_error& e) {
    throw DataError("row " + std::to_string(row) + ": " + e.what());
  }
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t\r");
    const auto e = f.find_last_not_of(" \t\r");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("missing column '" + name + "' in header");
  return static_cast<std::size_t>(it - header.begin());
}

double parse_double(const std::string& text, std::size_t row) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw DataError("row " + std::to_string(row) + ": non-numeric value '" + text + "'");
  }
  return v;
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema,
                 const std::vector<std::string>& population_order,
                 const std::vector<std::string>& response_order) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
  const auto header = split_csv_line(line, 1);
  const std::size_t c_pat = column_index(header, schema.patient_col);
  const std::size_t c_pop = column_index(header, schema.population_col);
  const std::size_t c_res = column_index(header, schema.response_col);
  const std::size_t c_val = column_index(header, schema.value_col);
  const std::size_t needed = std::max({c_pat, c_pop, c_res, c_val}) + 1;

  std::vector<std::string> pops = population_order;
  std::vector<std::string> resps = response_order;
  const bool fixed_pops = !pops.empty();
  const bool fixed_resps = !resps.empty();
  // (population, patient) -> response -> value
  std::map<std::pair<std::string, std::string>, std::map<std::string, double>> cells;
  std::map<std::string, std::string> population_of_patient;
  std::size_t row = 1;
  std::size_t data_rows = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_csv_line(line, row);
    if (f.size() < needed) {
      throw DataError("row " + std::to_string(row) + ": expected at least " +
                      std::to_string(needed) + " fields, found " + std::to_string(f.size()));
    }
    const std::string& pat = f[c_pat];
    const std::string& pop = f[c_pop];
    const std::string& res = f[c_res];
    if (pat.empty() || pop.empty() || res.empty()) {
      throw DataError("row " + std::to_string(row) + ": missing cell");
    }
    if (std::find(pops.begin(), pops.end(), pop) == pops.end()) {
      if (fixed_pops) throw DataError("row " + std::to_string(row) + ": unknown population '" + pop + "'");
      pops.push_back(pop);
    }
    if (std::find(resps.begin(), resps.end(), res) == resps.end()) {
      if (fixed_resps) throw DataError("row " + std::to_string(row) + ": unknown response '" + res + "'");
      resps.push_back(res);
    }
    const auto [it, fresh] = population_of_patient.emplace(pat, pop);
    if (!fresh && it->second != pop) {
      throw DataError("row " + std::to_string(row) + ": patient '" + pat +
                      "' appears in two populations");
    }
    auto& slot = cells[{pop, pat}];
    if (!slot.emplace(res, parse_double(f[c_val], row)).second) {
      throw DataError("row " + std::to_string(row) + ": duplicate value for patient '" + pat +
                      "' response '" + res + "'");
    }
    ++data_rows;
  }
  if (data_rows == 0) throw DataError("'" + path + "' has no data rows");

  Dataset ds;
  ds.populations = pops;
  ds.responses = resps;
  ds.patients.resize(pops.size());
  ds.values.assign(resps.size(), std::vector<std::vector<double>>(pops.size()));
  for (std::size_t j = 0; j < pops.size(); ++j) {
    // std::map iteration keeps patients sorted by id.
    for (const auto& [key, row_values] : cells) {
      if (key.first != pops[j]) continue;
      ds.patients[j].push_back(key.second);
      for (std::size_t m = 0; m < resps.size(); ++m) {
        const auto v = row_values.find(resps[m]);
        if (v == row_values.end()) {
          throw DataError("patient '" + key.second + "' has no value for response '" +
                          resps[m] + "'");
        }
        ds.values[m][j].push_back(v->second);
      }
    }
  }
  ds.validate();
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path, const CsvSchema& schema) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cannot write '" + path + "'");
    out.precision(17);
    out << schema.patient_col << ',' << schema.population_col << ',' << schema.response_col
        << ',' << schema.value_col << '\n';
    for (int j = 0; j < ds.num_populations(); ++j) {
      for (std::size_t i = 0; i < ds.patients[j].size(); ++i) {
        for (int m = 0; m < ds.num_responses(); ++m) {
          out << quote_csv(ds.patients[j][i]) << ',' << quote_csv(ds.populations[j]) << ','
              << quote_csv(ds.responses[m]) << ',' << ds.values[m][j][i] << '\n';
        }
      }
    }
    if (!out) throw DataError("write failed for '" + path + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw DataError("cannot move '" + tmp + "' into place");
  }
}

Dataset standardize(const Dataset& ds) {
  ds.validate();
  Dataset out = ds;
  out.standardization.applied = true;
  out.standardization.mean.assign(ds.num_responses(), 0.0);
  out.standardization.sd.assign(ds.num_responses(), 1.0);
  for (int m = 0; m < ds.num_responses(); ++m) {
    double sum = 0.0;
    int n = 0;
    for (const auto& pop : ds.values[m]) {
      for (double v : pop) {
        sum += v;
        ++n;
      }
    }
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& pop : ds.values[m]) {
      for (double v : pop) ss += (v - mean) * (v - mean);
    }
    const double sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
    if (!(sd > 0.0)) {
      throw DataError("response '" + ds.responses[m] + "' has zero pooled standard deviation");
    }
    out.standardization.mean[m] = mean;
    out.standardization.sd[m] = sd;
    for (auto& pop : out.values[m]) {
      for (double& v : pop) v = (v - mean) / sd;
    }
  }
  return out;
}

Dataset destandardize(const Dataset& ds) {
  if (!ds.standardization.applied) return ds;
  Dataset out = ds;
  for (int m = 0; m < ds.num_responses(); ++m) {
    for (auto& pop : out.values[m]) {
      for (double& v : pop) v = to_raw_scale(ds.standardization, m, v);
    }
  }
  out.standardization = Standardization{};
  return out;
}

double to_raw_scale(const Standardization& s, int m, double z) {
  if (!s.applied) return z;
  return s.mean.at(m) + s.sd.at(m) * z;
}

namespace {

constexpr double kVar = 0.5;

double normal_draw(Rng& rng, double mean) { return sample_normal(rng, mean, std::sqrt(kVar)); }

// Two-component normal mixture with explicit component indicator.
double mixture_draw(Rng& rng, double w_first, double mean_first, double mean_second) {
  const bool first = sample_bernoulli(rng, w_first);
  return normal_draw(rng, first ? mean_first : mean_second);
}

double draw_value(const std::string& dgp, int j, int i, int n_j, Rng& rng) {
  if (dgp == "main") {
    const double mu = 1.0 + 2.0 * j;
    return mixture_draw(rng, 0.5, mu - 1.0, mu + 1.0);
  }
  if (dgp == "dgp1") {
    if (j == 0) return normal_draw(rng, i == n_j - 1 ? 4.0 : 0.0);
    return normal_draw(rng, j == 3 ? 2.0 : 1.0);
  }
  if (dgp == "dgp2") {
    if (j == 0) return mixture_draw(rng, 0.5, -1.0, 1.0);
    return normal_draw(rng, j == 3 ? 2.0 : 1.0);
  }
  if (dgp == "dgp3") {
    if (j == 0) return normal_draw(rng, 0.0);
    if (j == 1) return sample_gamma(rng, 3.0, 3.0);
    return normal_draw(rng, j == 3 ? 2.0 : 1.0);
  }
  if (dgp == "dgp4") {
    if (j == 0) return mixture_draw(rng, 0.7, -1.0, 1.0);
    return normal_draw(rng, j == 3 ? 2.0 : 1.0);
  }
  if (dgp == "dgp5") {
    if (j < 3) return sample_gamma(rng, 10.0, 10.0);
    return mixture_draw(rng, 0.5, 0.0, 2.0);
  }
  throw std::invalid_argument("unknown data generating process '" + dgp + "'");
}

}  // namespace

std::vector<std::string> known_dgps() { return {"main", "dgp1", "dgp2", "dgp3", "dgp4", "dgp5"}; }

std::vector<double> dgp_means(const std::string& dgp) {
  if (dgp == "main") return {1.0, 3.0, 5.0, 7.0};
  if (dgp == "dgp1" || dgp == "dgp2" || dgp == "dgp3") return {0.0, 1.0, 1.0, 2.0};
  if (dgp == "dgp4") return {-0.4, 1.0, 1.0, 2.0};
  if (dgp == "dgp5") return {1.0, 1.0, 1.0, 1.0};
  throw std::invalid_argument("unknown data generating process '" + dgp + "'");
}

Dataset simulate(const std::string& dgp, const std::vector<int>& sizes, std::uint64_t seed,
                 int num_responses) {
  const auto names = known_dgps();
  if (std::find(names.begin(), names.end(), dgp) == names.end()) {
    throw std::invalid_argument("unknown data generating process '" + dgp + "'");
  }
  if (sizes.size() != 4) throw std::invalid_argument("simulate: the generators need 4 populations");
  if (num_responses < 1) throw std::invalid_argument("simulate: need at least one response");
  Dataset ds;
  for (int j = 0; j < 4; ++j) {
    if (sizes[j] < 1) throw std::invalid_argument("simulate: population sizes must be positive");
    ds.populations.push_back(std::to_string(j + 1));
    std::vector<std::string> ids;
    for (int i = 0; i < sizes[j]; ++i) {
      std::ostringstream id;
      id << 'p' << std::to_string(j + 1) << '_';
      id.width(5);
      id.fill('0');
      id << i;
      ids.push_back(id.str());
    }
    ds.patients.push_back(ids);
  }
  for (int m = 0; m < num_responses; ++m) {
    ds.responses.push_back(num_responses == 1 ? "y" : "y" + std::to_string(m + 1));
    Rng rng = make_rng(seed, 0xd6e, m);
    std::vector<std::vector<double>> pops(4);
    for (int j = 0; j < 4; ++j) {
      for (int i = 0; i < sizes[j]; ++i) pops[j].push_back(draw_value(dgp, j, i, sizes[j], rng));
    }
    ds.values.push_back(std::move(pops));
  }
  return ds;
}

}  // namespace shdp
