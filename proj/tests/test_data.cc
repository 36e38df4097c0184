// Apache License, Version 2.0, refer to LICENSE.txt

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "shdp/data.hh"

using namespace shdp;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("shdp_test_data_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string write_text(const std::string& name, const std::string& text) {
  const auto path = (scratch() / name).string();
  std::ofstream(path) << text;
  return path;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

void check_same(const Dataset& a, const Dataset& b) {
  CHECK(a.populations == b.populations);
  CHECK(a.responses == b.responses);
  CHECK(a.patients == b.patients);
  CHECK(a.values == b.values);
}

std::string error_of(const std::string& path, const std::vector<std::string>& order = {}) {
  try {
    load_csv(path, {}, order);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("simulators") {
  for (const auto& dgp : known_dgps()) {
    CAPTURE(dgp);
    const Dataset big = simulate(dgp, {5000, 1900, 900, 2200}, 31);
    CHECK(big.populations == std::vector<std::string>{"1", "2", "3", "4"});
    const auto means = dgp_means(dgp);
    for (int j = 0; j < 4; ++j) {
      const auto& x = big.values[0][j];
      double sum = 0.0, sq = 0.0;
      for (double v : x) {
        sum += v;
        sq += v * v;
      }
      const double n = static_cast<double>(x.size());
      const double mean = sum / n, se = std::sqrt((sq / n - mean * mean) / n);
      CHECK(std::abs(mean - means[j]) < 3 * se);
    }
  }
  CHECK(dgp_means("main")[0] == 1.0);
  CHECK(dgp_means("dgp5")[1] == 1.0);

  const Dataset a = simulate("main", {50, 19, 9, 22}, 7), b = simulate("main", {50, 19, 9, 22}, 7);
  check_same(a, b);
  CHECK(a.sizes() == std::vector<int>{50, 19, 9, 22});
  CHECK(simulate("main", {50, 19, 9, 22}, 8).values != a.values);
  CHECK_THROWS_AS(simulate("dgp9", {5, 5, 5, 5}, 1), std::invalid_argument);

  const Dataset outlier = simulate("dgp1", {50, 19, 9, 22}, 5);
  CHECK(std::abs(outlier.values[0][0].back() - 4.0) < 3 * std::sqrt(0.5));

  const Dataset multi = simulate("main", {50, 19, 9, 22}, 7, 3);
  CHECK(multi.responses.size() == 3);
  CHECK(multi.values[0] != multi.values[1]);
}

TEST_CASE("standardization") {
  const Dataset raw = simulate("main", {30, 20, 10, 25}, 2, 2);
  const Dataset z = standardize(raw);
  CHECK(z.standardization.applied);
  for (int m = 0; m < 2; ++m) {
    double sum = 0.0, sq = 0.0;
    int n = 0;
    for (const auto& pop : z.values[m])
      for (double v : pop) {
        sum += v;
        sq += v * v;
        ++n;
      }
    CHECK(std::abs(sum / n) < 1e-12);
    CHECK((sq - sum * sum / n) / (n - 1) == doctest::Approx(1.0).epsilon(1e-12));
  }
  const Dataset back = destandardize(z);
  for (int m = 0; m < 2; ++m)
    for (int j = 0; j < 4; ++j)
      for (std::size_t i = 0; i < raw.values[m][j].size(); ++i) {
        CHECK(std::abs(back.values[m][j][i] - raw.values[m][j][i]) < 1e-12);
        CHECK(to_raw_scale(z.standardization, m, z.values[m][j][i]) ==
              doctest::Approx(raw.values[m][j][i]));
      }

  const Dataset twice = standardize(z);
  for (int m = 0; m < 2; ++m) {
    CHECK(std::abs(twice.standardization.mean[m]) < 1e-12);
    CHECK(std::abs(twice.standardization.sd[m] - 1.0) < 1e-12);
    for (int j = 0; j < 4; ++j)
      for (std::size_t i = 0; i < z.values[m][j].size(); ++i)
        CHECK(std::abs(twice.values[m][j][i] - z.values[m][j][i]) < 1e-12);
  }

  Dataset flat = raw;
  for (auto& pop : flat.values[1])
    for (auto& v : pop) v = 3.0;
  CHECK_THROWS_AS(standardize(flat), DataError);
}

TEST_CASE("CSV round trip and order independence") {
  const Dataset ds = simulate("main", {50, 19, 9, 22}, 4, 10);
  const auto path = (scratch() / "full.csv").string();
  write_csv(ds, path);
  auto lines = read_lines(path);
  CHECK(lines.size() == 1 + 100 * 10);
  const Dataset back = load_csv(path);
  check_same(ds, back);
  CHECK(back.sizes() == std::vector<int>{50, 19, 9, 22});

  std::vector<std::string> body(lines.begin() + 1, lines.end());
  std::mt19937_64 rng(1);
  std::shuffle(body.begin(), body.end(), rng);
  std::ostringstream shuffled;
  shuffled << lines[0] << "\n";
  for (const auto& l : body) shuffled << l << "\n";
  const auto spath = write_text("shuffled.csv", shuffled.str());
  // Order of first appearance changes with shuffling, so pin it.
  const Dataset reordered = load_csv(spath, {}, ds.populations, ds.responses);
  check_same(ds, reordered);

  const auto again = (scratch() / "again.csv").string();
  write_csv(reordered, again);
  auto a = read_lines(path), b = read_lines(again);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
}

TEST_CASE("CSV schema and severity order") {
  const auto path = write_text("custom.csv",
                               "id,dx,index,val\n"
                               "a,S,CI,1.5\nb,C,CI,2.5\nc,C,CI,3.0\nd,G,CI,0.5\ne,M,CI,1.0\n");
  CsvSchema schema{"id", "dx", "index", "val"};
  const Dataset ds = load_csv(path, schema, {"C", "G", "M", "S"});
  CHECK(ds.populations == std::vector<std::string>{"C", "G", "M", "S"});
  CHECK(ds.sizes() == std::vector<int>{2, 1, 1, 1});
  CHECK(ds.values[0][0] == std::vector<double>{2.5, 3.0});
  CHECK(ds.flat_index(3, 0) == 4);
}

TEST_CASE("CSV errors") {
  const std::string header = "patient,population,response,value\n";
  CHECK_THROWS_AS(load_csv(write_text("empty.csv", "")), DataError);
  CHECK_THROWS_AS(load_csv(write_text("header.csv", header)), DataError);
  CHECK_THROWS_AS(load_csv((scratch() / "missing.csv").string()), DataError);

  CHECK(error_of(write_text("nan.csv", header + "a,1,y,1.0\nb,1,y,abc\n")).find("row 3") !=
        std::string::npos);
  CHECK(error_of(write_text("cell.csv", header + "a,1,y,1.0\nb,1,,2.0\n")).find("row 3") !=
        std::string::npos);
  CHECK(error_of(write_text("short.csv", header + "a,1,y\n")).find("row 2") != std::string::npos);
  CHECK(error_of(write_text("pop.csv", header + "a,1,y,1.0\nb,7,y,2.0\n"), {"1", "2"})
            .find("unknown population") != std::string::npos);
  CHECK(error_of(write_text("dup.csv", header + "a,1,y,1.0\na,1,y,2.0\n")).find("duplicate") !=
        std::string::npos);
  CHECK(error_of(write_text("hole.csv", header + "a,1,y,1.0\na,1,z,2.0\nb,1,y,3.0\n"))
            .find("no value") != std::string::npos);
  CHECK(error_of(write_text("col.csv", "patient,group,response,value\na,1,y,1\n"))
            .find("missing column") != std::string::npos);
  CHECK(error_of(write_text("move.csv", header + "a,1,y,1.0\na,2,z,2.0\n")).find("row 3") !=
        std::string::npos);
  CHECK_THROWS_AS(load_csv(write_text("nopop.csv", header + "a,1,y,1.0\n"), {}, {"1", "2"}),
                  DataError);
}
