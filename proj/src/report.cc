// Apache License, Version 2.0, refer to LICENSE.txt

#include "shdp/report.hh"

#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "shdp/io.hh"

namespace shdp {

std::string file_stem(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
    out += ok ? c : '_';
  }
  return out.empty() ? "response" : out;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

std::string coclustering_svg(const Eigen::MatrixXd& coclust, const std::vector<int>& order,
                             const std::vector<int>& boundaries, const std::string& title) {
  const int n = static_cast<int>(order.size());
  const double cell = n > 0 ? std::max(2.0, 600.0 / n) : 1.0;
  const double size = cell * n;
  const double margin = 30.0;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * margin
      << "\" height=\"" << size + 2 * margin << "\">\n";
  svg << "<title>" << title << "</title>\n";
  svg << "<text x=\"" << margin << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
      << title << "</text>\n";
  svg << "<g transform=\"translate(" << margin << ',' << margin << ")\">\n";
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double p = std::clamp(coclust(order[r], order[c]), 0.0, 1.0);
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - p)));
      svg << "<rect x=\"" << c * cell << "\" y=\"" << r * cell << "\" width=\"" << cell
          << "\" height=\"" << cell << "\" fill=\"rgb(" << shade << ',' << shade << ',' << shade
          << ")\"/>\n";
    }
  }
  for (int b : boundaries) {
    const double x = b * cell;
    svg << "<line x1=\"" << x << "\" y1=\"0\" x2=\"" << x << "\" y2=\"" << size
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg << "<line x1=\"0\" y1=\"" << x << "\" x2=\"" << size << "\" y2=\"" << x
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  }
  svg << "<rect x=\"0\" y=\"0\" width=\"" << size << "\" height=\"" << size
      << "\" fill=\"none\" stroke=\"black\"/>\n</g>\n</svg>\n";
  return svg.str();
}

void write_summary_outputs(const std::string& dir, const Dataset& raw,
                           const std::vector<ResponseSummary>& summaries) {
  std::filesystem::create_directories(dir);
  const auto& names = raw.populations;
  auto path = [&](const std::string& f) { return (std::filesystem::path(dir) / f).string(); };

  std::ostringstream parts;
  parts << "partition";
  for (const auto& s : summaries) parts << ',' << csv_field(s.response);
  parts << '\n';
  if (!summaries.empty()) {
    const auto& entries = summaries.front().partitions.entries;
    for (std::size_t k = 0; k < entries.size(); ++k) {
      parts << csv_field(entries[k].first.to_string(names));
      for (const auto& s : summaries) parts << ',' << fmt(s.partitions.entries[k].second);
      parts << '\n';
    }
  }
  parts << "entropy";
  for (const auto& s : summaries) parts << ',' << fmt(s.entropy);
  parts << '\n';
  write_file_atomic(path("partitions.csv"), parts.str());

  std::ostringstream map;
  map << "response,map_partition,probability\n";
  for (const auto& s : summaries) {
    const auto& mode = s.partitions.mode();
    map << csv_field(s.response) << ',' << csv_field(mode.first.to_string(names)) << ','
        << fmt(mode.second) << '\n';
  }
  write_file_atomic(path("map_partitions.csv"), map.str());

  std::ostringstream ordered;
  ordered << "response,ordered_partition,partition,probability\n";
  for (const auto& s : summaries) {
    for (const auto& o : s.ordered) {
      ordered << csv_field(s.response) << ',' << csv_field(o.to_string(names)) << ','
              << csv_field(o.partition.to_string(names)) << ',' << fmt(o.probability) << '\n';
    }
  }
  write_file_atomic(path("ordered_partitions.csv"), ordered.str());

  std::ostringstream counts;
  counts << "response,clusters,probability\n";
  for (const auto& s : summaries) {
    for (std::size_t k = 0; k < s.cluster_counts.size(); ++k) {
      if (s.cluster_counts[k] > 0.0) {
        counts << csv_field(s.response) << ',' << k << ',' << fmt(s.cluster_counts[k]) << '\n';
      }
    }
  }
  write_file_atomic(path("cluster_counts.csv"), counts.str());

  std::ostringstream cis;
  cis << "response,population,mean,lower,upper,ess\n";
  for (const auto& s : summaries) {
    for (std::size_t j = 0; j < s.intervals.size(); ++j) {
      const auto& ci = s.intervals[j];
      cis << csv_field(s.response) << ',' << csv_field(names[j]) << ',' << fmt(ci.mean) << ','
          << fmt(ci.lower) << ',' << fmt(ci.upper) << ',' << fmt(ci.ess) << '\n';
    }
  }
  write_file_atomic(path("credible_intervals.csv"), cis.str());

  std::ostringstream binder;
  binder << "response,patient,population,cluster\n";
  for (const auto& s : summaries) {
    for (int j = 0; j < raw.num_populations(); ++j) {
      for (std::size_t i = 0; i < raw.patients[j].size(); ++i) {
        binder << csv_field(s.response) << ',' << csv_field(raw.patients[j][i]) << ','
               << csv_field(names[j]) << ',' << s.binder.label(raw.flat_index(j, i)) << '\n';
      }
    }
  }
  write_file_atomic(path("binder.csv"), binder.str());

  std::vector<int> boundaries;
  int acc = 0;
  for (int j = 0; j + 1 < raw.num_populations(); ++j) {
    acc += static_cast<int>(raw.patients[j].size());
    boundaries.push_back(acc);
  }
  for (const auto& s : summaries) {
    const std::string stem = file_stem(s.response);
    const int n = static_cast<int>(s.coclust.rows());
    std::ostringstream mat;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) mat << (c ? "," : "") << fmt(s.coclust(r, c));
      mat << '\n';
    }
    write_file_atomic(path("coclust_" + stem + ".csv"), mat.str());
    std::vector<int> natural(n);
    std::iota(natural.begin(), natural.end(), 0);
    write_file_atomic(path("coclust_" + stem + "_population.svg"),
                      coclustering_svg(s.coclust, natural, boundaries,
                                       s.response + ": patients by population"));
    write_file_atomic(path("coclust_" + stem + "_similarity.svg"),
                      coclustering_svg(s.coclust, average_linkage(s.coclust).leaf_order(), {},
                                       s.response + ": patients by similarity"));
    std::ostringstream dens;
    dens << 'x';
    for (const auto& p : names) dens << ',' << csv_field(p);
    dens << '\n';
    for (std::size_t g = 0; g < s.grid.size(); ++g) {
      dens << fmt(s.grid[g]);
      for (const auto& d : s.density) dens << ',' << fmt(d[g]);
      dens << '\n';
    }
    write_file_atomic(path("density_" + stem + ".csv"), dens.str());
  }
}

}  // namespace shdp
