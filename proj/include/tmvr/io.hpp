#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "tmvr/core.hpp"

namespace tmvr {

// Shortest text that reads back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::string csv_header(std::size_t d) {
  std::string h;
  for (std::size_t k = 0; k < d; ++k) h += (k ? ",x" : "x") + std::to_string(k);
  return h;
}

// One row per point, comma-separated. With `header` the first line is
// skipped. Blank lines are ignored.
inline Mat read_csv_matrix(std::istream& is, bool header, const std::string& name = "csv") {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  bool skipped = !header;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    if (!skipped) {
      skipped = true;
      continue;
    }
    std::vector<double> row;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      double v = 0.0;
      if (!parse_double(rest.substr(0, comma), v))
        throw std::invalid_argument(name + ":" + std::to_string(lineno) + ": not a number: '" +
                                    std::string(trim(rest.substr(0, comma))) + "'");
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::invalid_argument(name + ":" + std::to_string(lineno) + ": expected " +
                                  std::to_string(rows.front().size()) + " columns, found " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument(name + ": no data rows");
  Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].size(); ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  return m;
}

inline Mat read_csv_matrix(const std::string& path, bool header) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open " + path);
  return read_csv_matrix(is, header, path);
}

inline ParticleEnsemble read_ensemble_csv(const std::string& path, bool header) {
  return ParticleEnsemble(read_csv_matrix(path, header));
}

inline void write_csv_matrix(std::ostream& os, const Mat& m, const std::string& header = {}) {
  if (!header.empty()) os << header << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) os << (k ? "," : "") << format_double(m(i, k));
    os << '\n';
  }
}

inline void write_ensemble_csv(const std::string& path, const ParticleEnsemble& e, bool header) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_csv_matrix(os, e.points(), header ? csv_header(e.dimension()) : std::string{});
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::invalid_argument("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace tmvr
