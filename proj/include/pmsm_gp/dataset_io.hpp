// Dataset CSV format:
//
//   # noise_std=<sigma_T>
//   phi_m,omega_m,y
//   <phi_m>,<omega_m>,<y>
//   ...
#pragma once

#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pmsm_gp/gp.hpp"

namespace pmsm_gp {

class DatasetFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kDatasetHeader = "phi_m,omega_m,y";

inline void write_dataset_csv(std::ostream& os, const Dataset& d) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "# noise_std=" << d.noise_std << '\n' << kDatasetHeader << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    os << d.inputs[i].phi_m << ',' << d.inputs[i].omega_m << ',' << d.outputs[i] << '\n';
  }
}

namespace detail {

inline double parse_double(std::string_view s, std::size_t line_no) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw DatasetFormatError("dataset line " + std::to_string(line_no) + ": bad number '" +
                             std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

inline Dataset read_dataset_csv(std::istream& is) {
  Dataset d;
  std::string line;
  std::size_t line_no = 0;
  bool have_noise = false;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      constexpr std::string_view key = "noise_std=";
      const auto pos = line.find(key);
      if (pos != std::string::npos) {
        d.noise_std = detail::parse_double(std::string_view(line).substr(pos + key.size()), line_no);
        have_noise = true;
      }
      continue;
    }
    if (!have_header) {
      if (line != kDatasetHeader)
        throw DatasetFormatError("dataset: expected header '" + std::string(kDatasetHeader) + "'");
      have_header = true;
      continue;
    }
    std::string_view row(line);
    const auto c1 = row.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : row.find(',', c1 + 1);
    if (c2 == std::string_view::npos || row.find(',', c2 + 1) != std::string_view::npos)
      throw DatasetFormatError("dataset line " + std::to_string(line_no) + ": expected 3 columns");
    d.inputs.push_back({detail::parse_double(row.substr(0, c1), line_no),
                        detail::parse_double(row.substr(c1 + 1, c2 - c1 - 1), line_no)});
    d.outputs.push_back(detail::parse_double(row.substr(c2 + 1), line_no));
  }
  if (!have_noise) throw DatasetFormatError("dataset: missing '# noise_std=' comment");
  if (!have_header) throw DatasetFormatError("dataset: missing header");
  return d;
}

inline void save_dataset(const std::string& path, const Dataset& d) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_dataset_csv(os, d);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_dataset_csv(is);
}

}  // namespace pmsm_gp
