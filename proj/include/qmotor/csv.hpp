#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qmotor {

/// Floating point cell with 12 significant digits, the project-wide CSV
/// format (regression-diffable).
inline std::string csv_num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

/// Single-header-line CSV writer with a fixed column count.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns)
      : out_(path), ncols_(columns.size()) {
    if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
    for (size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ',';
      out_ << columns[i];
    }
    out_ << '\n';
  }

  void row(const std::vector<double>& cells) {
    if (cells.size() != ncols_) throw std::logic_error("CsvWriter: column count mismatch");
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << csv_num(cells[i]);
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
  size_t ncols_;
};

}  // namespace qmotor
