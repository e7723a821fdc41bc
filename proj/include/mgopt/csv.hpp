#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace mgopt {

/// Minimal CSV writer: one header row, numeric cells at fixed significant
/// digits so repeated runs produce byte-identical files.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    for (std::size_t i = 0; i < header.size(); ++i)
      out_ << (i ? "," : "") << header[i];
    out_ << "\n";
  }

  CsvWriter& cell(double v) {
    std::ostringstream ss;
    ss << std::setprecision(12) << v;
    cells_.push_back(ss.str());
    return *this;
  }
  CsvWriter& cell(int v) {
    cells_.push_back(std::to_string(v));
    return *this;
  }
  CsvWriter& cell(const std::string& v) {
    cells_.push_back(v);
    return *this;
  }
  void endrow() {
    for (std::size_t i = 0; i < cells_.size(); ++i)
      out_ << (i ? "," : "") << cells_[i];
    out_ << "\n";
    cells_.clear();
  }

 private:
  std::ofstream out_;
  std::vector<std::string> cells_;
};

}  // namespace mgopt
