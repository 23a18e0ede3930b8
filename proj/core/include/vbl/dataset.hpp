#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vbl/linalg.hpp"

namespace vbl {

// The observed set Y: one row per instance, one column per coordinate.
struct Dataset {
  Matrix values;
  std::vector<std::string> columns;

  Dataset() = default;
  explicit Dataset(Matrix v);
  Dataset(Matrix v, std::vector<std::string> names);

  Eigen::Index size() const { return values.rows(); }
  int dim() const { return static_cast<int>(values.cols()); }
  auto row(Eigen::Index n) const { return values.row(n).transpose(); }

  // Default column names x0, x1, ...
  static std::vector<std::string> default_columns(int d, const std::string& prefix = "x");
};

namespace csv {

// Comma-separated, one header row, 17 significant digits.
void write(std::ostream& out, const Matrix& values, const std::vector<std::string>& header);
void write(const std::filesystem::path& path, const Matrix& values, const std::vector<std::string>& header);
void write(const std::filesystem::path& path, const Dataset& data);

// Parses a CSV with a header row. An empty file yields a dataset with no rows and no
// columns. Throws InvalidArgument with the offending line number on malformed input and
// std::runtime_error when the file cannot be opened.
Dataset read(std::istream& in);
Dataset read(const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace csv
}  // namespace vbl
