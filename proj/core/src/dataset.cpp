#include "vbl/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vbl/error.hpp"

namespace vbl {

Dataset::Dataset(Matrix v) : values(std::move(v)), columns(default_columns(static_cast<int>(values.cols()))) {}

Dataset::Dataset(Matrix v, std::vector<std::string> names) : values(std::move(v)), columns(std::move(names)) {
  if (static_cast<Eigen::Index>(columns.size()) != values.cols()) {
    throw InvalidArgument("Dataset: column name count does not match data width");
  }
}

std::vector<std::string> Dataset::default_columns(int d, const std::string& prefix) {
  std::vector<std::string> out;
  out.reserve(d);
  for (int j = 0; j < d; ++j) out.push_back(prefix + std::to_string(j));
  return out;
}

namespace csv {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& field, std::size_t line_no) {
  const std::string f = trim(field);
  double v = 0.0;
  const auto* first = f.data();
  const auto* last = f.data() + f.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (f.empty() || ec != std::errc() || ptr != last) {
    // from_chars rejects "inf"/"nan" spellings with a sign; fall back to strtod.
    char* end = nullptr;
    v = std::strtod(f.c_str(), &end);
    if (f.empty() || end != f.c_str() + f.size()) {
      throw InvalidArgument("csv: line " + std::to_string(line_no) + ": cannot parse '" + f + "' as a number");
    }
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

void write(std::ostream& out, const Matrix& values, const std::vector<std::string>& header) {
  if (static_cast<Eigen::Index>(header.size()) != values.cols()) {
    throw InvalidArgument("csv::write: header width does not match data width");
  }
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (Eigen::Index n = 0; n < values.rows(); ++n) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << format_double(values(n, j));
    out << '\n';
  }
}

void write(const std::filesystem::path& path, const Matrix& values, const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write(out, values, header);
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void write(const std::filesystem::path& path, const Dataset& data) { write(path, data.values, data.columns); }

Dataset read(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      for (auto& h : split(line)) header.push_back(trim(h));
      break;
    }
  }
  if (header.empty()) return Dataset{};

  const auto width = header.size();
  std::vector<double> flat;
  Eigen::Index rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (fields.size() != width) {
      throw InvalidArgument("csv: line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                            " fields, got " + std::to_string(fields.size()));
    }
    for (const auto& f : fields) flat.push_back(parse_double(f, line_no));
    ++rows;
  }
  Matrix values(rows, static_cast<Eigen::Index>(width));
  for (Eigen::Index n = 0; n < rows; ++n) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) values(n, j) = flat[n * width + j];
  }
  return Dataset(std::move(values), std::move(header));
}

Dataset read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return read(in);
}

}  // namespace csv
}  // namespace vbl
