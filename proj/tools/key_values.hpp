#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vbl::cli {

// Bad command line, configuration or input file. Maps to exit code 2.
class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Flat `key = value` configuration. Blank lines and lines starting with '#' are ignored.
class KeyValues {
public:
  static KeyValues parse(std::istream& in, const std::string& source);
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::optional<std::string> text(const std::string& key) const;
  std::optional<double> real(const std::string& key) const;
  std::optional<long long> integer(const std::string& key) const;
  std::optional<bool> boolean(const std::string& key) const;
  // Comma-separated reals.
  std::optional<std::vector<double>> reals(const std::string& key) const;
  // Semicolon-separated groups of comma-separated reals.
  std::optional<std::vector<std::vector<double>>> groups(const std::string& key) const;

  // Throws UsageError naming the first key not in `allowed`.
  void reject_unknown(const std::vector<std::string>& allowed) const;

  const std::string& source() const { return source_; }

private:
  [[noreturn]] void bad(const std::string& key, const std::string& why) const;

  std::string source_;
  std::map<std::string, std::string> values_;
};

}  // namespace vbl::cli
