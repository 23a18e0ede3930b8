#include "key_values.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace vbl::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<double> to_real(const std::string& s) {
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (*end != '\0' || errno == ERANGE || std::isnan(v)) return std::nullopt;
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

KeyValues KeyValues::parse(std::istream& in, const std::string& source) {
  KeyValues kv;
  kv.source_ = source;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw UsageError(where + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw UsageError(where + ": empty key");
    if (kv.values_.count(key)) throw UsageError(where + ": duplicate key '" + key + "'");
    kv.values_[key] = trim(t.substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path.string() + "'");
  return parse(in, path.string());
}

void KeyValues::bad(const std::string& key, const std::string& why) const {
  throw UsageError(source_ + ": key '" + key + "': " + why);
}

std::optional<std::string> KeyValues::text(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> KeyValues::real(const std::string& key) const {
  auto t = text(key);
  if (!t) return std::nullopt;
  auto v = to_real(*t);
  if (!v) bad(key, "invalid number '" + *t + "'");
  return v;
}

std::optional<long long> KeyValues::integer(const std::string& key) const {
  auto t = text(key);
  if (!t) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(t->c_str(), &end, 10);
  if (t->empty() || *end != '\0' || errno == ERANGE) bad(key, "invalid integer '" + *t + "'");
  return v;
}

std::optional<bool> KeyValues::boolean(const std::string& key) const {
  auto t = text(key);
  if (!t) return std::nullopt;
  std::string l = *t;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
  if (l == "false" || l == "0" || l == "no" || l == "off") return false;
  bad(key, "invalid boolean '" + *t + "'");
}

std::optional<std::vector<double>> KeyValues::reals(const std::string& key) const {
  auto t = text(key);
  if (!t) return std::nullopt;
  std::vector<double> out;
  for (const auto& part : split(*t, ',')) {
    auto v = to_real(part);
    if (!v) bad(key, "invalid number '" + trim(part) + "'");
    out.push_back(*v);
  }
  if (out.empty()) bad(key, "empty list");
  return out;
}

std::optional<std::vector<std::vector<double>>> KeyValues::groups(const std::string& key) const {
  auto t = text(key);
  if (!t) return std::nullopt;
  std::vector<std::vector<double>> out;
  for (const auto& g : split(*t, ';')) {
    std::vector<double> row;
    for (const auto& part : split(g, ',')) {
      auto v = to_real(part);
      if (!v) bad(key, "invalid number '" + trim(part) + "'");
      row.push_back(*v);
    }
    out.push_back(std::move(row));
  }
  return out;
}

void KeyValues::reject_unknown(const std::vector<std::string>& allowed) const {
  for (const auto& [k, v] : values_) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw UsageError(source_ + ": unknown key '" + k + "'");
    }
  }
}

}  // namespace vbl::cli
