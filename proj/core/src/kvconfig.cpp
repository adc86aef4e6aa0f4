#include "barcodelm/kvconfig.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "barcodelm/errors.hpp"

namespace barcodelm {

void KvMap::set(const std::string& key, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  values_[key] = buf;
}

const std::string& KvMap::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

std::string KvMap::get_or(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::int64_t KvMap::get_int(const std::string& key) const {
  try {
    return std::stoll(get(key));
  } catch (const std::invalid_argument&) {
    throw ConfigError("config key '" + key + "' is not an integer: " + get(key));
  }
}

std::int64_t KvMap::get_int_or(const std::string& key, std::int64_t fallback) const {
  return contains(key) ? get_int(key) : fallback;
}

double KvMap::get_double(const std::string& key) const {
  try {
    return std::stod(get(key));
  } catch (const std::invalid_argument&) {
    throw ConfigError("config key '" + key + "' is not a number: " + get(key));
  }
}

double KvMap::get_double_or(const std::string& key, double fallback) const {
  return contains(key) ? get_double(key) : fallback;
}

bool KvMap::get_bool_or(const std::string& key, bool fallback) const {
  if (!contains(key)) return fallback;
  const std::string& v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "' is not a boolean: " + v);
}

void KvMap::write(std::ostream& out) const {
  for (const auto& [key, value] : values_) out << key << '=' << value << '\n';
}

KvMap KvMap::read(std::istream& in) {
  KvMap map;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_number) +
                        ": expected key=value, got '" + line + "'");
    }
    map.values_[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return map;
}

void KvMap::write_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write(out);
}

KvMap KvMap::read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read(in);
}

}  // namespace barcodelm
