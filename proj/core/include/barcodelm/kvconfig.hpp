#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

namespace barcodelm {

// Flat `key=value` text file. Keys are written in sorted order so that
// serialized configs are byte-stable. Lines starting with '#' are comments.
class KvMap {
 public:
  KvMap() = default;

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set(const std::string& key, std::int64_t value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, std::uint64_t value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, double value);
  void set(const std::string& key, bool value) { values_[key] = value ? "true" : "false"; }

  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  bool get_bool_or(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

  void write(std::ostream& out) const;
  static KvMap read(std::istream& in);

  void write_file(const std::string& path) const;
  static KvMap read_file(const std::string& path);

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace barcodelm
