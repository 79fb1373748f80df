#pragma once

// Flat "key = value" text, one entry per line. '#' starts a comment line.
// Keys keep insertion order so that emitted files are stable.

#include <string>
#include <utility>
#include <vector>

namespace dvbf {

class KeyValues {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  bool has(const std::string& key) const;
  // Throws ContractError when the key is missing.
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  // Throws ContractError naming the line on malformed input or duplicate keys.
  static KeyValues parse(const std::string& text);
  std::string emit() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace dvbf
