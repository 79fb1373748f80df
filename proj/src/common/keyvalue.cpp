#include "dvbf/keyvalue.hpp"

#include <charconv>
#include <sstream>

#include "dvbf/errors.hpp"

namespace dvbf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void KeyValues::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void KeyValues::set(const std::string& key, double value) { set(key, format_double(value)); }

bool KeyValues::has(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return true;
  return false;
}

const std::string& KeyValues::get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  throw ContractError("missing key '" + key + "'");
}

double KeyValues::get_double(const std::string& key) const {
  const auto& s = get(key);
  double v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw ContractError("key '" + key + "': '" + s + "' is not a number");
  }
  return v;
}

long long KeyValues::get_int(const std::string& key) const {
  const auto& s = get(key);
  long long v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw ContractError("key '" + key + "': '" + s + "' is not an integer");
  }
  return v;
}

bool KeyValues::get_bool(const std::string& key) const {
  const auto& s = get(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ContractError("key '" + key + "': '" + s + "' is not a boolean");
}

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ContractError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ContractError("line " + std::to_string(lineno) + ": empty key");
    if (kv.has(key)) throw ContractError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv.entries_.emplace_back(key, trim(t.substr(eq + 1)));
  }
  return kv;
}

std::string KeyValues::emit() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

}  // namespace dvbf
