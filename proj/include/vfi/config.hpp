#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace vfi {

// Flat key=value text. Blank lines and lines starting with '#' are ignored;
// whitespace around keys and values is trimmed. Later keys override earlier.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;

  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set(const std::string& key, double value);
  void set(const std::string& key, int value);

  const std::map<std::string, std::string>& entries() const { return values_; }

  // Sorted key=value lines.
  std::string to_string() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> values_;
};

// Shortest decimal that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);
int parse_int(std::string_view text);

}  // namespace vfi
