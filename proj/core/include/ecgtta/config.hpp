#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ecgtta {

// Flat `key = value` configuration with `#` comments. Every key the project
// understands has a registered default; loading a file with an unknown key
// fails (typo protection). Values are stored as strings and converted on
// access.
class Config {
 public:
  // Constructs with all registered defaults in place.
  Config();

  // Parses a config file and overlays it on the defaults.
  // Throws std::runtime_error on I/O failure, parse error, or unknown key.
  void load_file(const std::string& path);

  // Sets one key (CLI override path). Throws on unknown key.
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  const std::string& get_str(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;  // on/off, true/false, 1/0
  std::vector<double> get_list(const std::string& key) const;  // comma-separated

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ecgtta
