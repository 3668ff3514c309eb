#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace satsplit {

/// Plain-text `key = value` configuration.  `#` starts a comment; blank lines
/// are ignored; a key may repeat (tables such as `resource` use this).
/// Malformed input raises ConfigError carrying the offending line.
class KeyValueConfig {
 public:
  struct Entry {
    std::string key;
    std::string value;
    std::size_t line = 0;
  };

  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::string& path);

  /// Replaces every existing entry for `key`.
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  /// Last occurrence wins.
  std::optional<Entry> find(const std::string& key) const;
  std::vector<Entry> all(const std::string& key) const;
  const std::vector<Entry>& entries() const { return entries_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void reject_unknown(const std::set<std::string>& known) const;

 private:
  std::vector<Entry> entries_;
};

std::uint64_t parse_u64(std::string_view text, const std::string& field = {}, std::size_t line = 0);
bool parse_bool(std::string_view text, const std::string& field = {}, std::size_t line = 0);
std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);

}  // namespace satsplit
