#include "satsplit/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "satsplit/error.hpp"

namespace satsplit {

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto pos = text.find(sep, start);
    const auto end = pos == std::string_view::npos ? text.size() : pos;
    auto piece = trim(text.substr(start, end - start));
    if (!piece.empty()) out.push_back(std::move(piece));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::uint64_t parse_u64(std::string_view text, const std::string& field, std::size_t line) {
  const auto s = trim(text);
  std::uint64_t value = 0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (s.empty() || ec != std::errc{} || ptr != end) {
    throw ConfigError("expected a non-negative integer for '" + field + "', got '" + s + "'", line,
                      field);
  }
  return value;
}

bool parse_bool(std::string_view text, const std::string& field, std::size_t line) {
  auto s = trim(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("expected a boolean for '" + field + "', got '" + s + "'", line, field);
}

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const auto line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line_no);
    auto key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError("empty key", line_no);
    cfg.entries_.push_back({std::move(key), trim(std::string_view(line).substr(eq + 1)), line_no});
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  std::erase_if(entries_, [&](const Entry& e) { return e.key == key; });
  entries_.push_back({key, value, 0});
}

bool KeyValueConfig::has(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.key == key; });
}

std::optional<KeyValueConfig::Entry> KeyValueConfig::find(const std::string& key) const {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->key == key) return *it;
  }
  return std::nullopt;
}

std::vector<KeyValueConfig::Entry> KeyValueConfig::all(const std::string& key) const {
  std::vector<Entry> out;
  std::copy_if(entries_.begin(), entries_.end(), std::back_inserter(out),
               [&](const Entry& e) { return e.key == key; });
  return out;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto e = find(key);
  return e ? e->value : fallback;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto e = find(key);
  return e ? parse_u64(e->value, key, e->line) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto e = find(key);
  return e ? parse_bool(e->value, key, e->line) : fallback;
}

void KeyValueConfig::reject_unknown(const std::set<std::string>& known) const {
  for (const auto& e : entries_) {
    if (!known.contains(e.key)) throw ConfigError("unknown key '" + e.key + "'", e.line, e.key);
  }
}

}  // namespace satsplit
