#include "jitterlab/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "jitterlab/errors.hpp"
#include "jitterlab/io.hpp"

namespace jitterlab {
namespace {

std::string_view trim(std::string_view text) {
  const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  return text;
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  return std::all_of(key.begin(), key.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

double to_double(const std::string& key, std::string_view text) {
  text = trim(text);
  double value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty() || !std::isfinite(value)) {
    throw ConfigError(key, "key '" + key + "': expected a finite number, got '" + std::string(text) + "'");
  }
  return value;
}

long long to_int(const std::string& key, std::string_view text) {
  text = trim(text);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError(key, "key '" + key + "': expected an integer, got '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::vector<double> parse_grid(const std::string& key, std::string_view text) {
  text = trim(text);
  if (text.empty()) throw ConfigError(key, "key '" + key + "': grid is empty");
  std::vector<double> out;
  if (text.find(':') != std::string_view::npos) {
    const auto first = text.find(':');
    const auto second = text.find(':', first + 1);
    if (second == std::string_view::npos || text.find(':', second + 1) != std::string_view::npos) {
      throw ConfigError(key, "key '" + key + "': range grids are written lo:hi:count");
    }
    const double lo = to_double(key, text.substr(0, first));
    const double hi = to_double(key, text.substr(first + 1, second - first - 1));
    const long long count = to_int(key, text.substr(second + 1));
    if (count < 1 || (count == 1 && lo != hi) || hi < lo) {
      throw ConfigError(key, "key '" + key + "': range needs hi >= lo and count >= 2 (1 if lo == hi)");
    }
    for (long long i = 0; i < count; ++i) {
      out.push_back(count == 1 ? lo
                               : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
    }
    return out;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string_view::npos ? text.size() : comma;
    out.push_back(to_double(key, text.substr(start, end - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

static std::string format_grid(const std::vector<double>& grid) {
  std::string out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i) out += ',';
    out += format_number(grid[i]);
  }
  return out;
}

Config Config::parse(std::string_view text) {
  Config config;
  std::istringstream stream{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(stream, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(line), "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    if (!valid_key(key)) {
      throw ConfigError(key, "line " + std::to_string(line_no) + ": invalid key '" + key + "'");
    }
    if (config.entries_.count(key)) {
      throw ConfigError(key, "line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    config.entries_[key] = std::string(trim(line.substr(eq + 1)));
  }
  return config;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot read config file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

void Config::set(const std::string& key, const std::string& value) {
  if (!valid_key(key)) throw ConfigError(key, "invalid key '" + key + "'");
  entries_[key] = std::string(trim(value));
}

bool Config::contains(const std::string& key) const { return entries_.count(key) != 0; }

std::optional<std::string> Config::lookup(const std::string& key) const {
  read_.insert(key);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void Config::record(const std::string& key, const std::string& resolved) const {
  resolved_[key] = resolved;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const std::string value = lookup(key).value_or(fallback);
  record(key, value);
  return value;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto text = lookup(key);
  const double value = text ? to_double(key, *text) : fallback;
  record(key, format_number(value));
  return value;
}

long long Config::get_int(const std::string& key, long long fallback) const {
  const auto text = lookup(key);
  const long long value = text ? to_int(key, *text) : fallback;
  record(key, std::to_string(value));
  return value;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto text = lookup(key);
  std::uint64_t value = fallback;
  if (text) {
    const std::string_view view = trim(*text);
    const auto [ptr, ec] = std::from_chars(view.data(), view.data() + view.size(), value);
    if (ec != std::errc() || ptr != view.data() + view.size() || view.empty()) {
      throw ConfigError(key, "key '" + key + "': expected an unsigned integer, got '" + *text + "'");
    }
  }
  record(key, std::to_string(value));
  return value;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto text = lookup(key);
  bool value = fallback;
  if (text) {
    if (*text == "true" || *text == "1" || *text == "yes") {
      value = true;
    } else if (*text == "false" || *text == "0" || *text == "no") {
      value = false;
    } else {
      throw ConfigError(key, "key '" + key + "': expected true or false, got '" + *text + "'");
    }
  }
  record(key, value ? "true" : "false");
  return value;
}

std::vector<double> Config::get_grid(const std::string& key,
                                     const std::vector<double>& fallback) const {
  const auto text = lookup(key);
  std::vector<double> value = text ? parse_grid(key, *text) : fallback;
  if (value.empty()) throw ConfigError(key, "key '" + key + "': grid is empty");
  record(key, format_grid(value));
  return value;
}

void Config::reject_unread() const {
  for (const auto& [key, value] : entries_) {
    if (!read_.count(key)) throw ConfigError(key, "unknown key '" + key + "'");
  }
}

std::string Config::canonical() const {
  std::map<std::string, std::string> all = resolved_;
  for (const auto& [key, value] : entries_) all.emplace(key, value);
  std::string out;
  for (const auto& [key, value] : all) out += key + "=" + value + "\n";
  return out;
}

std::string Config::hash() const { return hex64(fnv1a64(canonical())); }

}  // namespace jitterlab
