#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace jitterlab {

/// Flat key=value settings. Lines starting with '#' are comments. Grids are
/// written either as a list "a,b,c" or as an inclusive range "lo:hi:count".
class Config {
 public:
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  /// Later values win; used for command-line overrides.
  void set(const std::string& key, const std::string& value);
  bool contains(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_grid(const std::string& key, const std::vector<double>& fallback) const;

  /// Raises a config error naming the first key that no getter asked for.
  void reject_unread() const;

  /// Sorted key=value lines of the explicit settings plus every default a
  /// getter resolved. Two runs with equal canonical text are identical.
  std::string canonical() const;
  std::string hash() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::optional<std::string> lookup(const std::string& key) const;
  void record(const std::string& key, const std::string& resolved) const;

  std::map<std::string, std::string> entries_;
  mutable std::set<std::string> read_;
  mutable std::map<std::string, std::string> resolved_;
};

/// Parses a grid value; key is only used in error messages.
std::vector<double> parse_grid(const std::string& key, std::string_view text);

}  // namespace jitterlab
