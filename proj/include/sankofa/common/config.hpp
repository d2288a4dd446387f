#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sankofa {

/// Sectioned key-value configuration (`[section]` headers, `key = value` lines).
class Config {
 public:
  using Section = std::map<std::string, std::string>;

  Config() = default;

  /// Throws Error{ParseError} on malformed input, Error{UnreadableFile} if missing.
  static Config load(const std::filesystem::path& path);
  static Config parse(const std::string& text);

  bool has_section(const std::string& section) const;
  const Section* section(const std::string& name) const;

  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long long get_int(const std::string& section, const std::string& key, long long fallback) const;

  /// Names of sections starting with `prefix`, with the prefix stripped, sorted.
  std::vector<std::string> sections_with_prefix(const std::string& prefix) const;

  void set(const std::string& section, const std::string& key, const std::string& value);

 private:
  std::map<std::string, Section> sections_;
};

}  // namespace sankofa
