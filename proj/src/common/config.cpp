#include "sankofa/common/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <sstream>

#include "sankofa/common/error.hpp"

namespace sankofa {

namespace pt = boost::property_tree;

namespace {

Config from_stream(std::istream& in, const std::string& origin) {
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(Errc::ParseError, origin + ": " + e.message() + " (line " +
                                      std::to_string(e.line()) + ")");
  }
  Config config;
  for (const auto& [section, children] : tree) {
    if (children.empty()) {
      throw Error(Errc::ParseError, origin + ": key '" + section + "' outside any section");
    }
    for (const auto& [key, value] : children) {
      config.set(section, key, value.get_value<std::string>());
    }
  }
  return config;
}

}  // namespace

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::UnreadableFile, path.string());
  return from_stream(in, path.string());
}

Config Config::parse(const std::string& text) {
  std::istringstream in(text);
  return from_stream(in, "<string>");
}

bool Config::has_section(const std::string& name) const { return sections_.count(name) != 0; }

const Config::Section* Config::section(const std::string& name) const {
  auto it = sections_.find(name);
  return it == sections_.end() ? nullptr : &it->second;
}

std::optional<std::string> Config::get(const std::string& section,
                                       const std::string& key) const {
  const Section* s = this->section(section);
  if (!s) return std::nullopt;
  auto it = s->find(key);
  if (it == s->end()) return std::nullopt;
  return it->second;
}

std::string Config::get_or(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
  return get(section, key).value_or(fallback);
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
  auto v = get(section, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw Error(Errc::ParseError, "[" + section + "] " + key + " is not a number: " + *v);
  }
}

long long Config::get_int(const std::string& section, const std::string& key,
                          long long fallback) const {
  auto v = get(section, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    long long n = std::stoll(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return n;
  } catch (const std::exception&) {
    throw Error(Errc::ParseError, "[" + section + "] " + key + " is not an integer: " + *v);
  }
}

std::vector<std::string> Config::sections_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [name, _] : sections_) {
    if (name.size() > prefix.size() && name.compare(0, prefix.size(), prefix) == 0) {
      out.push_back(name.substr(prefix.size()));
    }
  }
  return out;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  sections_[section][key] = value;
}

}  // namespace sankofa
