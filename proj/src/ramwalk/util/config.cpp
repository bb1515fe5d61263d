#include "ramwalk/util/config.hpp"

#include <boost/algorithm/string/trim.hpp>
#include <charconv>
#include <fstream>
#include <sstream>

namespace ramwalk::util {

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    boost::algorithm::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
      section = boost::algorithm::trim_copy(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    auto key = boost::algorithm::trim_copy(line.substr(0, eq));
    auto value = boost::algorithm::trim_copy(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    cfg.values_[section][key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void KeyValueConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  values_[section][key] = value;
}

const std::string* KeyValueConfig::find(const std::string& section, const std::string& key) const {
  for (const auto* s : {&section, static_cast<const std::string*>(nullptr)}) {
    const std::string name = s ? *s : std::string();
    auto it = values_.find(name);
    if (it == values_.end()) continue;
    auto kv = it->second.find(key);
    if (kv != it->second.end()) return &kv->second;
  }
  return nullptr;
}

bool KeyValueConfig::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

std::string KeyValueConfig::get_string(const std::string& section, const std::string& key,
                                       const std::string& fallback) const {
  const auto* v = find(section, key);
  return v ? *v : fallback;
}

double KeyValueConfig::get_double(const std::string& section, const std::string& key, double fallback) const {
  const auto* v = find(section, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key " + section + "." + key + ": not a number: '" + *v + "'");
  }
}

std::int64_t KeyValueConfig::get_int(const std::string& section, const std::string& key, std::int64_t fallback) const {
  const auto* v = find(section, key);
  if (!v) return fallback;
  std::int64_t out = 0;
  const auto* end = v->data() + v->size();
  auto [ptr, ec] = std::from_chars(v->data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key " + section + "." + key + ": not an integer: '" + *v + "'");
  }
  return out;
}

bool KeyValueConfig::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  const auto* v = find(section, key);
  if (!v) return fallback;
  if (*v == "1" || *v == "true" || *v == "yes" || *v == "on") return true;
  if (*v == "0" || *v == "false" || *v == "no" || *v == "off") return false;
  throw ConfigError("config key " + section + "." + key + ": not a boolean: '" + *v + "'");
}

std::string KeyValueConfig::dump() const {
  std::ostringstream os;
  for (const auto& [section, kv] : values_) {
    if (!section.empty()) os << '[' << section << "]\n";
    for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
  }
  return os.str();
}

}  // namespace ramwalk::util
