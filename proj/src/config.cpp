// Copyright 2026 The rpatrol Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rpatrol/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "rpatrol/error.hpp"
#include "rpatrol/text.hpp"

namespace rpatrol {

Config Config::Parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string_view body = Trim(line);
    if (body.empty()) continue;
    const std::size_t eq = body.find('=');
    if (eq == std::string_view::npos) {
      Fail(ErrorCode::kConfig, "config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key(Trim(body.substr(0, eq)));
    if (key.empty()) {
      Fail(ErrorCode::kConfig, "config line " + std::to_string(lineno) + ": empty key");
    }
    cfg.values_[key] = std::string(Trim(body.substr(eq + 1)));
  }
  return cfg;
}

Config Config::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIo, "config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str());
}

void Config::Set(const std::string& key, const std::string& value) {
  Require(!Trim(key).empty(), "config: empty key");
  values_[std::string(Trim(key))] = std::string(Trim(value));
}

std::string Config::GetString(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::GetDouble(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return ParseDouble(it->second);
  } catch (const Error&) {
    Fail(ErrorCode::kConfig, "config: '" + key + "' is not a number: " + it->second);
  }
}

static long GetIntImpl(const std::string& key, const std::string& v) {
  long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    Fail(ErrorCode::kConfig, "config: '" + key + "' is not an integer: " + v);
  }
  return out;
}

long Config::GetInt(const std::string& key, long fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : GetIntImpl(key, it->second);
}

std::uint64_t Config::GetUint(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::uint64_t out = 0;
  const std::string& v = it->second;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    Fail(ErrorCode::kConfig, "config: '" + key + "' is not an unsigned integer: " + v);
  }
  return out;
}

bool Config::GetBool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::string v = it->second;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  Fail(ErrorCode::kConfig, "config: '" + key + "' is not a boolean: " + it->second);
}

std::vector<double> Config::GetDoubles(const std::string& key,
                                       const std::vector<double>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (std::string_view f : SplitFields(it->second)) {
    f = Trim(f);
    if (f.empty()) continue;
    try {
      out.push_back(ParseDouble(f));
    } catch (const Error&) {
      Fail(ErrorCode::kConfig, "config: '" + key + "' has a non-numeric entry: " + std::string(f));
    }
  }
  return out;
}

std::vector<std::string> Config::GetStrings(const std::string& key,
                                            const std::vector<std::string>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<std::string> out;
  for (std::string_view f : SplitFields(it->second)) {
    f = Trim(f);
    if (!f.empty()) out.emplace_back(f);
  }
  return out;
}

void Config::CheckKnown(const std::vector<std::string>& known) const {
  for (const auto& [k, v] : values_) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      Fail(ErrorCode::kConfig, "config: unknown key '" + k + "'");
    }
  }
}

std::string Config::Serialize() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
  return out.str();
}

}  // namespace rpatrol
