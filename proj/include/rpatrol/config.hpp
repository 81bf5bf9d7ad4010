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

#ifndef RPATROL_CONFIG_HPP_
#define RPATROL_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rpatrol {

// Flat "key = value" configuration. '#' starts a comment; blank lines are
// ignored; later assignments override earlier ones. Lists are comma
// separated.
class Config {
 public:
  static Config Parse(const std::string& text);
  static Config Load(const std::string& path);

  bool Has(const std::string& key) const { return values_.count(key) > 0; }
  void Set(const std::string& key, const std::string& value);

  std::string GetString(const std::string& key, const std::string& fallback) const;
  double GetDouble(const std::string& key, double fallback) const;
  long GetInt(const std::string& key, long fallback) const;
  std::uint64_t GetUint(const std::string& key, std::uint64_t fallback) const;
  bool GetBool(const std::string& key, bool fallback) const;
  std::vector<double> GetDoubles(const std::string& key,
                                 const std::vector<double>& fallback) const;
  std::vector<std::string> GetStrings(const std::string& key,
                                      const std::vector<std::string>& fallback) const;

  // Throws kConfig naming the first key not in `known`.
  void CheckKnown(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  std::string Serialize() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace rpatrol

#endif  // RPATROL_CONFIG_HPP_
