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

#ifndef RPATROL_RNG_HPP_
#define RPATROL_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace rpatrol {

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t MixSeed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t HashString(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic seed derivation: DeriveSeed(base, {a, b, ...}).
inline std::uint64_t DeriveSeed(std::uint64_t base,
                                std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = MixSeed(base);
  for (std::uint64_t p : parts) h = MixSeed(h ^ MixSeed(p));
  return h;
}

// A seeded random stream. Every sampling routine takes one explicitly; all
// randomness in the library flows through this type.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(MixSeed(seed)) {}

  std::uint64_t seed() const { return seed_; }

  double Normal() { return normal_(engine_); }
  double Uniform() { return uniform_(engine_); }
  double Gamma(double shape, double scale) {
    std::gamma_distribution<double> dist(shape, scale);
    return dist(engine_);
  }
  std::size_t Index(std::size_t n) {
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(engine_);
  }
  bool Bernoulli(double p) { return Uniform() < p; }

  // Child stream whose sequence is independent of this one's future draws.
  Rng Split(std::uint64_t tag) { return Rng(DeriveSeed(seed_, {tag, draws_++})); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace rpatrol

#endif  // RPATROL_RNG_HPP_
