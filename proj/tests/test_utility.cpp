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


#include <cmath>
#include <vector>

#include "doctest.h"
#include "rpatrol/ensemble.hpp"
#include "rpatrol/error.hpp"
#include "rpatrol/rng.hpp"
#include "rpatrol/utility.hpp"
#include "test_util.hpp"

using namespace rpatrol;
using rpatrol::testing::CentralDiff;

namespace {

UtilityParams UnitParams() {
  UtilityParams p = UtilityParams::Defaults(1, true);
  p.growth_rate = 0.0;
  p.psi = 1.0;
  return p;
}

Vec RandomX(std::size_t k, double budget, Rng& rng) {
  Vec x(k);
  double total = 0.0;
  for (double& v : x) total += (v = rng.Gamma(1.0, 1.0));
  total += rng.Gamma(1.0, 1.0);  // slack
  for (double& v : x) v *= budget / total;
  return x;
}

Vec RandomZ(std::size_t k, Rng& rng) {
  Vec z(k);
  for (double& v : z) v = 8.0 * rng.Uniform();
  return z;
}

}  // namespace

TEST_CASE("utility examples") {
  const UtilityParams p = UnitParams();
  CHECK(Utility(Vec{0.0}, Vec{0.0}, p) == 0.0);
  CHECK(Utility(Vec{std::log(2.0)}, Vec{0.0}, p) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(Utility(Vec{0.0, 1.0}, Vec{0.0}, p), Error);
}

TEST_CASE("clipped utility is bounded") {
  const UtilityParams p = UtilityParams::Defaults(3, true);
  CHECK(p.UpperBound() == doctest::Approx(3.0 * std::exp(0.1)));
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    Vec x(3), z(3);
    for (double& v : x) v = 3.0 * rng.Uniform();
    for (double& v : z) v = -4.0 + 12.0 * rng.Uniform();
    const double u = Utility(x, z, p);
    CHECK(u >= 0.0);
    CHECK(u <= p.UpperBound());
  }
}

TEST_CASE("utility gradients") {
  const UtilityParams p = UtilityParams::Defaults(3, false);
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const Vec x = RandomX(3, 1.0, rng);
    const Vec z = RandomZ(3, rng);
    const Vec gx = UtilityGradX(x, z, p);
    const Vec gz = UtilityGradZ(x, z, p);
    for (std::size_t k = 0; k < 3; ++k) {
      const double fx = CentralDiff([&](std::span<const double> v) { return Utility(v, z, p); }, x, k, 1e-5);
      const double fz = CentralDiff([&](std::span<const double> v) { return Utility(x, v, p); }, z, k, 1e-5);
      CHECK(gx[k] == doctest::Approx(fx).epsilon(1e-6));
      CHECK(gz[k] == doctest::Approx(fz).epsilon(1e-6));
      CHECK(gx[k] >= 0.0);
    }
  }
  // Clipped region: exposure exceeds N0 e^r, so both gradients vanish.
  const UtilityParams c = UtilityParams::Defaults(1, true);
  CHECK(Utility(Vec{0.0}, Vec{6.0}, c) == 0.0);
  CHECK(UtilityGradX(Vec{0.0}, Vec{6.0}, c)[0] == 0.0);
  CHECK(UtilityGradZ(Vec{0.0}, Vec{6.0}, c)[0] == 0.0);
}

TEST_CASE("monotonicity and concavity") {
  const UtilityParams p = UtilityParams::Defaults(2, false);
  const UtilityParams pc = UtilityParams::Defaults(2, true);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Vec x1 = RandomX(2, 1.0, rng), x2 = RandomX(2, 1.0, rng);
    const Vec z = RandomZ(2, rng);
    const double lam = rng.Uniform();
    Vec mix(2);
    for (int k = 0; k < 2; ++k) mix[k] = lam * x1[k] + (1 - lam) * x2[k];
    CHECK(Utility(mix, z, p) >= lam * Utility(x1, z, p) + (1 - lam) * Utility(x2, z, p) - 1e-9);

    for (const UtilityParams* q : {&p, &pc}) {
      Vec xu = x1, zu = z;
      xu[i % 2] += 0.1;
      zu[i % 2] += 0.1;
      CHECK(Utility(xu, z, *q) >= Utility(x1, z, *q));
      CHECK(Utility(x1, zu, *q) <= Utility(x1, z, *q));
    }
  }
}

TEST_CASE("expected utility") {
  const UtilityParams p = UtilityParams::Defaults(2, true);
  const PatrolStrategy a{{0.3, 0.7}, 1.0}, b{{1.0, 0.0}, 1.0};
  const Vec z{2.0, 3.0};
  const ParticleEnsemble point = ParticleEnsemble::PointMass(z);
  const std::vector<ParticleEnsemble> one{point};
  const Vec unit{1.0};
  CHECK(ExpectedUtility(MixedDefenderStrategy::Pure(a), one, unit, p) == Utility(a, z, p));
  CHECK(ExpectedUtility(MixedDefenderStrategy::UniformOver({a, b}), one, unit, p) ==
        doctest::Approx(0.5 * (Utility(a, z, p) + Utility(b, z, p))).epsilon(1e-15));

  // Random 3 x 3 instance against an explicit triple sum.
  Rng rng(4);
  MixedDefenderStrategy pi;
  for (int i = 0; i < 3; ++i) pi.atoms.push_back({RandomX(2, 1.0, rng), 1.0});
  pi.probs = {0.2, 0.5, 0.3};
  std::vector<ParticleEnsemble> ens;
  for (int l = 0; l < 3; ++l) {
    StateMatrix m(4, 2);
    for (double& v : m.data()) v = 6.0 * rng.Uniform();
    Vec lw(4);
    for (double& v : lw) v = rng.Normal();
    ens.push_back(ParticleEnsemble::FromLogWeights(m, lw));
  }
  const Vec sigma{0.6, 0.1, 0.3};
  double brute = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int l = 0; l < 3; ++l)
      for (std::size_t n = 0; n < 4; ++n)
        brute += pi.probs[i] * sigma[l] * ens[l].weight(n) * Utility(pi.atoms[i].x, ens[l].particle(n), p);
  CHECK(std::abs(ExpectedUtility(pi, ens, sigma, p) - brute) < 1e-12);

  // Linearity in sigma.
  const Vec s1{1.0, 0.0, 0.0}, s2{0.0, 0.5, 0.5};
  const Vec s12{0.4, 0.3, 0.3};
  CHECK(ExpectedUtility(pi, ens, s12, p) ==
        doctest::Approx(0.4 * ExpectedUtility(pi, ens, s1, p) + 0.6 * ExpectedUtility(pi, ens, s2, p)));
  // Linearity in pi.
  MixedDefenderStrategy first = pi, rest = pi;
  first.probs = {1.0, 0.0, 0.0};
  rest.probs = {0.0, 0.625, 0.375};
  CHECK(ExpectedUtility(pi, ens, sigma, p) ==
        doctest::Approx(0.2 * ExpectedUtility(first, ens, sigma, p) + 0.8 * ExpectedUtility(rest, ens, sigma, p)));

  ParticleEnsemble raw(StateMatrix(1, 2, {1.0, 1.0}), {3.0});
  CHECK_THROWS_AS(ExpectedUtility(a.x, raw, p), Error);
}

TEST_CASE("strategy validation") {
  CHECK(PatrolStrategy{{0.5, 0.5}, 1.0}.Feasible());
  CHECK_FALSE(PatrolStrategy{{0.6, 0.5}, 1.0}.Feasible());
  CHECK_FALSE(PatrolStrategy{{-0.1, 0.5}, 1.0}.Feasible());
  MixedDefenderStrategy bad;
  bad.atoms = {{{0.5}, 1.0}};
  bad.probs = {0.9};
  CHECK_THROWS_AS(bad.Validate(), Error);
}
