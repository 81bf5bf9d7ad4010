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
#include <memory>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "rpatrol/diffusion.hpp"
#include "rpatrol/ensemble.hpp"
#include "rpatrol/error.hpp"
#include "rpatrol/quadrature.hpp"
#include "rpatrol/samplers.hpp"
#include "rpatrol/score_model.hpp"
#include "rpatrol/tilt.hpp"
#include "test_util.hpp"

using namespace rpatrol;
using rpatrol::testing::KsAccepts;
using rpatrol::testing::Mean;
using rpatrol::testing::StdDev;

namespace {

GaussianMixtureModel Two1D() {
  return GaussianMixtureModel({0.3, 0.7}, {AffineMap::Constant({-1.5}), AffineMap::Constant({2.0})},
                              {0.5, 0.8});
}

MixtureScoreModel TwoModel(int steps = 100) {
  return MixtureScoreModel(Two1D(), NoiseSchedule::ForDataVariance(steps, 4.0));
}

TiltSpec LinearTilt(double gamma) {
  return TiltSpec::Make(gamma, std::make_shared<LinearPotential>(Vec{1.0}));
}

double EnsembleMean(const ParticleEnsemble& e) {
  return e.Expect([](std::span<const double> z) { return z[0]; });
}

double TiltedChainMean(const ScoreModel& model, double gamma) {
  const GridLaw base = ReverseChainLaw1D(model, Context{}, -10.0, 10.0, 4000);
  const GridLaw tilted = TiltLaw(base, LinearTilt(gamma));
  return tilted.Expect([](std::span<const double> z) { return z[0]; });
}

}  // namespace

TEST_CASE("twisting value") {
  const MixtureScoreModel model(GaussianMixtureModel({1.0}, {AffineMap::Constant({0.5})}, {1.0}),
                                NoiseSchedule::RandomWalk(10, 0.5));
  CHECK(TwistingValue(LinearTilt(0.0), Vec{3.0}, 4, model, Context{}) == 1.0);
  CHECK(TwistingValue(LinearTilt(0.7), Vec{1.3}, 0, model, Context{}) ==
        doctest::Approx(std::exp(-0.7 * 1.3)).epsilon(1e-15));
  // Single Gaussian: z0_hat = mu + sigma^2 / (sigma^2 + S_t) (z - mu).
  for (double z : {-2.0, 0.1, 3.5}) {
    const int t = 6;
    const double st = 6 * 0.25;
    const double z0 = 0.5 + (z - 0.5) / (1.0 + st);
    const double expected = std::exp(-0.7 * z0);
    CHECK(std::abs(TwistingValue(LinearTilt(0.7), Vec{z}, t, model, Context{}) - expected) < 1e-10);
  }
  CHECK_THROWS_AS(TwistingValue(LinearTilt(0.7), Vec{1.0}, -1, model, Context{}), Error);
}

TEST_CASE("twisted smc with gamma = 0 reduces to ancestral sampling") {
  const MixtureScoreModel model = TwoModel(50);
  Rng a(11), b(12);
  const ParticleEnsemble smc = TwistedSmc(model, Context{}, LinearTilt(0.0), 10000, a);
  for (double w : smc.weights()) CHECK(w == doctest::Approx(1e-4).epsilon(1e-12));
  const StateMatrix anc = AncestralSample(model, Context{}, 10000, b);
  CHECK(KsAccepts(smc.particles().data(), anc.data()));
}

TEST_CASE("twisted smc minimum particle count") {
  const MixtureScoreModel model = TwoModel(20);
  Rng rng(13);
  const ParticleEnsemble e = TwistedSmc(model, Context{}, LinearTilt(1.0), 2, rng);
  CHECK(e.size() == 2);
  CHECK(e.weight(0) + e.weight(1) == doctest::Approx(1.0));
}

TEST_CASE("twisted smc tilted mean matches quadrature") {
  const MixtureScoreModel model = TwoModel(100);
  const double truth = TiltedChainMean(model, 1.0);
  std::vector<double> est;
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(DeriveSeed(100, {static_cast<std::uint64_t>(seed)}));
    est.push_back(EnsembleMean(TwistedSmc(model, Context{}, LinearTilt(1.0), 1000, rng)));
  }
  const double se = StdDev(est) / std::sqrt(static_cast<double>(est.size()));
  CHECK(std::abs(Mean(est) - truth) < 3.0 * se + 1e-3);
  // The tilt moves mass towards the low component.
  const GridLaw base = ReverseChainLaw1D(model, Context{}, -10.0, 10.0, 4000);
  CHECK(truth < base.Expect([](std::span<const double> z) { return z[0]; }) - 0.5);
}

TEST_CASE("smc weight identity from the trace") {
  const MixtureScoreModel model = TwoModel(10);
  const TiltSpec tilt = LinearTilt(0.8);
  SmcOptions opts;
  Rng rng(14);
  SmcTrace trace;
  TwistedSmc(model, Context{}, tilt, 50, rng, opts, &trace);
  REQUIRE(trace.steps.size() == 10);
  const NoiseSchedule& s = model.schedule();
  for (const SmcStep& step : trace.steps) {
    const double b = s.StepVariance(step.t);
    const double bh = opts.proposal_factor * b;
    for (std::size_t i = 0; i < 50; ++i) {
      const double from = step.from.at(i, 0);
      const double to = step.to.at(i, 0);
      const double sc = model.Score(Vec{from}, step.t, Context{})[0];
      const double log_phi_from = LogTwistingValue(tilt, Vec{from}, step.t, model, Context{});
      const double log_phi_to = LogTwistingValue(tilt, Vec{to}, step.t - 1, model, Context{});
      // d log Phi / dz = -gamma for a linear potential.
      const double prop_mean = from + bh * (sc - 0.8);
      const double log_p = -0.5 * std::pow(to - (from + b * sc), 2) / b - 0.5 * std::log(b);
      const double log_q = -0.5 * std::pow(to - prop_mean, 2) / bh - 0.5 * std::log(bh);
      const double expected = log_p - log_q + log_phi_to - log_phi_from;
      CHECK(step.log_increment[i] == doctest::Approx(expected).epsilon(1e-8));
    }
  }
}

TEST_CASE("importance sampling") {
  const MixtureScoreModel model = TwoModel(50);
  Rng a(15);
  const ParticleEnsemble flat = ImportanceSampling(model, Context{}, LinearTilt(0.0), 100, a);
  for (double w : flat.weights()) CHECK(w == doctest::Approx(0.01));

  Rng b(16);
  const ParticleEnsemble e = ImportanceSampling(model, Context{}, LinearTilt(1.3), 200, b);
  const double ref = e.weight(0) / std::exp(-1.3 * e.particle(0)[0]);
  for (std::size_t i = 0; i < e.size(); ++i) {
    CHECK(e.weight(i) / std::exp(-1.3 * e.particle(i)[0]) == doctest::Approx(ref).epsilon(1e-10));
  }

  // Tilted mean with a bootstrap standard error: resample the raw draws and
  // renormalize their weights each time.
  const MixtureScoreModel full = TwoModel(100);
  Rng c(17);
  const ParticleEnsemble big = ImportanceSampling(full, Context{}, LinearTilt(1.0), 10000, c);
  std::vector<double> boot;
  Rng r(18);
  for (int k = 0; k < 200; ++k) {
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < big.size(); ++j) {
      const std::size_t i = r.Index(big.size());
      num += big.weight(i) * big.particle(i)[0];
      den += big.weight(i);
    }
    boot.push_back(num / den);
  }
  CHECK(std::abs(EnsembleMean(big) - TiltedChainMean(full, 1.0)) < 3.0 * StdDev(boot));
}

TEST_CASE("dps") {
  const MixtureScoreModel model = TwoModel(40);
  Rng a(19), b(19);
  const ParticleEnsemble d = DpsSample(model, Context{}, LinearTilt(0.0), 500, a);
  const StateMatrix anc = AncestralSample(model, Context{}, 500, b);
  CHECK(d.particles().data() == anc.data());
  Rng c(20);
  const ParticleEnsemble t = DpsSample(model, Context{}, LinearTilt(1.0), 100, c);
  for (double w : t.weights()) CHECK(w == doctest::Approx(0.01));
}

TEST_CASE("dps tilted-mean error is at least the smc error") {
  const MixtureScoreModel model = TwoModel(100);
  const double truth = TiltedChainMean(model, 1.0);
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng a(DeriveSeed(200, {seed})), b(DeriveSeed(300, {seed}));
    const double smc = std::abs(EnsembleMean(TwistedSmc(model, Context{}, LinearTilt(1.0), 10000, a)) - truth);
    const double dps = std::abs(EnsembleMean(DpsSample(model, Context{}, LinearTilt(1.0), 10000, b)) - truth);
    if (dps >= smc) ++wins;
  }
  CHECK(wins >= 4);
}

TEST_CASE("multinomial resampling and ess") {
  StateMatrix pts(4, 1, {0.0, 1.0, 2.0, 3.0});
  ParticleEnsemble onehot(pts, {0.0, 0.0, 1.0, 0.0});
  onehot.Normalize();
  CHECK(Ess(onehot) == doctest::Approx(1.0));
  Rng rng(21);
  const ParticleEnsemble copies = MultinomialResample(onehot, rng);
  for (std::size_t i = 0; i < 4; ++i) CHECK(copies.particle(i)[0] == 2.0);
  CHECK(Ess(copies) == doctest::Approx(4.0).epsilon(1e-12));

  ParticleEnsemble two(pts, {0.5, 0.0, 0.5, 0.0});
  two.Normalize();
  CHECK(Ess(two) == doctest::Approx(2.0));

  StateMatrix many(100, 1);
  for (std::size_t i = 0; i < 100; ++i) many.at(i, 0) = std::sin(0.37 * i);
  const ParticleEnsemble uni = ParticleEnsemble::Uniform(many);
  CHECK(Ess(uni) == doctest::Approx(100.0));
  std::vector<double> means;
  for (int k = 0; k < 10000; ++k) means.push_back(EnsembleMean(MultinomialResample(uni, rng)));
  const double se = StdDev(means) / std::sqrt(10000.0);
  CHECK(std::abs(Mean(means) - EnsembleMean(uni)) < 3.0 * se);

  CHECK_THROWS_AS(ParticleEnsemble(pts, {0.0, 0.0, 0.0, 0.0}), Error);
}

TEST_CASE("ensemble csv round trip") {
  StateMatrix pts(3, 2, {0.1, 0.2, 1.0 / 3.0, 4.0, -5.0, 6e-9});
  const ParticleEnsemble e = ParticleEnsemble::FromLogWeights(pts, Vec{0.0, -1.0, -2.0});
  std::stringstream ss;
  WriteEnsembleCsv(e, ss);
  const ParticleEnsemble back = ReadEnsembleCsv(ss);
  CHECK(back.particles().data() == e.particles().data());
  CHECK(back.weights() == e.weights());
}

TEST_CASE("kl quadrature") {
  const GaussianMixtureModel std_normal({1.0}, {AffineMap::Constant({0.0})}, {1.0});
  const QuadratureGrid grid = QuadratureGrid::Cube(1, -12.0, 12.0, 4000);
  CHECK(std::abs(KlQuadrature(LinearTilt(0.0), std_normal, Context{}, grid).kl) < 1e-8);
  const KlReport r = KlQuadrature(LinearTilt(1.0), std_normal, Context{}, grid);
  CHECK(std::abs(r.kl - 0.5) < 1e-6);
  CHECK(std::abs(r.log_normalizer - 0.5) < 1e-6);  // log E exp(-z) = 1/2

  double last = -1.0;
  for (double g : {0.0, 0.5, 1.0, 2.0}) {
    const double kl = KlQuadrature(LinearTilt(g), Two1D(), Context{}, grid).kl;
    CHECK(kl >= last - 1e-12);
    last = kl;
  }
}
