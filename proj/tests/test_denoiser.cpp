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
#include <filesystem>
#include <limits>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "rpatrol/denoiser.hpp"
#include "rpatrol/diffusion.hpp"
#include "rpatrol/error.hpp"
#include "rpatrol/score_model.hpp"

using namespace rpatrol;

namespace {

StateMatrix GaussianSamples(std::size_t n, double mu, double sd, Rng& rng) {
  StateMatrix s(n, 1);
  for (double& v : s.data()) v = mu + sd * rng.Normal();
  return s;
}

}  // namespace

TEST_CASE("zero epochs returns the initialized network") {
  const NoiseSchedule sched = NoiseSchedule::RandomWalk(20, 0.3);
  Rng data_rng(1);
  const StateMatrix samples = GaussianSamples(100, 0.0, 1.0, data_rng);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.hidden = {8, 8};
  Rng a(2), b(2);
  const TrainResult r = TrainDenoiser(samples, StateMatrix(100, 0), sched, cfg, a);
  CHECK(r.epoch_loss.empty());

  // Same draws as the trainer's initialization.
  InputScaling scaling = r.net.scaling();
  const DenoiserNet fresh(1, 0, cfg.hidden, sched, scaling, b);
  REQUIRE(fresh.layers().size() == r.net.layers().size());
  for (std::size_t l = 0; l < fresh.layers().size(); ++l) {
    CHECK(fresh.layers()[l].w == r.net.layers()[l].w);
    CHECK(fresh.layers()[l].b == r.net.layers()[l].b);
  }
  CHECK(TrainConfig{}.learning_rate == 1e-3);
}

TEST_CASE("trained denoiser recovers a single Gaussian score") {
  const double mu = 1.0, sd = 0.8;
  const NoiseSchedule sched = NoiseSchedule::ForDataVariance(50, sd * sd);
  Rng rng(3);
  const StateMatrix samples = GaussianSamples(4000, mu, sd, rng);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.hidden = {64, 64};
  cfg.batch_size = 128;
  const TrainResult r = TrainDenoiser(samples, StateMatrix(4000, 0), sched, cfg, rng);

  const GaussianMixtureModel truth({1.0}, {AffineMap::Constant({mu})}, {sd});
  double worst = 0.0;
  // Noise prediction divides by sqrt(S_t), so the smallest steps are left out.
  for (int t : {10, 25, 50}) {
    const double spread = std::sqrt(sd * sd + sched.CumulativeVariance(t));
    for (int i = 0; i < 20; ++i) {
      const double z = mu + spread * (-2.0 + 4.0 * i / 19.0);
      const double est = r.net.Score(Vec{z}, t, Context{})[0];
      const double exact = AnalyticScore(truth, Vec{z}, t, Context{}, sched)[0];
      worst = std::max(worst, std::abs(est - exact));
    }
  }
  CHECK(worst < 0.15);

  // Loss smoothed over 10-epoch windows does not increase beyond the noise
  // of the window means (random steps make each epoch loss noisy).
  double last = std::numeric_limits<double>::infinity(), last_var = 0.0;
  for (std::size_t w = 0; w + 10 <= r.epoch_loss.size(); w += 10) {
    double m = 0.0, v = 0.0;
    for (std::size_t e = w; e < w + 10; ++e) m += r.epoch_loss[e] / 10.0;
    for (std::size_t e = w; e < w + 10; ++e) v += (r.epoch_loss[e] - m) * (r.epoch_loss[e] - m) / 9.0;
    CHECK(m <= last + 3.0 * std::sqrt((v + last_var) / 10.0));
    last = m;
    last_var = v;
  }
  CHECK(r.epoch_loss.back() < r.epoch_loss.front());

  // Save and reload give identical scores.
  std::stringstream ss;
  SaveDenoiser(r.net, ss);
  const DenoiserNet back = LoadDenoiser(ss);
  for (double z : {-1.0, 0.5, 3.0}) {
    CHECK(back.Score(Vec{z}, 7, Context{}) == r.net.Score(Vec{z}, 7, Context{}));
  }
  const auto path = std::filesystem::temp_directory_path() / "rpatrol_test_denoiser.json";
  SaveDenoiserFile(r.net, path.string());
  CHECK(LoadDenoiserFile(path.string()).Score(Vec{0.2}, 3, Context{}) ==
        r.net.Score(Vec{0.2}, 3, Context{}));
  std::filesystem::remove(path);
}

TEST_CASE("denoiser with context drives ancestral sampling") {
  const NoiseSchedule sched = NoiseSchedule::RandomWalk(10, 0.5);
  Rng rng(4);
  StateMatrix z(200, 2), c(200, 3);
  for (double& v : z.data()) v = rng.Normal();
  for (double& v : c.data()) v = rng.Uniform();
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.hidden = {16};
  const TrainResult r = TrainDenoiser(z, c, sched, cfg, rng);
  CHECK(r.net.dim() == 2);
  CHECK(r.net.context_dim() == 3);
  const StateMatrix out = AncestralSample(r.net, Context{{0.1, 0.2, 0.3}}, 50, rng, Support::Box(8.0));
  for (double v : out.data()) CHECK((v >= 0.0 && v <= 8.0));
  CHECK_THROWS_AS(r.net.Score(Vec{0.0, 0.0}, 0, Context{{0.1, 0.2, 0.3}}), Error);
}

TEST_CASE("training errors") {
  const NoiseSchedule sched = NoiseSchedule::RandomWalk(10, 0.5);
  Rng rng(5);
  StateMatrix data(50, 1);
  for (double& v : data.data()) v = rng.Normal();
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.hidden = {4};
  cfg.learning_rate = 1e300;  // overflows the weights on the first update
  try {
    TrainDenoiser(data, StateMatrix(50, 0), sched, cfg, rng);
    FAIL("expected a training error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTraining);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(TrainDenoiser(data, StateMatrix(50, 0), sched, cfg, rng), Error);
  StateMatrix nan_data = data;
  nan_data.at(3, 0) = std::nan("");
  cfg.learning_rate = 1e-3;
  CHECK_THROWS_AS(TrainDenoiser(nan_data, StateMatrix(50, 0), sched, cfg, rng), Error);
  std::stringstream junk("{}");
  try {
    LoadDenoiser(junk);
    FAIL("expected an io error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIo);
  }
}
