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

#ifndef RPATROL_DIFFUSION_HPP_
#define RPATROL_DIFFUSION_HPP_

#include <span>

#include "rpatrol/rng.hpp"
#include "rpatrol/schedule.hpp"
#include "rpatrol/score_model.hpp"
#include "rpatrol/states.hpp"

namespace rpatrol {

// Box support [0, z_max]^K applied to final (t = 0) samples only.
struct Support {
  bool clip = false;
  double z_max = 8.0;

  static Support None() { return {}; }
  static Support Box(double z_max) { return {true, z_max}; }

  void Apply(std::span<double> z) const;
};

// z0 + sqrt(S_t) * eps with S_t the cumulative variance; 1 <= t <= T.
Vec ForwardPerturb(std::span<const double> z0, int t,
                   const NoiseSchedule& schedule, Rng& rng);

// Tweedie posterior-mean estimate z^t + S_t * score; identity at t = 0.
Vec TweedieDenoise(std::span<const double> z_t, int t,
                   std::span<const double> score_value,
                   const NoiseSchedule& schedule);

// In-place batch form: out_i = z_i + S_t * score_i.
void TweedieDenoiseBatch(std::span<const double> states,
                         std::span<const double> scores, int t,
                         const NoiseSchedule& schedule, std::span<double> out);

// Draws n samples: z^T ~ N(0, S_T I) followed by T reverse transitions
// N(z^t + beta_t^2 s(z^t, t, c), beta_t^2 I), then the support clip.
StateMatrix AncestralSample(const ScoreModel& score, const Context& c,
                            std::size_t n, Rng& rng,
                            const Support& support = Support::None());

}  // namespace rpatrol

#endif  // RPATROL_DIFFUSION_HPP_
