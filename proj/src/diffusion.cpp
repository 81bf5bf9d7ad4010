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

#include "rpatrol/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rpatrol/error.hpp"

namespace rpatrol {

NoiseSchedule NoiseSchedule::RandomWalk(int steps, double beta) {
  if (steps < 1) Fail(ErrorCode::kSchedule, "schedule: steps must be >= 1");
  // beta == 0 is accepted as the degenerate noiseless process.
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    Fail(ErrorCode::kSchedule, "schedule: beta must be finite and non-negative");
  }
  NoiseSchedule s;
  s.variant_ = NoiseVariant::kRandomWalk;
  s.steps_ = steps;
  s.beta_ = beta;
  s.first_variance_ = s.last_variance_ = beta * beta;
  return s;
}

NoiseSchedule NoiseSchedule::LinearVariance(int steps, double first_variance,
                                            double last_variance) {
  if (steps < 1) Fail(ErrorCode::kSchedule, "schedule: steps must be >= 1");
  if (!(first_variance > 0.0) || !(last_variance > 0.0)) {
    Fail(ErrorCode::kSchedule, "schedule: variances must be positive");
  }
  NoiseSchedule s;
  s.variant_ = NoiseVariant::kLinearVariance;
  s.steps_ = steps;
  s.first_variance_ = first_variance;
  s.last_variance_ = last_variance;
  s.beta_ = std::sqrt(first_variance);
  s.cumulative_.assign(static_cast<std::size_t>(steps) + 1, 0.0);
  for (int t = 1; t <= steps; ++t) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / (steps - 1);
    s.cumulative_[t] = s.cumulative_[t - 1] + first_variance +
                       frac * (last_variance - first_variance);
  }
  return s;
}

NoiseSchedule NoiseSchedule::ForDataVariance(int steps, double data_variance) {
  if (!(data_variance > 0.0)) {
    Fail(ErrorCode::kSchedule, "schedule: data variance must be positive");
  }
  return RandomWalk(steps, std::sqrt(4.0 * data_variance / steps));
}

void NoiseSchedule::CheckStep(int t, int lo) const {
  if (t < lo || t > steps_) {
    std::ostringstream msg;
    msg << "schedule: step " << t << " outside [" << lo << ", " << steps_ << "]";
    Fail(ErrorCode::kSchedule, msg.str());
  }
}

double NoiseSchedule::StepVariance(int t) const {
  CheckStep(t, 1);
  if (variant_ == NoiseVariant::kRandomWalk) return beta_ * beta_;
  return cumulative_[t] - cumulative_[t - 1];
}

double NoiseSchedule::CumulativeVariance(int t) const {
  CheckStep(t, 0);
  if (variant_ == NoiseVariant::kRandomWalk) return t * (beta_ * beta_);
  return cumulative_[t];
}

std::string NoiseSchedule::Describe() const {
  std::ostringstream out;
  if (variant_ == NoiseVariant::kRandomWalk) {
    out << "random_walk(T=" << steps_ << ", beta=" << beta_ << ")";
  } else {
    out << "linear_variance(T=" << steps_ << ", " << first_variance_ << ".."
        << last_variance_ << ")";
  }
  return out.str();
}

void Support::Apply(std::span<double> z) const {
  if (!clip) return;
  for (double& v : z) v = std::clamp(v, 0.0, z_max);
}

Vec ForwardPerturb(std::span<const double> z0, int t, const NoiseSchedule& schedule,
                   Rng& rng) {
  if (t < 1 || t > schedule.steps()) {
    Fail(ErrorCode::kSchedule, "forward_perturb: step out of range");
  }
  const double scale = std::sqrt(schedule.CumulativeVariance(t));
  Vec out(z0.begin(), z0.end());
  for (double& v : out) {
    Require(std::isfinite(v), "forward_perturb: non-finite input");
    v += scale * rng.Normal();
  }
  return out;
}

Vec TweedieDenoise(std::span<const double> z_t, int t,
                   std::span<const double> score_value,
                   const NoiseSchedule& schedule) {
  Require(z_t.size() == score_value.size(), "tweedie: dimension mismatch");
  Vec out(z_t.begin(), z_t.end());
  if (t == 0) return out;
  const double s = schedule.CumulativeVariance(t);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * score_value[i];
  return out;
}

void TweedieDenoiseBatch(std::span<const double> states,
                         std::span<const double> scores, int t,
                         const NoiseSchedule& schedule, std::span<double> out) {
  Require(states.size() == scores.size() && out.size() == states.size(),
          "tweedie: buffer size mismatch");
  const double s = t == 0 ? 0.0 : schedule.CumulativeVariance(t);
  for (std::size_t i = 0; i < states.size(); ++i) out[i] = states[i] + s * scores[i];
}

StateMatrix AncestralSample(const ScoreModel& score, const Context& c,
                            std::size_t n, Rng& rng, const Support& support) {
  Require(n >= 1, "ancestral_sample: n must be >= 1");
  const NoiseSchedule& schedule = score.schedule();
  const std::size_t k = score.dim();
  StateMatrix z(n, k);
  const double init_scale = std::sqrt(schedule.CumulativeVariance(schedule.steps()));
  for (double& v : z.data()) v = init_scale * rng.Normal();

  std::vector<double> s(n * k);
  for (int t = schedule.steps(); t >= 1; --t) {
    score.ScoreBatch(z.data(), t, c, s);
    const double var = schedule.StepVariance(t);
    const double sd = std::sqrt(var);
    for (std::size_t i = 0; i < n * k; ++i) {
      if (!std::isfinite(s[i])) {
        Fail(ErrorCode::kNumeric,
             "ancestral_sample: non-finite score at step " + std::to_string(t));
      }
      z.data()[i] += var * s[i] + sd * rng.Normal();
    }
  }
  for (std::size_t i = 0; i < n; ++i) support.Apply(z.row(i));
  return z;
}

}  // namespace rpatrol
