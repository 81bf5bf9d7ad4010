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

#ifndef RPATROL_SCHEDULE_HPP_
#define RPATROL_SCHEDULE_HPP_

#include <string>
#include <vector>

namespace rpatrol {

enum class NoiseVariant {
  // q(z^t | z^{t-1}) = N(z^{t-1}, beta^2 I) with a constant beta.
  kRandomWalk,
  // Same additive process with per-step variances rising linearly between two
  // endpoints (the long-horizon configuration; not a variance-preserving
  // process).
  kLinearVariance,
};

// Additive Gaussian noising schedule over steps t = 1..T.
class NoiseSchedule {
 public:
  static NoiseSchedule RandomWalk(int steps, double beta);
  static NoiseSchedule LinearVariance(int steps, double first_variance,
                                      double last_variance);

  // Desk-scale default: T steps with T * beta^2 = 4 * data_variance.
  static NoiseSchedule ForDataVariance(int steps, double data_variance);

  int steps() const { return steps_; }
  NoiseVariant variant() const { return variant_; }

  // beta_t^2 for t in [1, T].
  double StepVariance(int t) const;
  // sum_{s <= t} beta_s^2 for t in [0, T]; exactly t * beta^2 for kRandomWalk.
  double CumulativeVariance(int t) const;

  // Constant beta of a kRandomWalk schedule (the first step's otherwise).
  double beta() const { return beta_; }
  double first_variance() const { return first_variance_; }
  double last_variance() const { return last_variance_; }

  std::string Describe() const;

 private:
  NoiseSchedule() = default;
  void CheckStep(int t, int lo) const;

  NoiseVariant variant_ = NoiseVariant::kRandomWalk;
  int steps_ = 1;
  double beta_ = 1.0;
  double first_variance_ = 1.0;
  double last_variance_ = 1.0;
  std::vector<double> cumulative_;  // kLinearVariance only
};

}  // namespace rpatrol

#endif  // RPATROL_SCHEDULE_HPP_
