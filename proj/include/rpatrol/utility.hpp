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

#ifndef RPATROL_UTILITY_HPP_
#define RPATROL_UTILITY_HPP_

#include <span>
#include <vector>

#include "rpatrol/ensemble.hpp"

namespace rpatrol {

using Vec = std::vector<double>;

// Wildlife-population utility
//   U(x, z) = sum_j max(N0_j e^r - alpha e^{psi z_j - theta x_j}, 0)
// with the max dropped when clip is false (concave in x, may be negative).
struct UtilityParams {
  Vec initial_population;  // N0 per region
  double growth_rate = 0.1;
  double alpha = 1.0;
  double psi = 0.5;
  double theta = 1.0;
  bool clip = false;

  static UtilityParams Defaults(std::size_t regions, bool clip = false);

  std::size_t dim() const { return initial_population.size(); }
  // M = sum_j N0_j e^r, the upper bound on the clipped utility.
  double UpperBound() const;
  void Validate() const;
};

// Patrol effort x in {x >= 0, sum x <= B}.
struct PatrolStrategy {
  Vec x;
  double budget = 1.0;

  std::size_t dim() const { return x.size(); }
  bool Feasible(double tol = 1e-9) const;
  void Validate() const;
};

// Finite-support defender mixed strategy {(p_i, x_i)}.
struct MixedDefenderStrategy {
  std::vector<PatrolStrategy> atoms;
  Vec probs;

  static MixedDefenderStrategy Pure(PatrolStrategy x);
  static MixedDefenderStrategy UniformOver(std::vector<PatrolStrategy> atoms);

  std::size_t size() const { return atoms.size(); }
  void Validate() const;
};

double Utility(std::span<const double> x, std::span<const double> z,
               const UtilityParams& params);
inline double Utility(const PatrolStrategy& x, std::span<const double> z,
                      const UtilityParams& params) {
  return Utility(x.x, z, params);
}

// Per-coordinate gradients; zero where the clip is strictly active. At the
// kink itself the derivative of the positive branch is used.
Vec UtilityGradX(std::span<const double> x, std::span<const double> z,
                 const UtilityParams& params);
Vec UtilityGradZ(std::span<const double> x, std::span<const double> z,
                 const UtilityParams& params);

// U(pi, z) = sum_i p_i u(x_i, z) and its z-gradient (added into grad).
double MixedUtility(const MixedDefenderStrategy& pi, std::span<const double> z,
                    const UtilityParams& params);
void AddMixedUtilityGradZ(const MixedDefenderStrategy& pi,
                          std::span<const double> z, const UtilityParams& params,
                          std::span<double> grad);

// U(x, tau_hat) = sum_n w_n u(x, z_n).
double ExpectedUtility(std::span<const double> x, const ParticleEnsemble& ensemble,
                       const UtilityParams& params);

// sum_i sum_l sum_n p_i sigma_l w_ln u(x_i, z_ln). Inputs must be normalized.
double ExpectedUtility(const MixedDefenderStrategy& pi,
                       std::span<const ParticleEnsemble> ensembles,
                       std::span<const double> sigma, const UtilityParams& params);

}  // namespace rpatrol

#endif  // RPATROL_UTILITY_HPP_
