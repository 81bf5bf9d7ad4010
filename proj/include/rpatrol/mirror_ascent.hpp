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

#ifndef RPATROL_MIRROR_ASCENT_HPP_
#define RPATROL_MIRROR_ASCENT_HPP_

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rpatrol/ensemble.hpp"
#include "rpatrol/rng.hpp"
#include "rpatrol/utility.hpp"

namespace rpatrol {

struct MirrorAscentConfig {
  double step = 0.1;
  int iterations = 100;
  // After each step also try moving the slack mass onto the regions in
  // proportion to the gradient; kept only if the objective does not drop.
  bool saturate = true;

  void Validate() const;
};

// Returns f(x) and writes df/dx into grad.
using ObjectiveFn = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct MirrorAscentResult {
  PatrolStrategy x;
  double objective = 0.0;
  std::vector<double> best_history;  // best objective after each iteration
};

// Entropic mirror ascent over {x >= 0, sum x <= B}, run on the simplex
// {y in R^{K+1}, y >= 0, sum y = B} whose last coordinate is slack. Starts
// from the uniform lifted point unless `start` (a feasible x) is given, and
// returns the best iterate seen.
MirrorAscentResult MirrorAscent(const ObjectiveFn& f, std::size_t dim, double budget,
                                const MirrorAscentConfig& cfg,
                                std::optional<std::vector<double>> start = std::nullopt);

// Expected utility under a sigma-mixture of weighted ensembles, with the
// per-particle exponentials precomputed so each evaluation is cheap.
class ScenarioObjective {
 public:
  ScenarioObjective(std::span<const ParticleEnsemble> ensembles,
                    std::span<const double> sigma, const UtilityParams& params);

  std::size_t dim() const { return params_.dim(); }
  double operator()(std::span<const double> x, std::span<double> grad) const;
  double Value(std::span<const double> x) const;

 private:
  UtilityParams params_;
  std::vector<double> weight_;    // sigma_l * w_ln, zero entries dropped
  std::vector<double> exposure_;  // alpha * exp(psi z), row-major
  std::vector<double> growth_;    // N0_j e^r
};

// Defender oracle: argmax_x sum_l sigma_l U(x, ensemble_l).
PatrolStrategy DefenderBestResponse(std::span<const ParticleEnsemble> ensembles,
                                    std::span<const double> sigma,
                                    const UtilityParams& params, double budget,
                                    const MirrorAscentConfig& cfg);

// Uniform random point of the budget simplex scaled by a U(0,1) total.
std::vector<double> RandomFeasible(std::size_t dim, double budget, Rng& rng);

struct GridSearchResult {
  std::vector<double> x;
  double objective = 0.0;
};

// Exhaustive search of {x >= 0, sum x <= B} on a (points x points) lattice
// for K = 2 (or `points` values for K = 1).
GridSearchResult GridSearchBudget(const std::function<double(std::span<const double>)>& f,
                                  std::size_t dim, double budget, int points);

}  // namespace rpatrol

#endif  // RPATROL_MIRROR_ASCENT_HPP_
