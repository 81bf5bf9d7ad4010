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

#ifndef RPATROL_DOUBLE_ORACLE_HPP_
#define RPATROL_DOUBLE_ORACLE_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rpatrol/matrix_game.hpp"
#include "rpatrol/mirror_ascent.hpp"
#include "rpatrol/samplers.hpp"
#include "rpatrol/tilt.hpp"
#include "rpatrol/utility.hpp"

namespace rpatrol {

enum class ScheduleMode { kFixed, kTheoretical };

// Particles per adversary distribution at iteration i.
struct SampleSchedule {
  ScheduleMode mode = ScheduleMode::kFixed;
  std::size_t fixed = 500;
  double c = 16.0;
  double m = 1.0;      // utility range bound M
  double delta = 1.0;
  std::size_t max_particles = 2000000;  // hard cap on N_i

  static SampleSchedule Fixed(std::size_t n);
  static SampleSchedule Theoretical(double c, double m, double delta);

  void Validate() const;
};

// Fixed: the constant. Theoretical: ceil(C M^2 (i+1)^2 i^{1+delta} / eps^2).
// Not capped; see SampleSchedule::max_particles.
std::size_t SampleSize(int i, const SampleSchedule& schedule, double epsilon);

enum class AdversaryMode {
  kFixedGamma,  // tilt strength given directly
  kKlRadius,    // gamma chosen per response so that KL(tau || p) = rho
};

struct DoubleOracleConfig {
  double epsilon = 0.05;
  double prob = 0.1;
  double gamma = 1.0;
  AdversaryMode adversary = AdversaryMode::kFixedGamma;
  double rho = 0.1;
  double gamma_max = 1e3;  // bisection ceiling in kKlRadius mode
  int max_iters = 30;
  SampleSchedule schedule;
  MirrorAscentConfig mirror;
  double budget = 1.0;
  UtilityParams params;
  // Reuse each tilt's ensemble once drawn instead of redrawing with N_i.
  bool cache_ensembles = false;

  void Validate() const;
};

// The exact adversary response: tau ~ p exp(-gamma U(pi, z)).
TiltSpec AdversaryBestResponse(const MixedDefenderStrategy& pi, double gamma,
                               const UtilityParams& params);

// KL(tau_gamma || base) for the tilt of a weighted base ensemble, computed as
// -gamma E_tau[U] - log E_base[exp(-gamma U)].
double EnsembleTiltKl(const ParticleEnsemble& base, const MixedDefenderStrategy& pi,
                      double gamma, const UtilityParams& params);

// Smallest gamma in [0, gamma_max] with KL(tau_gamma || base) >= rho, found by
// bisection on the (monotone) ensemble estimate. Returns gamma_max when the
// ball is never reached.
double CalibrateGamma(const ParticleEnsemble& base, const MixedDefenderStrategy& pi,
                      double rho, double gamma_max, const UtilityParams& params);

// x = argmax_x sum_l sigma_l U(x, ensemble_l).
using DefenderOracle = std::function<PatrolStrategy(
    std::span<const ParticleEnsemble>, std::span<const double>)>;

DefenderOracle MirrorAscentOracle(const UtilityParams& params, double budget,
                                  const MirrorAscentConfig& cfg);
// Exact best response over a finite candidate set.
DefenderOracle FiniteOracle(std::vector<PatrolStrategy> candidates,
                            const UtilityParams& params);

struct IterationRecord {
  int iteration = 0;
  std::size_t particles = 0;
  double subgame_value = 0.0;
  double lower = 0.0;  // U(pi*, tau_hat_i)
  double upper = 0.0;  // U(x_i, sigma*)
  double gamma = 0.0;  // tilt strength of the new adversary response
  std::vector<double> pi;     // over defender atoms before the append
  std::vector<double> sigma;  // over adversary atoms before the append
  double gap() const { return upper - lower; }
};

struct DefenderSolution {
  MixedDefenderStrategy pi;
  double value = 0.0;  // subgame value of the returned equilibrium
  int iterations = 0;
  std::string terminated_by;  // "predicate" or "cap"
  std::vector<double> gap_history;
  std::vector<IterationRecord> history;
  std::vector<PatrolStrategy> defender_atoms;
  std::vector<TiltSpec> adversary_atoms;
  std::uint64_t seed = 0;
  double elapsed_seconds = 0.0;
  DoubleOracleConfig config;
};

// The double-oracle loop against tilts drawn from `sampler`. Errors from
// sampling or the LP are re-raised with the iteration index.
DefenderSolution DoubleOracle(const TiltSampler& sampler, const DoubleOracleConfig& cfg,
                              Rng& rng, const DefenderOracle& oracle = nullptr);

DefenderSolution DoubleOracle(std::shared_ptr<const ScoreModel> score, const Context& c,
                              SamplerKind kind, const DoubleOracleConfig& cfg, Rng& rng);

// Solution files: JSON with atoms, probabilities, history, seed and config.
void WriteSolutionJson(const DefenderSolution& sol, std::ostream& out);
MixedDefenderStrategy ReadStrategyJson(std::istream& in);
void WriteStrategyJson(const MixedDefenderStrategy& pi, std::ostream& out);

}  // namespace rpatrol

#endif  // RPATROL_DOUBLE_ORACLE_HPP_
