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

#ifndef RPATROL_EQUIVALENCE_HPP_
#define RPATROL_EQUIVALENCE_HPP_

#include <vector>

#include "rpatrol/matrix_game.hpp"

namespace rpatrol {

// A defender with finitely many actions against an adversary choosing a law
// tau on a finite outcome set, constrained to KL(tau || base) <= rho.
struct FiniteGame {
  PayoffMatrix payoff;       // defender actions x outcomes
  std::vector<double> base;  // base law over outcomes
  double rho = 0.0;

  void Validate() const;
};

struct EquivalenceOptions {
  int pi_resolution = 0;    // defender simplex lattice; 0 picks a default
  int tau_resolution = 0;   // outcome simplex lattice; 0 picks a default
  int directions = 0;       // lattice for tilt directions; 0 picks a default
  double refine_tolerance = 1e-3;
};

struct EquivalenceResult {
  // max_pi min_{tau in ball} pi^T A tau by lattice search over both simplices.
  double value_eq1 = 0.0;
  // The same game with the adversary mixing over the ball's exposed tilts
  // tau ~ base * exp(-gamma pi^T A), solved as a matrix game.
  double value_eq2 = 0.0;
  std::size_t ball_points = 0;
  std::size_t tilt_columns = 0;
};

// KL(a || b) on a finite set.
double DiscreteKl(const std::vector<double>& a, const std::vector<double>& b);

// The minimizer of d^T tau over the KL ball: the tilt of base along -d with
// gamma set so that KL = rho (or the limiting face when it is never reached).
std::vector<double> ExposedTilt(const std::vector<double>& base,
                                const std::vector<double>& d, double rho);

// Computes both values, each at its lattice and at a refined lattice; throws
// kPrecision if refinement moves either value by more than refine_tolerance.
// Requires at most 4 outcomes.
EquivalenceResult EquivalenceCheck(const FiniteGame& game,
                                   const EquivalenceOptions& options = {});

}  // namespace rpatrol

#endif  // RPATROL_EQUIVALENCE_HPP_
