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

#ifndef RPATROL_QUADRATURE_HPP_
#define RPATROL_QUADRATURE_HPP_

#include <functional>
#include <span>
#include <vector>

#include "rpatrol/ensemble.hpp"
#include "rpatrol/score_model.hpp"
#include "rpatrol/tilt.hpp"

namespace rpatrol {

// Tensor midpoint grid over a box. Only practical for dim <= 3.
struct QuadratureGrid {
  Vec lo;
  Vec hi;
  std::vector<int> points;  // cells per dimension

  static QuadratureGrid Cube(std::size_t dim, double lo, double hi, int points);

  std::size_t dim() const { return lo.size(); }
  std::size_t size() const;
  double cell_volume() const;
  // Same box with every cell split in two along each axis.
  QuadratureGrid Refined() const;
  void Validate() const;
};

// A density discretized on a grid: cell centres and normalized cell masses.
struct GridLaw {
  StateMatrix points;
  Vec log_mass;        // normalized: logsumexp(log_mass) == 0
  double log_total = 0.0;  // log of the raw integral before normalization

  std::size_t size() const { return points.rows(); }
  Vec Probabilities() const;
  ParticleEnsemble AsEnsemble() const;

  template <typename F>
  double Expect(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      const double w = std::exp(log_mass[i]);
      if (w != 0.0) acc += w * f(points.row(i));
    }
    return acc;
  }
};

using LogDensityFn = std::function<double(std::span<const double>)>;

GridLaw DiscretizeLogDensity(const LogDensityFn& log_density,
                             const QuadratureGrid& grid);

// tau ~ base * exp(LogFactor) on the base law's own grid. log_total of the
// result is log Z = log E_base[exp(LogFactor)].
GridLaw TiltLaw(const GridLaw& base, const TiltSpec& tilt);

// D_KL(a || b) for two laws on the same grid.
double GridKl(const GridLaw& a, const GridLaw& b);

struct KlReport {
  double kl = 0.0;
  double log_normalizer = 0.0;  // log E_p[exp(-gamma U)]
  double base_mass = 1.0;       // raw integral of p over the grid
};

// D_KL(tau || p) for tau ~ p exp(-gamma U) with p the clean mixture at c.
// Throws kPrecision when the grid misses mass of p (> 1e-4) or when a refined
// grid changes either normalization integral by more than 1e-4 (relative).
KlReport KlQuadrature(const TiltSpec& tilt, const GaussianMixtureModel& model,
                      const Context& c, const QuadratureGrid& grid);

// Same, for an arbitrary normalized base log-density.
KlReport KlQuadrature(const TiltSpec& tilt, const LogDensityFn& base_log_density,
                      const QuadratureGrid& grid);

// Exact law of the discretized 1-D reverse chain driven by `score`: the
// density of z^T ~ N(0, S_T) is pushed through every Gaussian transition on a
// fine grid. This is what ancestral sampling draws from, including the
// discretization bias of the chain itself.
GridLaw ReverseChainLaw1D(const ScoreModel& score, const Context& c, double lo,
                          double hi, int points);

}  // namespace rpatrol

#endif  // RPATROL_QUADRATURE_HPP_
