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

#include "rpatrol/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rpatrol/error.hpp"

namespace rpatrol {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double LogSumExp(std::span<const double> v) {
  double mx = kNegInf;
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

StateMatrix GridPoints(const QuadratureGrid& grid) {
  const std::size_t k = grid.dim();
  const std::size_t n = grid.size();
  StateMatrix pts(n, k);
  std::vector<int> idx(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < k; ++d) {
      const double h = (grid.hi[d] - grid.lo[d]) / grid.points[d];
      pts.at(i, d) = grid.lo[d] + (idx[d] + 0.5) * h;
    }
    // Last coordinate varies fastest.
    for (std::size_t d = k; d-- > 0;) {
      if (++idx[d] < grid.points[d]) break;
      idx[d] = 0;
    }
  }
  return pts;
}

}  // namespace

QuadratureGrid QuadratureGrid::Cube(std::size_t dim, double lo, double hi,
                                    int points) {
  QuadratureGrid g;
  g.lo.assign(dim, lo);
  g.hi.assign(dim, hi);
  g.points.assign(dim, points);
  g.Validate();
  return g;
}

std::size_t QuadratureGrid::size() const {
  std::size_t n = 1;
  for (int p : points) n *= static_cast<std::size_t>(p);
  return n;
}

double QuadratureGrid::cell_volume() const {
  double v = 1.0;
  for (std::size_t d = 0; d < dim(); ++d) v *= (hi[d] - lo[d]) / points[d];
  return v;
}

QuadratureGrid QuadratureGrid::Refined() const {
  QuadratureGrid g = *this;
  for (int& p : g.points) p *= 2;
  return g;
}

void QuadratureGrid::Validate() const {
  Require(dim() >= 1 && dim() <= 3, "quadrature: grid dimension must be 1..3");
  Require(hi.size() == dim() && points.size() == dim(),
          "quadrature: inconsistent grid spec");
  for (std::size_t d = 0; d < dim(); ++d) {
    Require(hi[d] > lo[d] && points[d] >= 1, "quadrature: empty grid axis");
  }
}

Vec GridLaw::Probabilities() const {
  Vec p(size());
  for (std::size_t i = 0; i < size(); ++i) p[i] = std::exp(log_mass[i]);
  return p;
}

ParticleEnsemble GridLaw::AsEnsemble() const {
  return ParticleEnsemble::FromLogWeights(points, log_mass);
}

GridLaw DiscretizeLogDensity(const LogDensityFn& log_density,
                             const QuadratureGrid& grid) {
  grid.Validate();
  GridLaw law;
  law.points = GridPoints(grid);
  const double log_vol = std::log(grid.cell_volume());
  law.log_mass.resize(law.size());
  for (std::size_t i = 0; i < law.size(); ++i) {
    const double v = log_density(law.points.row(i));
    if (std::isnan(v)) Fail(ErrorCode::kNumeric, "quadrature: NaN density");
    law.log_mass[i] = v + log_vol;
  }
  law.log_total = LogSumExp(law.log_mass);
  if (!std::isfinite(law.log_total)) {
    Fail(ErrorCode::kPrecision, "quadrature: density has no mass on the grid");
  }
  for (double& v : law.log_mass) v -= law.log_total;
  return law;
}

GridLaw TiltLaw(const GridLaw& base, const TiltSpec& tilt) {
  GridLaw out;
  out.points = base.points;
  out.log_mass.resize(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    out.log_mass[i] = base.log_mass[i] +
                      (tilt.trivial() ? 0.0 : tilt.LogFactor(base.points.row(i)));
  }
  out.log_total = LogSumExp(out.log_mass);
  if (!std::isfinite(out.log_total)) {
    Fail(ErrorCode::kDegenerate, "quadrature: tilt has no mass on the grid");
  }
  for (double& v : out.log_mass) v -= out.log_total;
  return out;
}

double GridKl(const GridLaw& a, const GridLaw& b) {
  Require(a.size() == b.size(), "quadrature: laws on different grids");
  double kl = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.log_mass[i] == kNegInf) continue;
    kl += std::exp(a.log_mass[i]) * (a.log_mass[i] - b.log_mass[i]);
  }
  return std::max(kl, 0.0);
}

KlReport KlQuadrature(const TiltSpec& tilt, const LogDensityFn& base_log_density,
                      const QuadratureGrid& grid) {
  tilt.Validate();
  auto evaluate = [&](const QuadratureGrid& g, KlReport& rep) {
    GridLaw p = DiscretizeLogDensity(base_log_density, g);
    GridLaw tau = TiltLaw(p, tilt);
    rep.base_mass = std::exp(p.log_total);
    rep.log_normalizer = tau.log_total;
    // KL(tau || p) = E_tau[log factor] - log Z, computed directly per cell.
    rep.kl = GridKl(tau, p);
  };
  KlReport coarse, fine;
  evaluate(grid, coarse);
  evaluate(grid.Refined(), fine);
  if (std::abs(coarse.base_mass - 1.0) > 1e-4) {
    Fail(ErrorCode::kPrecision, "kl_quadrature: grid misses base mass (integral " +
                                    std::to_string(coarse.base_mass) + ")");
  }
  const double dz = std::abs(std::expm1(coarse.log_normalizer - fine.log_normalizer));
  const double dp = std::abs(coarse.base_mass - fine.base_mass);
  if (dz > 1e-4 || dp > 1e-4) {
    Fail(ErrorCode::kPrecision, "kl_quadrature: grid too coarse");
  }
  return coarse;
}

KlReport KlQuadrature(const TiltSpec& tilt, const GaussianMixtureModel& model,
                      const Context& c, const QuadratureGrid& grid) {
  Require(grid.dim() == model.dim(), "kl_quadrature: grid dimension mismatch");
  return KlQuadrature(
      tilt, [&](std::span<const double> z) { return model.LogDensity(z, c); }, grid);
}

GridLaw ReverseChainLaw1D(const ScoreModel& score, const Context& c, double lo,
                          double hi, int points) {
  Require(score.dim() == 1, "reverse chain law: 1-D models only");
  Require(hi > lo && points >= 16, "reverse chain law: bad grid");
  const NoiseSchedule& schedule = score.schedule();
  const int T = schedule.steps();
  const std::size_t n = static_cast<std::size_t>(points);
  const double h = (hi - lo) / points;
  Vec x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = lo + (i + 0.5) * h;

  // Cell masses of z^T.
  const double var_t = schedule.CumulativeVariance(T);
  Vec mass(n), next(n), s(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mass[i] = std::exp(-0.5 * x[i] * x[i] / var_t);
    total += mass[i];
  }
  for (double& m : mass) m /= total;

  for (int t = T; t >= 1; --t) {
    score.ScoreBatch(x, t, c, s);
    const double b = schedule.StepVariance(t);
    const double sd = std::sqrt(b);
    const double reach = 9.0 * sd;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (mass[i] < 1e-300) continue;
      const double mean = x[i] + b * s[i];
      const long first = std::max<long>(0, static_cast<long>(std::floor((mean - reach - lo) / h)));
      const long last = std::min<long>(static_cast<long>(n) - 1,
                                       static_cast<long>(std::ceil((mean + reach - lo) / h)));
      if (first > last) continue;
      // Normalize the kernel over the cells it touches so no mass is lost.
      double ksum = 0.0;
      for (long j = first; j <= last; ++j) {
        const double d = (x[j] - mean) / sd;
        ksum += std::exp(-0.5 * d * d);
      }
      if (ksum <= 0.0) continue;
      const double scale = mass[i] / ksum;
      for (long j = first; j <= last; ++j) {
        const double d = (x[j] - mean) / sd;
        next[j] += scale * std::exp(-0.5 * d * d);
      }
    }
    mass.swap(next);
  }

  GridLaw law;
  law.points = StateMatrix(n, 1, x);
  law.log_mass.resize(n);
  total = 0.0;
  for (double m : mass) total += m;
  for (std::size_t i = 0; i < n; ++i) {
    law.log_mass[i] = mass[i] > 0.0 ? std::log(mass[i] / total) : kNegInf;
  }
  law.log_total = std::log(total);
  return law;
}

}  // namespace rpatrol
