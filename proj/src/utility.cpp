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

#include "rpatrol/utility.hpp"

#include <cmath>

#include "rpatrol/error.hpp"

namespace rpatrol {

UtilityParams UtilityParams::Defaults(std::size_t regions, bool clip) {
  UtilityParams p;
  p.initial_population.assign(regions, 1.0);
  p.clip = clip;
  return p;
}

double UtilityParams::UpperBound() const {
  double m = 0.0;
  for (double n0 : initial_population) m += n0 * std::exp(growth_rate);
  return m;
}

void UtilityParams::Validate() const {
  Require(!initial_population.empty(), "utility: no regions");
  for (double n0 : initial_population) {
    Require(n0 >= 0.0 && std::isfinite(n0), "utility: N0 must be >= 0");
  }
  Require(std::isfinite(growth_rate), "utility: growth rate must be finite");
  Require(alpha > 0.0 && psi > 0.0 && theta > 0.0,
          "utility: alpha, psi, theta must be positive");
}

bool PatrolStrategy::Feasible(double tol) const {
  double total = 0.0;
  for (double v : x) {
    if (!(v >= 0.0)) return false;
    total += v;
  }
  return total <= budget + tol;
}

void PatrolStrategy::Validate() const {
  Require(budget > 0.0, "patrol: budget must be positive");
  Require(Feasible(), "patrol: allocation outside the budget set");
}

MixedDefenderStrategy MixedDefenderStrategy::Pure(PatrolStrategy x) {
  MixedDefenderStrategy pi;
  pi.atoms.push_back(std::move(x));
  pi.probs = {1.0};
  return pi;
}

MixedDefenderStrategy MixedDefenderStrategy::UniformOver(
    std::vector<PatrolStrategy> atoms) {
  MixedDefenderStrategy pi;
  const std::size_t n = atoms.size();
  Require(n >= 1, "mixed strategy: no atoms");
  pi.atoms = std::move(atoms);
  pi.probs.assign(n, 1.0 / static_cast<double>(n));
  return pi;
}

void MixedDefenderStrategy::Validate() const {
  Require(!atoms.empty() && atoms.size() == probs.size(),
          "mixed strategy: atom/probability count mismatch");
  double total = 0.0;
  for (double p : probs) {
    Require(p >= 0.0 && std::isfinite(p), "mixed strategy: negative probability");
    total += p;
  }
  Require(std::abs(total - 1.0) <= 1e-9, "mixed strategy: probabilities must sum to 1");
  for (const PatrolStrategy& a : atoms) a.Validate();
}

namespace {

inline double Exposure(double x, double z, const UtilityParams& p) {
  return p.alpha * std::exp(p.psi * z - p.theta * x);
}

}  // namespace

double Utility(std::span<const double> x, std::span<const double> z,
               const UtilityParams& params) {
  Require(x.size() == params.dim() && z.size() == params.dim(),
          "utility: dimension mismatch");
  const double growth = std::exp(params.growth_rate);
  double total = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double term = params.initial_population[j] * growth - Exposure(x[j], z[j], params);
    total += params.clip ? std::max(term, 0.0) : term;
  }
  return total;
}

Vec UtilityGradX(std::span<const double> x, std::span<const double> z,
                 const UtilityParams& params) {
  Require(x.size() == params.dim() && z.size() == params.dim(),
          "utility: dimension mismatch");
  const double growth = std::exp(params.growth_rate);
  Vec g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double e = Exposure(x[j], z[j], params);
    const bool active = params.clip && params.initial_population[j] * growth - e < 0.0;
    g[j] = active ? 0.0 : params.theta * e;
  }
  return g;
}

Vec UtilityGradZ(std::span<const double> x, std::span<const double> z,
                 const UtilityParams& params) {
  Require(x.size() == params.dim() && z.size() == params.dim(),
          "utility: dimension mismatch");
  const double growth = std::exp(params.growth_rate);
  Vec g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double e = Exposure(x[j], z[j], params);
    const bool active = params.clip && params.initial_population[j] * growth - e < 0.0;
    g[j] = active ? 0.0 : -params.psi * e;
  }
  return g;
}

double MixedUtility(const MixedDefenderStrategy& pi, std::span<const double> z,
                    const UtilityParams& params) {
  double total = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (pi.probs[i] != 0.0) total += pi.probs[i] * Utility(pi.atoms[i].x, z, params);
  }
  return total;
}

void AddMixedUtilityGradZ(const MixedDefenderStrategy& pi, std::span<const double> z,
                          const UtilityParams& params, std::span<double> grad) {
  const double growth = std::exp(params.growth_rate);
  for (std::size_t i = 0; i < pi.size(); ++i) {
    const double p = pi.probs[i];
    if (p == 0.0) continue;
    const Vec& x = pi.atoms[i].x;
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double e = Exposure(x[j], z[j], params);
      if (params.clip && params.initial_population[j] * growth - e < 0.0) continue;
      grad[j] -= p * params.psi * e;
    }
  }
}

double ExpectedUtility(std::span<const double> x, const ParticleEnsemble& ensemble,
                       const UtilityParams& params) {
  Require(ensemble.normalized(), "expected utility: ensemble not normalized");
  return ensemble.Expect([&](std::span<const double> z) { return Utility(x, z, params); });
}

double ExpectedUtility(const MixedDefenderStrategy& pi,
                       std::span<const ParticleEnsemble> ensembles,
                       std::span<const double> sigma, const UtilityParams& params) {
  Require(ensembles.size() == sigma.size(), "expected utility: sigma size mismatch");
  double sigma_total = 0.0;
  for (double s : sigma) {
    Require(s >= 0.0, "expected utility: negative sigma");
    sigma_total += s;
  }
  Require(std::abs(sigma_total - 1.0) <= 1e-9, "expected utility: sigma not normalized");
  double pi_total = 0.0;
  for (double p : pi.probs) pi_total += p;
  Require(std::abs(pi_total - 1.0) <= 1e-9, "expected utility: pi not normalized");
  double total = 0.0;
  for (std::size_t l = 0; l < ensembles.size(); ++l) {
    if (sigma[l] == 0.0) continue;
    Require(ensembles[l].normalized(), "expected utility: ensemble not normalized");
    for (std::size_t i = 0; i < pi.size(); ++i) {
      if (pi.probs[i] == 0.0) continue;
      total += pi.probs[i] * sigma[l] * ExpectedUtility(pi.atoms[i].x, ensembles[l], params);
    }
  }
  return total;
}

}  // namespace rpatrol
