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

#include "rpatrol/mirror_ascent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rpatrol/error.hpp"

namespace rpatrol {

void MirrorAscentConfig::Validate() const {
  Require(step > 0.0 && std::isfinite(step), "mirror ascent: step must be positive");
  Require(iterations >= 0, "mirror ascent: iterations must be >= 0");
}

MirrorAscentResult MirrorAscent(const ObjectiveFn& f, std::size_t dim, double budget,
                                const MirrorAscentConfig& cfg,
                                std::optional<std::vector<double>> start) {
  cfg.Validate();
  Require(dim >= 1, "mirror ascent: dimension must be >= 1");
  Require(budget > 0.0 && std::isfinite(budget), "mirror ascent: budget must be positive");

  // p lives on the probability simplex in K+1 coordinates; x = B * p[0..K).
  std::vector<double> p(dim + 1, 1.0 / static_cast<double>(dim + 1));
  if (start) {
    Require(start->size() == dim, "mirror ascent: start dimension mismatch");
    double used = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      Require((*start)[k] >= 0.0, "mirror ascent: infeasible start");
      used += (*start)[k];
    }
    Require(used <= budget * (1.0 + 1e-9), "mirror ascent: infeasible start");
    // Keep every coordinate strictly positive so the entropic map can move it.
    const double floor = 1e-6;
    for (std::size_t k = 0; k < dim; ++k) p[k] = (*start)[k] / budget + floor;
    p[dim] = std::max(0.0, 1.0 - used / budget) + floor;
    double total = 0.0;
    for (double v : p) total += v;
    for (double& v : p) v /= total;
  }

  std::vector<double> x(dim), grad(dim), cand_x(dim), cand_grad(dim);
  auto to_x = [&](const std::vector<double>& q, std::vector<double>& out) {
    for (std::size_t k = 0; k < dim; ++k) out[k] = budget * q[k];
  };
  auto eval = [&](const std::vector<double>& xs, std::vector<double>& g) {
    std::fill(g.begin(), g.end(), 0.0);
    const double v = f(xs, g);
    if (std::isnan(v)) Fail(ErrorCode::kNumeric, "mirror ascent: NaN objective");
    for (double gv : g) {
      if (!std::isfinite(gv)) Fail(ErrorCode::kNumeric, "mirror ascent: NaN gradient");
    }
    return v;
  };

  MirrorAscentResult res;
  to_x(p, x);
  double value = eval(x, grad);
  res.x = {x, budget};
  res.objective = value;

  std::vector<double> logp(dim + 1);
  for (int it = 0; it < cfg.iterations; ++it) {
    // Multiplicative step; the slack coordinate has zero gradient.
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= dim; ++k) {
      const double g = k < dim ? budget * grad[k] : 0.0;
      logp[k] = (p[k] > 0.0 ? std::log(p[k]) : -std::numeric_limits<double>::infinity()) +
                cfg.step * g;
      mx = std::max(mx, logp[k]);
    }
    double total = 0.0;
    for (std::size_t k = 0; k <= dim; ++k) {
      p[k] = std::exp(logp[k] - mx);
      total += p[k];
    }
    for (double& v : p) v /= total;
    to_x(p, x);
    value = eval(x, grad);

    if (cfg.saturate && p[dim] > 0.0) {
      double gsum = 0.0;
      for (double g : grad) gsum += std::max(g, 0.0);
      if (gsum > 0.0) {
        std::vector<double> q = p;
        for (std::size_t k = 0; k < dim; ++k) q[k] += p[dim] * std::max(grad[k], 0.0) / gsum;
        q[dim] = 0.0;
        to_x(q, cand_x);
        const double cand = eval(cand_x, cand_grad);
        if (cand >= value) {
          // Leave a sliver of slack so the entropic update can still use it.
          p = q;
          x = cand_x;
          grad = cand_grad;
          value = cand;
        }
      }
    }
    if (value > res.objective) {
      res.objective = value;
      res.x = {x, budget};
    }
    res.best_history.push_back(res.objective);
  }
  // Guard against rounding pushing the sum a hair over the budget.
  double used = 0.0;
  for (double v : res.x.x) used += v;
  if (used > budget) {
    for (double& v : res.x.x) v *= budget / used;
  }
  return res;
}

ScenarioObjective::ScenarioObjective(std::span<const ParticleEnsemble> ensembles,
                                     std::span<const double> sigma,
                                     const UtilityParams& params)
    : params_(params) {
  params_.Validate();
  Require(ensembles.size() == sigma.size() && !ensembles.empty(),
          "scenario objective: one weight per ensemble required");
  const std::size_t k = params_.dim();
  const double g = std::exp(params_.growth_rate);
  for (double n0 : params_.initial_population) growth_.push_back(n0 * g);
  for (std::size_t l = 0; l < ensembles.size(); ++l) {
    if (sigma[l] == 0.0) continue;
    const ParticleEnsemble& e = ensembles[l];
    Require(e.dim() == k, "scenario objective: ensemble dimension mismatch");
    Require(e.normalized(), "scenario objective: ensemble must be normalized");
    for (std::size_t n = 0; n < e.size(); ++n) {
      const double w = sigma[l] * e.weight(n);
      if (w == 0.0) continue;
      weight_.push_back(w);
      for (std::size_t j = 0; j < k; ++j) {
        exposure_.push_back(params_.alpha * std::exp(params_.psi * e.particle(n)[j]));
      }
    }
  }
}

double ScenarioObjective::operator()(std::span<const double> x,
                                     std::span<double> grad) const {
  const std::size_t k = dim();
  thread_local std::vector<double> decay;
  decay.resize(k);
  for (std::size_t j = 0; j < k; ++j) decay[j] = std::exp(-params_.theta * x[j]);
  double total = 0.0;
  std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t n = 0; n < weight_.size(); ++n) {
    const double* a = exposure_.data() + n * k;
    for (std::size_t j = 0; j < k; ++j) {
      const double e = a[j] * decay[j];
      const double term = growth_[j] - e;
      if (params_.clip && term < 0.0) continue;
      total += weight_[n] * term;
      grad[j] += weight_[n] * params_.theta * e;
    }
  }
  return total;
}

double ScenarioObjective::Value(std::span<const double> x) const {
  std::vector<double> g(dim());
  return (*this)(x, g);
}

PatrolStrategy DefenderBestResponse(std::span<const ParticleEnsemble> ensembles,
                                    std::span<const double> sigma,
                                    const UtilityParams& params, double budget,
                                    const MirrorAscentConfig& cfg) {
  ScenarioObjective obj(ensembles, sigma, params);
  return MirrorAscent(std::cref(obj), params.dim(), budget, cfg).x;
}

std::vector<double> RandomFeasible(std::size_t dim, double budget, Rng& rng) {
  std::vector<double> x(dim);
  double total = 0.0;
  for (double& v : x) {
    v = rng.Gamma(1.0, 1.0);
    total += v;
  }
  const double scale = budget * rng.Uniform() / total;
  for (double& v : x) v *= scale;
  return x;
}

GridSearchResult GridSearchBudget(const std::function<double(std::span<const double>)>& f,
                                  std::size_t dim, double budget, int points) {
  Require(dim == 1 || dim == 2, "grid search: K must be 1 or 2");
  Require(points >= 2, "grid search: need at least 2 points");
  GridSearchResult best;
  best.objective = -std::numeric_limits<double>::infinity();
  const double h = budget / (points - 1);
  std::vector<double> x(dim);
  for (int a = 0; a < points; ++a) {
    x[0] = a * h;
    const int bmax = dim == 2 ? points - 1 - a : 0;
    for (int b = 0; b <= bmax; ++b) {
      if (dim == 2) x[1] = b * h;
      const double v = f(x);
      if (v > best.objective) {
        best.objective = v;
        best.x = x;
      }
    }
  }
  return best;
}

}  // namespace rpatrol
