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

#include "rpatrol/equivalence.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "rpatrol/error.hpp"

namespace rpatrol {
namespace {

// Calls f on every point of {v in (1/r) Z^n, v >= 0, sum v = 1}.
void ForEachLattice(std::size_t n, int r, const std::function<void(const std::vector<double>&)>& f) {
  std::vector<int> c(n, 0);
  std::vector<double> v(n);
  std::function<void(std::size_t, int)> rec = [&](std::size_t k, int left) {
    if (k + 1 == n) {
      c[k] = left;
      for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(c[i]) / r;
      f(v);
      return;
    }
    for (int a = 0; a <= left; ++a) {
      c[k] = a;
      rec(k + 1, left - a);
    }
  };
  rec(0, r);
}

double KlGamma(const std::vector<double>& base, const std::vector<double>& d, double gamma,
               std::vector<double>& tau) {
  double mx = -std::numeric_limits<double>::infinity();
  tau.resize(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    tau[i] = base[i] > 0.0 ? std::log(base[i]) - gamma * d[i]
                           : -std::numeric_limits<double>::infinity();
    mx = std::max(mx, tau[i]);
  }
  double total = 0.0;
  for (double& t : tau) {
    t = std::exp(t - mx);
    total += t;
  }
  for (double& t : tau) t /= total;
  return DiscreteKl(tau, base);
}

double SolveEq1(const FiniteGame& g, int pi_res, int tau_res, std::size_t* ball_points) {
  const std::size_t m = g.payoff.rows();
  const std::size_t n = g.payoff.cols();
  // Per ball point, the payoff of every defender action.
  std::vector<double> d;
  auto add = [&](const std::vector<double>& tau) {
    for (std::size_t i = 0; i < m; ++i) {
      double v = 0.0;
      for (std::size_t k = 0; k < n; ++k) v += g.payoff.at(i, k) * tau[k];
      d.push_back(v);
    }
  };
  add(g.base);
  ForEachLattice(n, tau_res, [&](const std::vector<double>& tau) {
    if (DiscreteKl(tau, g.base) <= g.rho) add(tau);
  });
  const std::size_t points = d.size() / m;
  if (ball_points) *ball_points = points;

  double best = -std::numeric_limits<double>::infinity();
  ForEachLattice(m, pi_res, [&](const std::vector<double>& pi) {
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < points; ++p) {
      const double* row = d.data() + p * m;
      double v = 0.0;
      for (std::size_t i = 0; i < m; ++i) v += pi[i] * row[i];
      if (v < worst) {
        worst = v;
        if (worst <= best) break;  // cannot beat the incumbent
      }
    }
    best = std::max(best, worst);
  });
  return best;
}

double SolveEq2(const FiniteGame& g, int dir_res, std::size_t* columns) {
  const std::size_t m = g.payoff.rows();
  const std::size_t n = g.payoff.cols();
  std::vector<std::vector<double>> tilts;
  ForEachLattice(m, dir_res, [&](const std::vector<double>& pi) {
    std::vector<double> d(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < m; ++i) d[k] += pi[i] * g.payoff.at(i, k);
    }
    tilts.push_back(ExposedTilt(g.base, d, g.rho));
  });
  if (columns) *columns = tilts.size();
  PayoffMatrix a(m, tilts.size());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l = 0; l < tilts.size(); ++l) {
      double v = 0.0;
      for (std::size_t k = 0; k < n; ++k) v += g.payoff.at(i, k) * tilts[l][k];
      a.at(i, l) = v;
    }
  }
  return SolveMatrixGame(a).value;
}

}  // namespace

void FiniteGame::Validate() const {
  Require(payoff.rows() >= 1 && payoff.cols() >= 2, "finite game: empty payoff matrix");
  Require(payoff.cols() <= 4, "finite game: at most 4 outcomes");
  Require(base.size() == payoff.cols(), "finite game: base law size mismatch");
  double total = 0.0;
  for (double p : base) {
    Require(p > 0.0, "finite game: base law must have full support");
    total += p;
  }
  Require(std::abs(total - 1.0) <= 1e-12, "finite game: base law must sum to 1");
  Require(rho >= 0.0, "finite game: rho must be >= 0");
}

double DiscreteKl(const std::vector<double>& a, const std::vector<double>& b) {
  double kl = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > 0.0) kl += a[i] * std::log(a[i] / b[i]);
  }
  return std::max(kl, 0.0);
}

std::vector<double> ExposedTilt(const std::vector<double>& base,
                                const std::vector<double>& d, double rho) {
  std::vector<double> tau;
  if (rho == 0.0) return base;
  const double gamma_max = 1e6;
  if (KlGamma(base, d, gamma_max, tau) <= rho) return tau;
  double lo = 0.0, hi = 1.0;
  while (KlGamma(base, d, hi, tau) < rho) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (KlGamma(base, d, mid, tau) > rho) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  // lo keeps the tilt inside the ball.
  KlGamma(base, d, lo, tau);
  return tau;
}

EquivalenceResult EquivalenceCheck(const FiniteGame& game,
                                   const EquivalenceOptions& options) {
  game.Validate();
  const std::size_t m = game.payoff.rows();
  const std::size_t n = game.payoff.cols();
  const int pi_res = options.pi_resolution > 0 ? options.pi_resolution
                                               : (m <= 2 ? 400 : m == 3 ? 60 : 24);
  const int tau_res = options.tau_resolution > 0 ? options.tau_resolution
                                                 : (n == 2 ? 2000 : n == 3 ? 150 : 40);
  const int dir_res = options.directions > 0 ? options.directions
                                             : (m <= 2 ? 400 : m == 3 ? 60 : 20);

  EquivalenceResult res;
  res.value_eq1 = SolveEq1(game, pi_res, tau_res, nullptr);
  res.value_eq2 = SolveEq2(game, dir_res, nullptr);
  const double eq1_fine = SolveEq1(game, 2 * pi_res, 2 * tau_res, &res.ball_points);
  const double eq2_fine = SolveEq2(game, 2 * dir_res, &res.tilt_columns);
  if (std::abs(eq1_fine - res.value_eq1) > options.refine_tolerance ||
      std::abs(eq2_fine - res.value_eq2) > options.refine_tolerance) {
    Fail(ErrorCode::kPrecision,
         "equivalence check: grid too coarse (eq1 " + std::to_string(res.value_eq1) +
             " -> " + std::to_string(eq1_fine) + ", eq2 " + std::to_string(res.value_eq2) +
             " -> " + std::to_string(eq2_fine) + ")");
  }
  res.value_eq1 = eq1_fine;
  res.value_eq2 = eq2_fine;
  return res;
}

}  // namespace rpatrol
