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

#include "rpatrol/double_oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "json.hpp"
#include "rpatrol/error.hpp"

namespace rpatrol {

using nlohmann::json;

SampleSchedule SampleSchedule::Fixed(std::size_t n) {
  SampleSchedule s;
  s.mode = ScheduleMode::kFixed;
  s.fixed = n;
  return s;
}

SampleSchedule SampleSchedule::Theoretical(double c, double m, double delta) {
  SampleSchedule s;
  s.mode = ScheduleMode::kTheoretical;
  s.c = c;
  s.m = m;
  s.delta = delta;
  return s;
}

void SampleSchedule::Validate() const {
  if (mode == ScheduleMode::kFixed) {
    Require(fixed >= 2, "schedule: fixed sample count must be >= 2");
  } else {
    Require(c > 0.0 && m > 0.0 && delta >= 0.0,
            "schedule: C and M must be positive, delta >= 0");
  }
  Require(max_particles >= 2, "schedule: particle cap must be >= 2");
}

std::size_t SampleSize(int i, const SampleSchedule& schedule, double epsilon) {
  Require(i >= 1, "schedule: iteration index must be >= 1");
  if (schedule.mode == ScheduleMode::kFixed) return schedule.fixed;
  Require(epsilon > 0.0, "schedule: epsilon must be positive");
  const double di = static_cast<double>(i);
  const double n = schedule.c * schedule.m * schedule.m * (di + 1.0) * (di + 1.0) *
                   std::pow(di, 1.0 + schedule.delta) / (epsilon * epsilon);
  // Guard the ceiling against representation noise in exact-integer cases.
  const double r = std::round(n);
  const double v = std::abs(n - r) <= 1e-9 * std::max(1.0, r) ? r : std::ceil(n);
  Require(v < 1e18, "schedule: sample size overflow");
  return static_cast<std::size_t>(v);
}

void DoubleOracleConfig::Validate() const {
  Require(epsilon > 0.0, "double oracle: epsilon must be positive");
  Require(prob > 0.0 && prob < 1.0, "double oracle: prob must be in (0, 1)");
  Require(gamma >= 0.0 && std::isfinite(gamma), "double oracle: gamma must be >= 0");
  Require(rho >= 0.0, "double oracle: rho must be >= 0");
  Require(gamma_max > 0.0, "double oracle: gamma_max must be positive");
  Require(max_iters >= 1, "double oracle: max_iters must be >= 1");
  Require(budget > 0.0, "double oracle: budget must be positive");
  schedule.Validate();
  mirror.Validate();
  params.Validate();
}

TiltSpec AdversaryBestResponse(const MixedDefenderStrategy& pi, double gamma,
                               const UtilityParams& params) {
  Require(gamma >= 0.0, "adversary response: gamma must be >= 0");
  return TiltSpec::ForDefender(gamma, pi, params);
}

double EnsembleTiltKl(const ParticleEnsemble& base, const MixedDefenderStrategy& pi,
                      double gamma, const UtilityParams& params) {
  if (gamma == 0.0) return 0.0;
  const std::size_t n = base.size();
  std::vector<double> u(n), logw(n);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = MixedUtility(pi, base.particle(i), params);
    logw[i] = base.weight(i) > 0.0 ? std::log(base.weight(i)) - gamma * u[i]
                                   : -std::numeric_limits<double>::infinity();
    mx = std::max(mx, logw[i]);
  }
  double z = 0.0, eu = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = std::exp(logw[i] - mx);
    z += w;
    eu += w * u[i];
  }
  eu /= z;
  // log E_base[exp(-gamma U)] = mx + log z (base weights are normalized).
  const double kl = -gamma * eu - (mx + std::log(z));
  return std::max(kl, 0.0);
}

double CalibrateGamma(const ParticleEnsemble& base, const MixedDefenderStrategy& pi,
                      double rho, double gamma_max, const UtilityParams& params) {
  Require(rho >= 0.0, "calibrate gamma: rho must be >= 0");
  if (rho == 0.0) return 0.0;
  if (EnsembleTiltKl(base, pi, gamma_max, params) < rho) return gamma_max;
  double lo = 0.0, hi = gamma_max;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (EnsembleTiltKl(base, pi, mid, params) >= rho) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

DefenderOracle MirrorAscentOracle(const UtilityParams& params, double budget,
                                  const MirrorAscentConfig& cfg) {
  return [params, budget, cfg](std::span<const ParticleEnsemble> ens,
                               std::span<const double> sigma) {
    return DefenderBestResponse(ens, sigma, params, budget, cfg);
  };
}

DefenderOracle FiniteOracle(std::vector<PatrolStrategy> candidates,
                            const UtilityParams& params) {
  Require(!candidates.empty(), "finite oracle: no candidates");
  return [candidates = std::move(candidates), params](
             std::span<const ParticleEnsemble> ens, std::span<const double> sigma) {
    ScenarioObjective obj(ens, sigma, params);
    std::size_t best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const double v = obj.Value(candidates[i].x);
      if (v > best_v) {
        best_v = v;
        best = i;
      }
    }
    return candidates[best];
  };
}

namespace {

MixedDefenderStrategy SupportOf(const std::vector<PatrolStrategy>& atoms,
                                const std::vector<double>& probs) {
  MixedDefenderStrategy pi;
  double total = 0.0;
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    if (probs[j] > 1e-15) {
      pi.atoms.push_back(atoms[j]);
      pi.probs.push_back(probs[j]);
      total += probs[j];
    }
  }
  for (double& p : pi.probs) p /= total;
  return pi;
}

}  // namespace

DefenderSolution DoubleOracle(const TiltSampler& sampler, const DoubleOracleConfig& cfg,
                              Rng& rng, const DefenderOracle& oracle_in) {
  cfg.Validate();
  Require(sampler.dim() == cfg.params.dim(), "double oracle: sampler dimension mismatch");
  const auto start = std::chrono::steady_clock::now();
  const DefenderOracle oracle =
      oracle_in ? oracle_in : MirrorAscentOracle(cfg.params, cfg.budget, cfg.mirror);
  const std::uint64_t base_seed = rng.seed();

  DefenderSolution sol;
  sol.seed = base_seed;
  sol.config = cfg;

  Rng init_rng(DeriveSeed(base_seed, {HashString("x0")}));
  sol.defender_atoms.push_back(
      {RandomFeasible(cfg.params.dim(), cfg.budget, init_rng), cfg.budget});
  sol.adversary_atoms.push_back(TiltSpec::Base());

  std::vector<ParticleEnsemble> ensembles;
  std::vector<std::size_t> ensemble_size;
  std::vector<std::vector<double>> cells;  // payoff estimates, row-major by atom
  const double min_iter = 1.0 / (16.0 * cfg.prob);
  auto sample = [&](std::size_t l, int i, std::size_t n) {
    Rng r(DeriveSeed(base_seed, {static_cast<std::uint64_t>(i),
                                 static_cast<std::uint64_t>(l)}));
    return sampler.Sample(sol.adversary_atoms[l], n, r);
  };

  sol.terminated_by = "cap";
  for (int i = 1; i <= cfg.max_iters; ++i) {
    try {
      const std::size_t n = std::min(SampleSize(i, cfg.schedule, cfg.epsilon),
                                     cfg.schedule.max_particles);
      // (a) empirical versions of every adversary atom
      for (std::size_t l = 0; l < sol.adversary_atoms.size(); ++l) {
        if (l < ensembles.size()) {
          if (cfg.cache_ensembles) continue;
          ensembles[l] = sample(l, i, n);
          ensemble_size[l] = n;
        } else {
          ensembles.push_back(sample(l, i, n));
          ensemble_size.push_back(n);
        }
      }
      // (b) payoff matrix, (c) subgame equilibrium
      const std::size_t rows = sol.defender_atoms.size();
      const std::size_t cols = sol.adversary_atoms.size();
      // With cached ensembles only the new row and column need estimating.
      if (!cfg.cache_ensembles) cells.clear();
      cells.resize(rows);
      for (std::size_t j = 0; j < rows; ++j) {
        for (std::size_t l = cells[j].size(); l < cols; ++l) {
          cells[j].push_back(ExpectedUtility(sol.defender_atoms[j].x, ensembles[l], cfg.params));
        }
      }
      PayoffMatrix a(rows, cols);
      for (std::size_t j = 0; j < rows; ++j) {
        for (std::size_t l = 0; l < cols; ++l) a.at(j, l) = cells[j][l];
      }
      const SubgameEquilibrium eq = SolveMatrixGame(a);
      MixedDefenderStrategy pi_star = SupportOf(sol.defender_atoms, eq.pi);

      // (d) defender response to sigma*, (e) adversary response to pi*
      PatrolStrategy x_new = oracle(ensembles, eq.sigma);
      double gamma = cfg.gamma;
      if (cfg.adversary == AdversaryMode::kKlRadius) {
        gamma = CalibrateGamma(ensembles[0], pi_star, cfg.rho, cfg.gamma_max, cfg.params);
      }
      TiltSpec tilt_new = AdversaryBestResponse(pi_star, gamma, cfg.params);

      // (f) append, (g) bounds
      sol.defender_atoms.push_back(x_new);
      sol.adversary_atoms.push_back(tilt_new);
      ensembles.push_back(sample(sol.adversary_atoms.size() - 1, i, n));
      ensemble_size.push_back(n);
      const ParticleEnsemble& tau_new = ensembles.back();

      IterationRecord rec;
      rec.iteration = i;
      rec.particles = n;
      rec.subgame_value = eq.value;
      rec.gamma = gamma;
      rec.pi = eq.pi;
      rec.sigma = eq.sigma;
      rec.lower = 0.0;
      for (std::size_t j = 0; j < rows; ++j) {
        if (eq.pi[j] != 0.0) {
          rec.lower += eq.pi[j] * ExpectedUtility(sol.defender_atoms[j].x, tau_new, cfg.params);
        }
      }
      rec.upper = 0.0;
      for (std::size_t l = 0; l < cols; ++l) {
        if (eq.sigma[l] != 0.0) {
          rec.upper += eq.sigma[l] * ExpectedUtility(x_new.x, ensembles[l], cfg.params);
        }
      }
      sol.history.push_back(rec);
      sol.gap_history.push_back(rec.gap());
      sol.pi = std::move(pi_star);
      sol.value = eq.value;
      sol.iterations = i;

      if (std::abs(rec.gap()) < 2.0 * cfg.epsilon && static_cast<double>(i) > min_iter) {
        sol.terminated_by = "predicate";
        break;
      }
    } catch (const Error& e) {
      Fail(e.code(), "double oracle iteration " + std::to_string(i) + ": " + e.what());
    }
  }
  sol.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return sol;
}

DefenderSolution DoubleOracle(std::shared_ptr<const ScoreModel> score, const Context& c,
                              SamplerKind kind, const DoubleOracleConfig& cfg, Rng& rng) {
  DiffusionTiltSampler sampler(std::move(score), c, kind);
  return DoubleOracle(sampler, cfg, rng);
}

namespace {

json StrategyToJson(const MixedDefenderStrategy& pi) {
  json atoms = json::array();
  for (const PatrolStrategy& a : pi.atoms) atoms.push_back(a.x);
  return json{{"atoms", atoms},
              {"probs", pi.probs},
              {"budget", pi.atoms.empty() ? 0.0 : pi.atoms.front().budget}};
}

std::string ScheduleName(ScheduleMode m) {
  return m == ScheduleMode::kFixed ? "fixed" : "theoretical";
}

}  // namespace

void WriteStrategyJson(const MixedDefenderStrategy& pi, std::ostream& out) {
  out << StrategyToJson(pi).dump(2) << "\n";
}

void WriteSolutionJson(const DefenderSolution& sol, std::ostream& out) {
  const DoubleOracleConfig& c = sol.config;
  json j;
  j["strategy"] = StrategyToJson(sol.pi);
  j["value"] = sol.value;
  j["iterations"] = sol.iterations;
  j["terminated_by"] = sol.terminated_by;
  j["seed"] = sol.seed;
  j["gap_history"] = sol.gap_history;
  json hist = json::array();
  for (const IterationRecord& r : sol.history) {
    hist.push_back({{"iteration", r.iteration},
                    {"particles", r.particles},
                    {"subgame_value", r.subgame_value},
                    {"lower", r.lower},
                    {"upper", r.upper},
                    {"gamma", r.gamma},
                    {"pi", r.pi},
                    {"sigma", r.sigma}});
  }
  j["history"] = hist;
  json datoms = json::array();
  for (const PatrolStrategy& a : sol.defender_atoms) datoms.push_back(a.x);
  j["defender_atoms"] = datoms;
  json tilts = json::array();
  for (const TiltSpec& t : sol.adversary_atoms) {
    const MixedDefenderStrategy* d = t.defender();
    tilts.push_back({{"gamma", t.gamma},
                     {"defender", d ? StrategyToJson(*d) : json(nullptr)}});
  }
  j["adversary_atoms"] = tilts;
  j["config"] = {
      {"epsilon", c.epsilon},
      {"prob", c.prob},
      {"gamma", c.gamma},
      {"adversary", c.adversary == AdversaryMode::kFixedGamma ? "fixed_gamma" : "kl_radius"},
      {"rho", c.rho},
      {"max_iters", c.max_iters},
      {"schedule", ScheduleName(c.schedule.mode)},
      {"samples", c.schedule.fixed},
      {"schedule_c", c.schedule.c},
      {"schedule_m", c.schedule.m},
      {"schedule_delta", c.schedule.delta},
      {"ma_step", c.mirror.step},
      {"ma_iters", c.mirror.iterations},
      {"budget", c.budget},
      {"cache_ensembles", c.cache_ensembles},
      {"utility",
       {{"n0", c.params.initial_population},
        {"r", c.params.growth_rate},
        {"alpha", c.params.alpha},
        {"psi", c.params.psi},
        {"theta", c.params.theta},
        {"clip", c.params.clip}}}};
  out << j.dump(2) << "\n";
}

MixedDefenderStrategy ReadStrategyJson(std::istream& in) {
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    Fail(ErrorCode::kIo, std::string("strategy json: ") + e.what());
  }
  if (j.contains("strategy")) j = j["strategy"];
  try {
    MixedDefenderStrategy pi;
    const double budget = j.at("budget").get<double>();
    for (const auto& a : j.at("atoms")) pi.atoms.push_back({a.get<std::vector<double>>(), budget});
    pi.probs = j.at("probs").get<std::vector<double>>();
    pi.Validate();
    return pi;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    Fail(ErrorCode::kIo, std::string("strategy json: ") + e.what());
  }
}

}  // namespace rpatrol
