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


// Acceptance runner: one PASS/FAIL line per criterion. With arguments, only
// the listed criterion numbers run.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rpatrol/config.hpp"
#include "rpatrol/diffusion.hpp"
#include "rpatrol/double_oracle.hpp"
#include "rpatrol/equivalence.hpp"
#include "rpatrol/error.hpp"
#include "rpatrol/harness.hpp"
#include "rpatrol/matrix_game.hpp"
#include "rpatrol/mirror_ascent.hpp"
#include "rpatrol/quadrature.hpp"
#include "rpatrol/samplers.hpp"
#include "rpatrol/score_model.hpp"
#include "rpatrol/tilt.hpp"
#include "rpatrol/utility.hpp"
#include "test_util.hpp"

using namespace rpatrol;
namespace rt = rpatrol::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

TiltSpec LinearTilt(double gamma) {
  return TiltSpec::Make(gamma, std::make_shared<LinearPotential>(Vec{1.0}));
}

GaussianMixtureModel TwoComponent1D() {
  return GaussianMixtureModel({0.3, 0.7}, {AffineMap::Constant({-1.5}), AffineMap::Constant({2.0})},
                              {0.5, 0.8});
}

double FirstMoment(std::span<const double> z) { return z[0]; }

std::string OutputRoot(const std::string& name) {
  return ResolveOutputDir("rpatrol_acceptance/" + name);
}

ExperimentReport RunText(const std::string& text) {
  return RunExperiment(ExperimentConfig::FromConfig(Config::Parse(text)));
}

// 1. Exponential tilt of N(0, 1) by U(z) = z with gamma = 1.
Outcome TiltCorrectness() {
  const GaussianMixtureModel normal({1.0}, {AffineMap::Constant({0.0})}, {1.0});
  const QuadratureGrid grid = QuadratureGrid::Cube(1, -12.0, 12.0, 6000);
  const KlReport kl = KlQuadrature(LinearTilt(1.0), normal, Context{}, grid);
  const GridLaw base = DiscretizeLogDensity(
      [&](std::span<const double> z) { return normal.LogDensity(z, Context{}); }, grid);
  const GridLaw tilted = TiltLaw(base, LinearTilt(1.0));
  const double mean = tilted.Expect(FirstMoment);
  const double var = tilted.Expect([&](std::span<const double> z) { return (z[0] - mean) * (z[0] - mean); });
  const bool ok = std::abs(kl.kl - 0.5) <= 1e-3 && std::abs(mean + 1.0) <= 1e-3 &&
                  std::abs(var - 1.0) <= 1e-3;
  return {ok, "kl=" + Fmt("%.6f", kl.kl) + " mean=" + Fmt("%.6f", mean) + " var=" + Fmt("%.6f", var)};
}

// 2. Twisted SMC mean-squared error decays like 1/N.
Outcome SmcErrorDecay() {
  const MixtureScoreModel model(TwoComponent1D(), NoiseSchedule::ForDataVariance(100, 4.0));
  const TiltSpec tilt = LinearTilt(1.0);
  const GridLaw chain = ReverseChainLaw1D(model, Context{}, -10.0, 10.0, 4000);
  const double truth = TiltLaw(chain, tilt).Expect(FirstMoment);
  std::vector<double> log_n, log_mse;
  std::string detail;
  for (std::size_t n : {250u, 1000u, 4000u}) {
    double mse = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Rng rng(DeriveSeed(2, {n, seed}));
      const double est = TwistedSmc(model, Context{}, tilt, n, rng).Expect(FirstMoment);
      mse += (est - truth) * (est - truth) / 50.0;
    }
    log_n.push_back(std::log(static_cast<double>(n)));
    log_mse.push_back(std::log(mse));
    detail += "mse(" + std::to_string(n) + ")=" + Fmt("%.3g", mse) + " ";
  }
  const double slope = rt::Slope(log_n, log_mse);
  return {std::abs(slope + 1.0) <= 0.3, detail + "slope=" + Fmt("%.3f", slope)};
}

// 3. With gamma = 0 every sampler reduces to ancestral sampling.
Outcome GammaZeroReductions() {
  const MixtureScoreModel model(TwoComponent1D(), NoiseSchedule::ForDataVariance(100, 4.0));
  const std::size_t n = 10000;
  Rng ra(31);
  const std::vector<double> anc = AncestralSample(model, Context{}, n, ra).data();
  const TiltSpec zero = LinearTilt(0.0);
  Rng r1(32), r2(33), r3(34);
  const std::vector<std::pair<std::string, ParticleEnsemble>> runs = {
      {"smc", TwistedSmc(model, Context{}, zero, n, r1)},
      {"is", ImportanceSampling(model, Context{}, zero, n, r2)},
      {"dps", DpsSample(model, Context{}, zero, n, r3)}};
  bool ok = true;
  std::string detail;
  const double crit = rt::KsCritical(n, n, 0.01);
  for (const auto& [name, e] : runs) {
    const double d = rt::KsStatistic(e.particles().data(), anc);
    for (double w : e.weights()) ok = ok && std::abs(w - 1.0 / n) < 1e-12;
    ok = ok && d <= crit;
    detail += name + " D=" + Fmt("%.4f", d) + " ";
  }
  return {ok, detail + "crit=" + Fmt("%.4f", crit)};
}

// 4. Zero-sum LP solver.
Outcome LpSolver() {
  bool ok = true;
  const SubgameEquilibrium pennies = SolveMatrixGame(PayoffMatrix(2, 2, {1, -1, -1, 1}));
  ok = ok && std::abs(pennies.value) <= 1e-9 && std::abs(pennies.pi[0] - 0.5) <= 1e-9 &&
       std::abs(pennies.sigma[0] - 0.5) <= 1e-9;
  const SubgameEquilibrium g = SolveMatrixGame(PayoffMatrix(2, 2, {3, 0, 1, 2}));
  ok = ok && std::abs(g.value - 1.5) <= 1e-9 && std::abs(g.pi[0] - 0.25) <= 1e-9 &&
       std::abs(g.pi[1] - 0.75) <= 1e-9;
  Rng rng(4);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    std::vector<double> v(64);
    for (double& x : v) x = -5.0 + 10.0 * rng.Uniform();
    const PayoffMatrix a(8, 8, v);
    const SubgameEquilibrium e = SolveMatrixGame(a);
    worst = std::max({worst, e.value - e.RowGuarantee(a), e.ColumnGuarantee(a) - e.value});
  }
  ok = ok && worst <= 1e-7;
  return {ok, "2x2 values " + Fmt("%.12f", pennies.value) + ", " + Fmt("%.12f", g.value) +
                  "; worst certificate violation " + Fmt("%.2e", worst)};
}

// Tilt of `base` against payoffs d on the boundary of the KL ball of radius rho.
std::vector<double> BallMinimizer(const std::vector<double>& base, const std::vector<double>& d,
                                  double rho) {
  auto tilt = [&](double g, std::vector<double>& tau) {
    double dmin = *std::min_element(d.begin(), d.end());
    double total = 0.0;
    tau.resize(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) total += (tau[i] = base[i] * std::exp(-g * (d[i] - dmin)));
    double kl = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) {
      tau[i] /= total;
      if (tau[i] > 0.0) kl += tau[i] * std::log(tau[i] / base[i]);
    }
    return kl;
  };
  std::vector<double> tau;
  double lo = 0.0, hi = 1.0;
  while (tilt(hi, tau) < rho && hi < 1e8) hi *= 2.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (tilt(mid, tau) > rho ? hi : lo) = mid;
  }
  tilt(lo, tau);
  return tau;
}

// 5. Double oracle on the discretized K = 2 game against the full game.
Outcome DoubleOracleConvergence() {
  AnalyticTestbedConfig bed_cfg;
  UtilityParams params = UtilityParams::Defaults(2, bed_cfg.clip);
  for (double& v : params.initial_population) v = bed_cfg.n0;
  const double rho = 0.1;
  const double budget = 1.0;
  const GaussianMixtureModel mix = AnalyticTestbedMixture();
  const Context c{{0.4, 0.6}};
  const GridLaw law = DiscretizeLogDensity(
      [&](std::span<const double> z) { return mix.LogDensity(z, c); }, QuadratureGrid::Cube(2, 0.0, 6.0, 15));
  const std::vector<double> base = law.Probabilities();
  std::vector<PatrolStrategy> xs;
  for (int j = 0; j <= 20; ++j) xs.push_back({{budget * j / 20.0, budget * (20 - j) / 20.0}, budget});

  // Full game on the grids: max over pi in the 21-simplex of the KL-ball
  // minimum. Columns are ball minimizers added one at a time; the restricted
  // LP value bounds the game from above (the ball is convex), the exact inner
  // minimum at the LP strategy bounds it from below.
  const std::size_t m = xs.size(), n = base.size();
  std::vector<double> a(m * n);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < n; ++k) a[j * n + k] = Utility(xs[j].x, law.points.row(k), params);
  std::vector<std::vector<double>> cols{base};
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  for (int round = 0; round < 200 && upper - lower > 1e-6; ++round) {
    PayoffMatrix sub(m, cols.size());
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t l = 0; l < cols.size(); ++l)
        for (std::size_t k = 0; k < n; ++k) sub.at(j, l) += a[j * n + k] * cols[l][k];
    const SubgameEquilibrium eq = SolveMatrixGame(sub);
    upper = std::min(upper, eq.value);
    std::vector<double> d(n, 0.0);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < n; ++k) d[k] += eq.pi[j] * a[j * n + k];
    std::vector<double> tau = BallMinimizer(base, d, rho);
    double g = 0.0;
    for (std::size_t k = 0; k < n; ++k) g += d[k] * tau[k];
    lower = std::max(lower, g);
    cols.push_back(std::move(tau));
  }
  const double full = 0.5 * (lower + upper);

  DoubleOracleConfig cfg;
  cfg.adversary = AdversaryMode::kKlRadius;
  cfg.rho = rho;
  cfg.epsilon = 0.05;
  cfg.max_iters = 15;
  cfg.budget = budget;
  cfg.params = params;
  const DiscreteTiltSampler sampler(law.points, base);
  bool ok = upper - lower <= 1e-4;
  std::string detail = "full=[" + Fmt("%.5f", lower) + "," + Fmt("%.5f", upper) + "] do:";
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(DeriveSeed(5, {seed}));
    const DefenderSolution sol = DoubleOracle(sampler, cfg, rng, FiniteOracle(xs, params));
    ok = ok && sol.terminated_by == "predicate" && sol.iterations <= 15 &&
         std::abs(sol.value - full) <= cfg.epsilon;
    detail += " " + Fmt("%.4f", sol.value) + "/" + std::to_string(sol.iterations) + sol.terminated_by.substr(0, 1);
  }
  return {ok, detail};
}

// 6. Mixed-over-mixed reformulation matches the direct KL-ball game.
Outcome Equivalence() {
  Rng rng(6);
  bool ok = true;
  std::string detail;
  for (std::size_t outcomes : {2u, 3u}) {
    FiniteGame g;
    g.payoff = PayoffMatrix(3, outcomes);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t k = 0; k < outcomes; ++k) g.payoff.at(i, k) = rng.Uniform();
    g.base.assign(outcomes, 0.0);
    double total = 0.0;
    for (double& p : g.base) total += (p = 0.2 + rng.Uniform());
    for (double& p : g.base) p /= total;
    g.rho = 0.1;
    const EquivalenceResult r = EquivalenceCheck(g);
    const double diff = std::abs(r.value_eq1 - r.value_eq2);
    ok = ok && diff < 2e-3;
    detail += "|Z|=" + std::to_string(outcomes) + " diff=" + Fmt("%.2e", diff) + " ";
  }
  return {ok, detail};
}

// 7. Mirror ascent against a budget grid search.
Outcome MirrorAscentCheck() {
  const UtilityParams params = UtilityParams::Defaults(2, false);
  // Step 0.1 as configured; entropic steps approach a face of the simplex
  // slowly, so the run length is raised from the 100 used inside the solver.
  MirrorAscentConfig long_run;
  long_run.iterations = 1000;
  Rng rng(7);
  double worst = 0.0, worst_short = 0.0;
  for (int inst = 0; inst < 5; ++inst) {
    StateMatrix z(50, 2);
    for (std::size_t i = 0; i < 50; ++i) {
      z.at(i, 0) = 1.0 + 2.0 * rng.Uniform() + inst * 0.3;
      z.at(i, 1) = 2.0 * rng.Uniform();
    }
    const std::vector<ParticleEnsemble> ens{ParticleEnsemble::Uniform(z)};
    const std::vector<double> sigma{1.0};
    const double budget = 0.5 + inst * 0.5;
    const ScenarioObjective obj(ens, sigma, params);
    const PatrolStrategy x = DefenderBestResponse(ens, sigma, params, budget, long_run);
    const PatrolStrategy x100 = DefenderBestResponse(ens, sigma, params, budget, {});
    const GridSearchResult grid = GridSearchBudget(
        [&](std::span<const double> v) { return obj.Value(v); }, 2, budget, 200);
    worst = std::max(worst, grid.objective - obj.Value(x.x));
    worst_short = std::max(worst_short, grid.objective - obj.Value(x100.x));
  }
  // Symmetric: mirrored particles.
  StateMatrix z(40, 2);
  for (std::size_t i = 0; i < 20; ++i) {
    const double a = 3.0 * rng.Uniform(), b = 3.0 * rng.Uniform();
    z.at(2 * i, 0) = a;
    z.at(2 * i, 1) = b;
    z.at(2 * i + 1, 0) = b;
    z.at(2 * i + 1, 1) = a;
  }
  const std::vector<ParticleEnsemble> sym{ParticleEnsemble::Uniform(z)};
  const std::vector<double> one{1.0};
  const PatrolStrategy s = DefenderBestResponse(sym, one, params, 1.0, {});
  const double split = std::max(std::abs(s.x[0] - 0.5), std::abs(s.x[1] - 0.5));
  return {worst <= 1e-3 && split <= 1e-3,
          "worst shortfall " + Fmt("%.2e", worst) + " (" + Fmt("%.2e", worst_short) +
              " after 100 steps), symmetric split error " + Fmt("%.2e", split)};
}

// 8. Analytic gradients against central differences.
Outcome GradientChecks() {
  const UtilityParams params = UtilityParams::Defaults(3, false);
  const GaussianMixtureModel g3({0.5, 0.3, 0.2},
                                {AffineMap{{1, 0, 0, 1, 0.5, 0.5}, {0, 1, 2}},
                                 AffineMap{{0, 0, 1, 0, 0, 1}, {2, 0, -1}},
                                 AffineMap{{0, 0, 0, 0, 0, 0}, {1, 1, 1}}},
                                {0.7, 1.1, 0.4});
  const NoiseSchedule sched = NoiseSchedule::RandomWalk(50, 0.3);
  Rng rng(8);
  double worst = 0.0;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
  for (int p = 0; p < 20; ++p) {
    Vec x(3), z(3);
    for (double& v : x) v = rng.Uniform() / 3.0;
    for (double& v : z) v = 6.0 * rng.Uniform();
    const Vec gx = UtilityGradX(x, z, params), gz = UtilityGradZ(x, z, params);
    const Context c{{rng.Uniform(), rng.Uniform()}};
    const int t = 1 + static_cast<int>(rng.Index(50));
    const Vec zs = {rng.Normal(), rng.Normal(), rng.Normal()};
    const Vec sc = AnalyticScore(g3, zs, t, c, sched);
    for (std::size_t k = 0; k < 3; ++k) {
      worst = std::max(worst, rel(gx[k], rt::CentralDiff([&](std::span<const double> v) { return Utility(v, z, params); }, x, k, 1e-6)));
      worst = std::max(worst, rel(gz[k], rt::CentralDiff([&](std::span<const double> v) { return Utility(x, v, params); }, z, k, 1e-6)));
      worst = std::max(worst, rel(sc[k], rt::CentralDiff([&](std::span<const double> v) {
                                    return g3.LogDensity(v, c, sched.CumulativeVariance(t));
                                  }, zs, k, 1e-6)));
    }
  }
  return {worst <= 1e-5, "worst relative error " + Fmt("%.2e", worst)};
}

std::map<std::pair<std::string, int>, ExperimentReport::SeedAggregate> BySeed(
    const ExperimentReport& r, std::size_t samples = 0, double gamma = -1.0) {
  std::map<std::pair<std::string, int>, ExperimentReport::SeedAggregate> out;
  for (const auto& s : r.per_seed) {
    if (samples != 0 && s.samples != samples) continue;
    if (gamma >= 0.0 && s.gamma != gamma) continue;
    out[{s.method, s.seed}] = s;
  }
  return out;
}

// 9. Robustness direction at desk scale.
Outcome Robustness() {
  const ExperimentReport r = RunText(
      "testbed = analytic\nmethods = nro, do_is, do_smc\nseeds = 5\ntest_instances = 10\n"
      "validation_instances = 3\nsamples = 500\noutput_dir = " + OutputRoot("robustness") + "\n");
  const auto seeds = BySeed(r);
  int worst_wins = 0, avg_wins = 0;
  std::string detail;
  for (int s = 0; s < 5; ++s) {
    const auto& smc = seeds.at({"do_smc", s});
    if (smc.worst <= seeds.at({"nro", s}).worst) ++worst_wins;
    if (smc.average <= seeds.at({"do_is", s}).average) ++avg_wins;
  }
  detail = "worst(do_smc)<=worst(nro) on " + std::to_string(worst_wins) +
           "/5, avg(do_smc)<=avg(do_is) on " + std::to_string(avg_wins) + "/5";
  return {worst_wins >= 4 && avg_wins >= 4, detail};
}

// 10. Parameter-study shape: interior-optimal gamma and a sample-count plateau.
Outcome ParameterStudy() {
  const ExperimentReport g = RunText(
      "testbed = analytic\nmethods = do_smc\nseeds = 5\ntest_instances = 10\nstudy = gamma\n"
      "samples = 500\noutput_dir = " + OutputRoot("gamma_study") + "\n");
  const std::vector<double> gammas = {0.0, 0.25, 1.0, 4.0, 16.0};
  int interior = 0;
  std::string detail = "best gamma per seed:";
  for (int s = 0; s < 5; ++s) {
    std::size_t best = 0;
    double best_v = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < gammas.size(); ++k) {
      for (const auto& a : g.per_seed) {
        if (a.seed == s && a.gamma == gammas[k] && a.average < best_v) {
          best_v = a.average;
          best = k;
        }
      }
    }
    if (best != 0 && best + 1 != gammas.size()) ++interior;
    detail += " " + Fmt("%g", gammas[best]);
  }

  const ExperimentReport n = RunText(
      "testbed = analytic\nmethods = do_smc\nseeds = 5\ntest_instances = 10\nstudy = samples\n"
      "gamma = 0.25\nsamples = 500\noutput_dir = " + OutputRoot("samples_study") + "\n");
  double r500 = 0.0, r2000 = 0.0;
  for (const auto& row : n.summary) {
    if (row.statistic != "average") continue;
    if (row.samples == 500) r500 = row.mean;
    if (row.samples == 2000) r2000 = row.mean;
  }
  const double rel = std::abs(r500 - r2000) / r2000;
  detail += "; avg regret N=500 " + Fmt("%.4f", r500) + " vs N=2000 " + Fmt("%.4f", r2000) +
            " (" + Fmt("%.1f", 100.0 * rel) + "%)";
  return {interior >= 4 && rel <= 0.05, detail};
}

// 11. Sample-size schedule.
Outcome Schedule() {
  const SampleSchedule th = SampleSchedule::Theoretical(16.0, 1.0, 1.0);
  bool ok = SampleSize(1, th, 0.5) == 256;
  for (int i = 1; i <= 10; ++i) {
    ok = ok && SampleSize(i, SampleSchedule::Fixed(500), 0.5) == 500;
    if (i > 1) ok = ok && SampleSize(i, th, 0.5) > SampleSize(i - 1, th, 0.5);
  }
  return {ok, "N_1=" + std::to_string(SampleSize(1, th, 0.5)) +
                  " N_10=" + std::to_string(SampleSize(10, th, 0.5))};
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 12. Byte-identical regret CSVs across runs, serial and parallel.
Outcome Determinism() {
  const std::string body =
      "testbed = analytic\nmethods = nro, aor, do_is, do_dps, do_smc\nseeds = 2\n"
      "test_instances = 2\nvalidation_instances = 1\ngamma_grid = 0.5, 1\nsamples = 200\n"
      "restarts = 2\naor_rounds = 3\n";
  std::vector<std::string> csv;
  for (const auto& [tag, threads] : std::vector<std::pair<std::string, int>>{
           {"serial_a", 1}, {"serial_b", 1}, {"parallel_a", 4}, {"parallel_b", 4}}) {
    const std::string dir = OutputRoot("determinism_" + tag);
    RunText(body + "threads = " + std::to_string(threads) + "\noutput_dir = " + dir + "\n");
    csv.push_back(ReadFile(dir + "/regret.csv"));
  }
  bool ok = !csv[0].empty();
  for (const std::string& c : csv) ok = ok && c == csv[0];
  return {ok, std::to_string(csv[0].size()) + " bytes, 4 runs " + (ok ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"exponential tilt", TiltCorrectness},
      {"twisted smc error decay", SmcErrorDecay},
      {"gamma=0 reductions", GammaZeroReductions},
      {"lp solver", LpSolver},
      {"double oracle convergence", DoubleOracleConvergence},
      {"mixture equivalence", Equivalence},
      {"mirror ascent", MirrorAscentCheck},
      {"gradient checks", GradientChecks},
      {"robustness direction", Robustness},
      {"parameter study shape", ParameterStudy},
      {"sample schedule", Schedule},
      {"determinism", Determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("criterion %2d %-26s %s  %s  [%.1fs]\n", id, criteria[k].first.c_str(),
                o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
